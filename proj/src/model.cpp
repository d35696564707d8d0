#include "msfilter/model.hpp"

#include <cmath>
#include <stdexcept>

namespace msf {

DissipativityReport verify_dissipativity(const DissipativityConstants& c) {
  DissipativityReport r;
  r.constants = c;
  r.M = 2.0 * c.Lbar_b2 - c.L_b2 - 2.0 * c.L_sigma2 * c.L_sigma2 - 2.0 * c.int_L2_nu2;
  r.valid = r.M > 0.0;
  return r;
}

double ModelSpec::bbar_oracle(double x) const {
  if (!tanh_coupling) return theta * std::sin(x) + q * c * std::tanh(x);
  // E[tanh(G)], G ~ Normal(c tanh x, sigma2^2/(2 kappa)); cached 64-pt rule
  static const Quadrature gh = gauss_hermite(64);
  const double sd = std::sqrt(sigma2 * sigma2 / (2.0 * kappa));
  const double m = c * std::tanh(x);
  return theta * std::sin(x) +
         q * gauss_hermite_mean([](double t) { return std::tanh(t); }, m, sd, gh);
}

DissipativityConstants ModelSpec::declared_constants() const {
  DissipativityConstants dc;
  dc.Lbar_b2 = kappa;               // <z1-z2, b2(x,z1)-b2(x,z2)> = -kappa |z1-z2|^2
  dc.L_b2 = kappa * std::abs(c);    // |b2(x1,z)-b2(x2,z)| <= kappa c |x1-x2|
  dc.L_sigma2 = 0.0;                // constant diffusion
  // L(u) = |c2 u| covers both the (trivial) Lipschitz bound and |f2(0,0,u)|
  dc.int_L2_nu2 = c2 * c2 * r2 * m2.second_moment();
  return dc;
}

void ModelSpec::validate() const {
  if (dims.n != 1 || dims.m != 1 || dims.l != 1 || dims.d != 1 || dims.j != 1)
    throw ConfigError("model: only scalar components are supported (n=m=l=d=j=1)");
  if (!(kappa > 0.0)) throw ConfigError("model: kappa must be > 0");
  if (sigma1 < 0.0 || sigma2 < 0.0 || sigma_b < 0.0 || sigma_v < 0.0)
    throw ConfigError("model: diffusion coefficients must be >= 0");
  if (r1 < 0.0 || r2 < 0.0) throw ConfigError("model: jump rates must be >= 0");
  if (x0_spread < 0.0) throw ConfigError("model: x0_spread must be >= 0");
  const auto rep = dissipativity();
  if (!rep.valid)
    throw ConfigError("model: fast drift fails the dissipativity condition (M = " +
                      std::to_string(rep.M) + " <= 0)");
}

ModelSpec make_model(const std::string& family, const std::map<std::string, double>& overrides) {
  ModelSpec m;
  m.name = family;
  if (family == "analytic-ou") {
    // defaults as declared above
  } else if (family == "bounded-tanh") {
    m.tanh_coupling = true;
    m.c2 = 0.0;  // keeps the frozen fast law exactly Gaussian (drift oracle)
  } else if (family == "levy-correlated") {
    m.levy_family = true;
  } else {
    throw ConfigError("unknown model family: " + family);
  }
  for (const auto& [k, v] : overrides) {
    if (k == "theta") m.theta = v;
    else if (k == "q") m.q = v;
    else if (k == "sigma1") m.sigma1 = v;
    else if (k == "c1") m.c1 = v;
    else if (k == "r1") m.r1 = v;
    else if (k == "kappa") m.kappa = v;
    else if (k == "c") m.c = v;
    else if (k == "sigma2") m.sigma2 = v;
    else if (k == "c2") m.c2 = v;
    else if (k == "r2") m.r2 = v;
    else if (k == "x0") m.x0 = v;
    else if (k == "z0") m.z0 = v;
    else if (k == "x0_spread") m.x0_spread = v;
    else if (k == "sigma_b") m.sigma_b = v;
    else if (k == "sigma_v") m.sigma_v = v;
    else throw ConfigError("unknown model parameter: " + k);
  }
  m.validate();
  return m;
}

HFun HFun::parse(const std::string& name, double scale, double clip) {
  HFun h;
  h.scale = scale;
  h.clip = clip;
  if (name == "scaled-tanh") h.kind = HKind::ScaledTanh;
  else if (name == "clipped-linear") h.kind = HKind::ClippedLinear;
  else if (name == "zero") h.kind = HKind::Zero;
  else if (name == "constant") h.kind = HKind::Constant;
  else throw ConfigError("unknown observation function: " + name);
  return h;
}

int parse_test_function(const std::string& name) {
  if (name == "tanh") return 0;
  if (name == "clip") return 1;
  if (name == "gauss") return 2;
  if (name == "one") return 3;
  throw ConfigError("unknown test function: " + name);
}

std::string test_function_name(int id) {
  switch (id) {
    case 0: return "tanh";
    case 1: return "clip";
    case 2: return "gauss";
    case 3: return "one";
  }
  return "?";
}

}  // namespace msf
