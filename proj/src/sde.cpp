#include "msfilter/sde.hpp"

#include <cmath>
#include <limits>

namespace msf {

namespace {
inline void check_finite(double x, std::int64_t k) {
  if (!std::isfinite(x)) throw DivergenceError(k);
}
}  // namespace

void simulate_slow_fast(const ModelSpec& m, double eps, const NoiseBundle& nb,
                        std::vector<double>& x_out, std::vector<double>& z_out) {
  const TimeGrid& g = nb.grid;
  const double dt = g.dt();
  if (!(eps > 0.0)) throw ConfigError("simulate_slow_fast: eps must be > 0");
  if (dt > eps / 10.0 + 1e-15)
    throw ConfigError("simulate_slow_fast: dt must be <= eps/10 for the fast scale");

  const auto n = static_cast<std::size_t>(g.steps);
  x_out.assign(n + 1, 0.0);
  z_out.assign(n + 1, 0.0);
  double x = m.x0 + m.x0_spread * nb.xi0;
  double z = m.z0;
  x_out[0] = x;
  z_out[0] = z;

  const double inv_eps = 1.0 / eps;
  const double fast_sig = m.sigma2 / std::sqrt(eps);
  const double comp1 = m.f1_compensator() * dt;            // left-state free for f1=c1*u
  const double comp2 = m.f2_compensator() * inv_eps * dt;  // nu2/eps compensation

  for (std::size_t k = 0; k < n; ++k) {
    const double xl = x, zl = z;
    // slow
    x += m.b1(xl, zl) * dt + m.sig_v(xl) * nb.dv[k] + m.sig_b(xl) * nb.db[k] - comp1;
    for (std::uint32_t e = nb.j1.first_in_cell[k]; e < nb.j1.first_in_cell[k + 1]; ++e)
      x += m.f1(nb.j1.events[e].mark);
    // fast
    z += m.b2(xl, zl) * inv_eps * dt + fast_sig * nb.dw[k] - comp2;
    for (std::uint32_t e = nb.j2.first_in_cell[k]; e < nb.j2.first_in_cell[k + 1]; ++e)
      z += m.f2(nb.j2.events[e].mark);
    check_finite(x, static_cast<std::int64_t>(k));
    check_finite(z, static_cast<std::int64_t>(k));
    x_out[k + 1] = x;
    z_out[k + 1] = z;
  }
}

std::vector<double> simulate_frozen_fast(const ModelSpec& m, double x_frozen, double z_init,
                                         const NoiseBundle& nb) {
  const TimeGrid& g = nb.grid;
  const double dt = g.dt();
  const auto n = static_cast<std::size_t>(g.steps);
  std::vector<double> z(n + 1, 0.0);
  z[0] = z_init;
  const double comp2 = m.f2_compensator() * dt;
  double zz = z_init;
  for (std::size_t k = 0; k < n; ++k) {
    zz += m.b2(x_frozen, zz) * dt + m.sigma2 * nb.dw[k] - comp2;
    for (std::uint32_t e = nb.j2.first_in_cell[k]; e < nb.j2.first_in_cell[k + 1]; ++e)
      zz += m.f2(nb.j2.events[e].mark);
    check_finite(zz, static_cast<std::int64_t>(k));
    z[k + 1] = zz;
  }
  return z;
}

std::vector<double> simulate_auxiliary(const ModelSpec& m, double eps, std::int64_t delta_steps,
                                       const std::vector<double>& xeps,
                                       const std::vector<double>& zeps, const NoiseBundle& nb) {
  const TimeGrid& g = nb.grid;
  const double dt = g.dt();
  if (delta_steps <= 0) throw ConfigError("simulate_auxiliary: delta_steps must be >= 1");
  const auto n = static_cast<std::size_t>(g.steps);
  if (xeps.size() != n + 1 || zeps.size() != n + 1)
    throw ConfigError("simulate_auxiliary: path/grid size mismatch");

  std::vector<double> zh(n + 1, 0.0);
  const double inv_eps = 1.0 / eps;
  const double fast_sig = m.sigma2 / std::sqrt(eps);
  const double comp2 = m.f2_compensator() * inv_eps * dt;

  double z = zeps[0];
  zh[0] = z;
  double x_frozen = xeps[0];
  for (std::size_t k = 0; k < n; ++k) {
    if (k % static_cast<std::size_t>(delta_steps) == 0) {
      x_frozen = xeps[k];  // freeze the slow state on this partition cell
      z = zeps[k];         // re-anchor to the true fast state
    }
    z += m.b2(x_frozen, z) * inv_eps * dt + fast_sig * nb.dw[k] - comp2;
    for (std::uint32_t e = nb.j2.first_in_cell[k]; e < nb.j2.first_in_cell[k + 1]; ++e)
      z += m.f2(nb.j2.events[e].mark);
    check_finite(z, static_cast<std::int64_t>(k));
    zh[k + 1] = z;
  }
  return zh;
}

std::vector<double> simulate_homogenized(const ModelSpec& m, const DriftFn& bbar,
                                         const NoiseBundle& nb) {
  const TimeGrid& g = nb.grid;
  const double dt = g.dt();
  const auto n = static_cast<std::size_t>(g.steps);
  std::vector<double> xs(n + 1, 0.0);
  double x = m.x0 + m.x0_spread * nb.xi0;  // same initial draw as the eps path
  xs[0] = x;
  const double comp1 = m.f1_compensator() * dt;
  for (std::size_t k = 0; k < n; ++k) {
    x += bbar(x) * dt + m.sig_v(x) * nb.dv[k] + m.sig_b(x) * nb.db[k] - comp1;
    for (std::uint32_t e = nb.j1.first_in_cell[k]; e < nb.j1.first_in_cell[k + 1]; ++e)
      x += m.f1(nb.j1.events[e].mark);
    check_finite(x, static_cast<std::int64_t>(k));
    xs[k + 1] = x;
  }
  return xs;
}

FrozenFastStepper::FrozenFastStepper(const ModelSpec& m, double x_frozen, double z_init,
                                     double dt, const SeedSpec& seed)
    : m_(m),
      x_(x_frozen),
      z_(z_init),
      dt_(dt),
      sdt_(std::sqrt(dt)),
      comp_(m.f2_compensator() * dt),
      rng_w_(seed.child(NoiseBundle::W)),
      rng_j_(seed.child(NoiseBundle::J2)) {
  next_jump_ = (m_.r2 > 0.0) ? rng_j_.exponential(m_.r2) : std::numeric_limits<double>::infinity();
}

double FrozenFastStepper::step() {
  z_ += m_.b2(x_, z_) * dt_ + m_.sigma2 * sdt_ * rng_w_.normal() - comp_;
  while (next_jump_ <= dt_) {
    z_ += m_.f2(m_.m2.sample(rng_j_));
    next_jump_ += rng_j_.exponential(m_.r2);
  }
  next_jump_ -= dt_;
  if (!std::isfinite(z_)) throw DivergenceError(-1);
  return z_;
}

double pathwise_sup_sq_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double sup = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) sup = std::max(sup, std::abs(a[i] - b[i]));
  return sup * sup;
}

std::int64_t snapped_delta_steps(double eps, double power, const TimeGrid& grid) {
  const double delta = std::pow(eps, power);
  auto steps = static_cast<std::int64_t>(std::llround(delta / grid.dt()));
  return std::max<std::int64_t>(1, steps);
}

}  // namespace msf
