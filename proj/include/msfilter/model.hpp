#pragma once
// Model catalog for the two-scale systems. All families share one parametric
// shape:
//   slow:  dX = b1(X, Z) dt + sigma1 dV [+ sigma_b dB for the levy family]
//                + int f1(u) dN1~   (compensated, nu1 = r1 * markLaw1)
//   fast:  dZ = (1/eps) b2(X, Z) dt + sigma2/sqrt(eps) dW
//                + int f2(u) dN2~   (N2 at rate r2/eps, compensated by (1/eps)nu2)
// with b1(x,z) = theta sin x + q*z (or q*tanh z), b2(x,z) = -kappa (z - c tanh x),
// f1 = c1*u, f2 = c2*u. The frozen fast process is an OU-with-jumps whose
// invariant law has mean c*tanh(x) and variance (sigma2^2 + c2^2 r2 E[u^2])/(2 kappa).
#include <cmath>
#include <map>
#include <string>

#include "msfilter/funcs.hpp"
#include "msfilter/grid.hpp"
#include "msfilter/quadrature.hpp"

namespace msf {

struct Dims {
  int n = 1, m = 1, l = 1, d = 1, j = 1;
};

// declared dissipativity data for the fast block (the constants the drift
// condition M > 0 is computed from)
struct DissipativityConstants {
  double Lbar_b2 = 0.0;    // one-sided (dissipativity) constant
  double L_b2 = 0.0;       // x-Lipschitz constant of b2
  double L_sigma2 = 0.0;   // Lipschitz constant of sigma2
  double int_L2_nu2 = 0.0; // int L(u)^2 nu2(du)
};

struct DissipativityReport {
  double M = 0.0;
  bool valid = false;
  DissipativityConstants constants;
};

// M = 2*Lbar_b2 - L_b2 - 2*L_sigma2^2 - 2*int L(u)^2 nu2(du); valid iff M > 0
DissipativityReport verify_dissipativity(const DissipativityConstants& c);

struct ModelSpec {
  std::string name = "analytic-ou";
  Dims dims;

  // slow coefficients
  double theta = 0.5, q = 0.5, sigma1 = 0.2, c1 = 0.3;
  double r1 = 1.0;
  MarkDist m1;
  bool tanh_coupling = false;  // b1 couples through tanh(z)

  // levy family: slow equation carries two Brownian channels
  bool levy_family = false;
  double sigma_b = 0.25;  // independent channel (B)
  double sigma_v = 0.3;   // channel shared with the observation (V)

  // fast coefficients
  double kappa = 1.0, c = 1.0, sigma2 = 0.7, c2 = 0.5;
  double r2 = 1.0;
  MarkDist m2;

  // initial condition; x0_spread > 0 replaces x0 by Normal(x0, spread^2)
  double x0 = 0.5, z0 = 0.0, x0_spread = 0.0;

  // ---- coefficient evaluation ----
  double b1(double x, double z) const {
    return theta * std::sin(x) + q * (tanh_coupling ? std::tanh(z) : z);
  }
  double sig_v(double) const { return levy_family ? sigma_v : sigma1; }
  double sig_b(double) const { return levy_family ? sigma_b : 0.0; }
  double f1(double u) const { return c1 * u; }
  double b2(double x, double z) const { return -kappa * (z - c * std::tanh(x)); }
  double sig2(double, double) const { return sigma2; }
  double f2(double u) const { return c2 * u; }

  // compensator drifts per unit time (rate included, before any 1/eps scaling)
  double f1_compensator() const { return c1 * r1 * m1.mean(); }
  double f2_compensator() const { return c2 * r2 * m2.mean(); }

  // frozen-fast invariant law (exact for this OU family)
  double invariant_mean(double x) const { return c * std::tanh(x); }
  double invariant_var() const {
    return (sigma2 * sigma2 + c2 * c2 * r2 * m2.second_moment()) / (2.0 * kappa);
  }

  // averaged slow drift. Exact for the z-linear families; for the tanh-coupled
  // family a 64-point Gauss-Hermite evaluation of E[tanh(G)] under the Gaussian
  // invariant law (requires c2 = 0, which the catalog entry declares).
  bool has_drift_oracle() const { return !tanh_coupling || c2 == 0.0; }
  double bbar_oracle(double x) const;

  DissipativityConstants declared_constants() const;
  DissipativityReport dissipativity() const { return verify_dissipativity(declared_constants()); }

  void validate() const;  // dims, positivity, dissipativity
};

// catalog families: "analytic-ou", "bounded-tanh", "levy-correlated";
// overrides maps parameter name -> value (unknown names are errors)
ModelSpec make_model(const std::string& family,
                     const std::map<std::string, double>& overrides = {});

}  // namespace msf
