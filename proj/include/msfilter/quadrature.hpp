#pragma once
// Gauss-Legendre / Gauss-Hermite rules (Newton on the polynomial recurrences)
// and the closed mark-law registry used by every jump measure nu = rate * law.
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "msfilter/rng.hpp"

namespace msf {

struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// n-point Gauss-Legendre on [-1, 1]
Quadrature gauss_legendre(int n);

// n-point Gauss-Hermite, weight exp(-t^2); sum w_i f(t_i) ~ int f(t) e^{-t^2} dt
Quadrature gauss_hermite(int n);

// E[f(G)] for G ~ Normal(mu, sd^2) by n-point Gauss-Hermite
template <class F>
double gauss_hermite_mean(F&& f, double mu, double sd, const Quadrature& gh) {
  const double s = std::sqrt(2.0) * sd;
  double acc = 0.0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) acc += gh.weights[i] * f(mu + s * gh.nodes[i]);
  return acc / std::sqrt(M_PI);
}

// ---- mark laws --------------------------------------------------------------

enum class MarkLaw { Uniform, Normal, PointMass };

MarkLaw parse_mark_law(const std::string& name, double* point_value);

struct MarkDist {
  MarkLaw law = MarkLaw::Uniform;
  double point = 1.0;  // only for PointMass

  double mean() const {
    switch (law) {
      case MarkLaw::Uniform: return 0.0;
      case MarkLaw::Normal: return 0.0;
      case MarkLaw::PointMass: return point;
    }
    return 0.0;
  }
  double second_moment() const {
    switch (law) {
      case MarkLaw::Uniform: return 1.0 / 3.0;
      case MarkLaw::Normal: return 1.0;
      case MarkLaw::PointMass: return point * point;
    }
    return 0.0;
  }

  double sample(Rng& rng) const {
    switch (law) {
      case MarkLaw::Uniform: return rng.uniform(-1.0, 1.0);
      case MarkLaw::Normal: return rng.normal();
      case MarkLaw::PointMass: return point;
    }
    return 0.0;
  }

  // nodes/weights such that E[f(U)] = sum w_i f(u_i)
  Quadrature expectation_rule(int n = 16) const;
};

// E[f(U)] under the mark law
template <class F>
double mark_mean(F&& f, const MarkDist& m, const Quadrature& rule) {
  double acc = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) acc += rule.weights[i] * f(rule.nodes[i]);
  return acc;
}

}  // namespace msf
