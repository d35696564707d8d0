#include "msfilter/quadrature.hpp"

#include <algorithm>

#include "msfilter/grid.hpp"

namespace msf {

Quadrature gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n >= 1");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    // Chebyshev-angle initial guess, Newton on P_n
    double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    q.nodes[i] = -x;
    q.nodes[n - 1 - i] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.weights[i] = w;
    q.weights[n - 1 - i] = w;
  }
  return q;
}

Quadrature gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n >= 1");
  Quadrature q;
  q.nodes.resize(n);
  q.weights.resize(n);
  const double c = std::pow(M_PI, -0.25);
  const int half = (n + 1) / 2;
  double x = 0.0;
  for (int i = 0; i < half; ++i) {
    // standard initial guesses for the largest roots, then walk inwards
    if (i == 0)
      x = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    else if (i == 1)
      x -= 1.14 * std::pow(n, 0.426) / x;
    else if (i == 2)
      x = 1.86 * x - 0.86 * q.nodes[n - 1];
    else if (i == 3)
      x = 1.91 * x - 0.91 * q.nodes[n - 2];
    else
      x = 2.0 * x - q.nodes[n - i + 1];

    double dp = 0.0;
    for (int it = 0; it < 200; ++it) {
      // orthonormal Hermite recurrence
      double p0 = c, p1 = c * std::sqrt(2.0) * x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = x * std::sqrt(2.0 / k) * p1 - std::sqrt((k - 1.0) / k) * p0;
        p0 = p1;
        p1 = p2;
      }
      dp = std::sqrt(2.0 * n) * p0;
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-14) break;
    }
    q.nodes[n - 1 - i] = x;
    q.nodes[i] = -x;
    const double w = 2.0 / (dp * dp);
    q.weights[n - 1 - i] = w;
    q.weights[i] = w;
  }
  if (n % 2 == 1) q.nodes[n / 2] = 0.0;  // exact middle root
  return q;
}

MarkLaw parse_mark_law(const std::string& name, double* point_value) {
  if (name == "uniform") return MarkLaw::Uniform;
  if (name == "normal") return MarkLaw::Normal;
  if (name.rfind("point:", 0) == 0) {
    if (point_value) *point_value = std::stod(name.substr(6));
    return MarkLaw::PointMass;
  }
  throw ConfigError("unknown mark law: " + name);
}

Quadrature MarkDist::expectation_rule(int n) const {
  Quadrature r;
  switch (law) {
    case MarkLaw::Uniform: {
      r = gauss_legendre(n);
      for (auto& w : r.weights) w *= 0.5;  // density 1/2 on [-1,1]
      return r;
    }
    case MarkLaw::Normal: {
      r = gauss_hermite(n);
      const double s = std::sqrt(2.0);
      for (auto& x : r.nodes) x *= s;
      const double z = std::sqrt(M_PI);
      for (auto& w : r.weights) w /= z;
      return r;
    }
    case MarkLaw::PointMass: {
      r.nodes = {point};
      r.weights = {1.0};
      return r;
    }
  }
  return r;
}

}  // namespace msf
