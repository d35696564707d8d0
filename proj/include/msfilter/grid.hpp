#pragma once
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace msf {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Uniform time grid on [0, horizon] with `steps` cells.
struct TimeGrid {
  double horizon = 1.0;
  std::int64_t steps = 1000;

  TimeGrid() = default;
  TimeGrid(double T, std::int64_t n) : horizon(T), steps(n) {
    if (!(T > 0.0) || n <= 0) throw ConfigError("TimeGrid: need horizon > 0 and steps > 0");
  }

  double dt() const { return horizon / static_cast<double>(steps); }
  double t(std::int64_t k) const { return static_cast<double>(k) * dt(); }

  // cell index k such that tau lies in (t_k, t_{k+1}]
  std::int64_t cell_of(double tau) const {
    auto k = static_cast<std::int64_t>(std::ceil(tau / dt())) - 1;
    if (k < 0) k = 0;
    if (k >= steps) k = steps - 1;
    return k;
  }
};

}  // namespace msf
