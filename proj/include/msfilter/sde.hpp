#pragma once
// Integrators for the two-scale system, its frozen-fast and auxiliary variants,
// and the pathwise-coupled homogenized limit. Euler-Maruyama; jump events are
// applied at the end of their grid cell in order of occurrence (left-limit
// integrands), compensator drifts use the left state.
#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "msfilter/model.hpp"
#include "msfilter/noise.hpp"

namespace msf {

struct DivergenceError : std::runtime_error {
  std::int64_t step;
  explicit DivergenceError(std::int64_t k)
      : std::runtime_error("simulation diverged (non-finite state) at step " + std::to_string(k)),
        step(k) {}
};

// one replication of the coupled system; noise kept for downstream coupling
struct PathPair {
  TimeGrid grid;
  std::vector<double> xeps, zeps;  // two-scale system
  std::vector<double> xhom;        // homogenized partner (same V, J1), may be empty
  std::shared_ptr<const NoiseBundle> noise;
};

using DriftFn = std::function<double(double)>;

// dt must satisfy dt <= eps/10 (configuration error otherwise)
void simulate_slow_fast(const ModelSpec& m, double eps, const NoiseBundle& nb,
                        std::vector<double>& x_out, std::vector<double>& z_out);

// fast process with the slow state frozen at x, run at time scale 1
// (used by the averaging module; nb.j2 must be sampled at rate r2)
std::vector<double> simulate_frozen_fast(const ModelSpec& m, double x_frozen, double z_init,
                                         const NoiseBundle& nb);

// Khasminskii auxiliary process: slow state frozen per partition cell of width
// delta_steps*dt, re-anchored to zeps at every cell start, identical noise
std::vector<double> simulate_auxiliary(const ModelSpec& m, double eps, std::int64_t delta_steps,
                                       const std::vector<double>& xeps,
                                       const std::vector<double>& zeps, const NoiseBundle& nb);

// homogenized slow equation driven by the SAME V (and B, J1) as the eps system
std::vector<double> simulate_homogenized(const ModelSpec& m, const DriftFn& bbar,
                                         const NoiseBundle& nb);

// streaming frozen-fast stepper (no materialized noise arrays); used by the
// invariant-measure sampler where horizons are long
class FrozenFastStepper {
 public:
  FrozenFastStepper(const ModelSpec& m, double x_frozen, double z_init, double dt,
                    const SeedSpec& seed);
  double step();  // advances one dt, returns new z
  double z() const { return z_; }

 private:
  const ModelSpec& m_;
  double x_, z_, dt_, sdt_;
  double comp_;  // f2 compensator drift per dt
  Rng rng_w_, rng_j_;
  double next_jump_;
};

double pathwise_sup_sq_diff(const std::vector<double>& a, const std::vector<double>& b);

// convenience: grid-snapped partition width, delta = max(1, round(eps^p/dt)) cells
std::int64_t snapped_delta_steps(double eps, double power, const TimeGrid& grid);

}  // namespace msf
