#pragma once
// The two observation models.
//
// Sensor model:  dY = h(X) dt + sigma3 dV + sigma4 dB~   with sigma3^2+sigma4^2 = 1;
// the V channel is the one driving the slow state (correlated sensor noise).
//
// Levy model: the observation consists of a continuous part dY = h(X) dt + dV
// (V again the slow state's Brownian channel) and a marked point process whose
// proposals arrive at rate r3 with marks from markLaw3 and get accepted with
// state-dependent probability lambda(t, X_t, u) in (0,1); accepted events carry
// jumps f3(t,u) = a3*u (invertible, so marks are recoverable from jumps).
#include <cstdint>
#include <vector>

#include "msfilter/funcs.hpp"
#include "msfilter/grid.hpp"
#include "msfilter/model.hpp"
#include "msfilter/noise.hpp"

namespace msf {

struct SensorObservationModel {
  HFun h;
  double s3 = 0.6;  // sigma3
  double s4 = 0.8;  // sigma4

  // PSD square root of (1 - s3^2), eigenvalue clamped at 0 below tolerance
  double cond_root() const {
    const double v = 1.0 - s3 * s3;
    return std::sqrt(v > 1e-10 ? v : (v > 0.0 ? v : 0.0));
  }
  void validate() const;
};

struct LevyObservationModel {
  HFun h;  // h-check
  // thinning registry: lambda(t,x,u) = lambda0 + lambda_slope * tanh(x) * u
  double lambda0 = 0.5;
  double lambda_slope = 0.3;
  double lcheck = 0.2;  // declared lower envelope (l-check = L-check(u))
  double r3 = 2.0;
  MarkDist m3;
  double a3 = 1.0;  // f3(t,u) = a3*u

  // optional uninformative stream (state-independent thinning, uncompensated jumps)
  double g_rate = 0.0;
  MarkDist mg;
  double g_lambda = 0.5;
  double g_scale = 1.0;  // g3(t,u) = g_scale*u

  double lambda(double t, double x, double u) const {
    (void)t;
    return lambda0 + lambda_slope * std::tanh(x) * u;
  }
  double f3(double t, double u) const {
    (void)t;
    return a3 * u;
  }
  double mark_from_jump(double jump) const { return jump / a3; }

  // r3 * E_u[1 - lambda(t,x,u)]  (exact for the affine-in-u registry)
  double compensator_rate(double t, double x) const {
    (void)t;
    return r3 * (1.0 - lambda0 - lambda_slope * std::tanh(x) * m3.mean());
  }

  void validate() const;  // lcheck <= L(u) < lambda < 1 on a sampled lattice
};

struct MarkedEvent {
  double time = 0.0;
  double mark = 0.0;
  double jump = 0.0;
  bool informative = true;  // accepted on U3 (enters the likelihood)
};

struct ObservationPath {
  TimeGrid grid;
  // sensor model: dY increments; levy model: continuous-part increments
  // dY = h(X_k) dt + dV_k (the jump part is in `events`)
  std::vector<double> dy;
  std::vector<MarkedEvent> events;
  std::vector<std::uint32_t> first_in_cell;

  void build_cell_index();
};

ObservationPath simulate_observation_sensor(const std::vector<double>& x_path,
                                            const NoiseBundle& nb,
                                            const SensorObservationModel& obs);

// thinning uses lambda evaluated at the left grid state of the event's cell,
// the same convention the likelihood uses (keeps the discrete change of
// measure an exact martingale)
ObservationPath simulate_observation_levy(const std::vector<double>& x_path,
                                          const NoiseBundle& nb,
                                          const LevyObservationModel& obs,
                                          const SeedSpec& rep_seed);

// running log gamma_t (sensor change of measure) along a state/observation pair:
// log gamma_t = sum h(X_k).dY_k - 1/2 sum |h(X_k)|^2 dt
std::vector<double> girsanov_weight_sensor(const std::vector<double>& x_path,
                                           const ObservationPath& y,
                                           const SensorObservationModel& obs);

// running log lambda^eps_t (levy change of measure):
// sum h.dY_k - 1/2 sum h^2 dt + sum_events log lambda(tau, X_left, u)
//   + sum_k dt * r3 E_u[1 - lambda(t_k, X_k, u)]
std::vector<double> likelihood_levy(const std::vector<double>& x_path, const ObservationPath& y,
                                    const LevyObservationModel& obs);

// Euler integration of the SDE form of the same likelihood (cross-validation):
// dL = L h dV-check + int L (lambda-1) dN~
std::vector<double> likelihood_levy_euler(const std::vector<double>& x_path,
                                          const ObservationPath& y,
                                          const LevyObservationModel& obs);

// Same observation record on a grid coarsened by `factor` (increments summed,
// events kept verbatim). Lets two step sizes consume one simulated path.
ObservationPath coarsen_observation(const ObservationPath& y, int factor);

}  // namespace msf
