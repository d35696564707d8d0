#pragma once
// Sampling of the driving noises on a fixed grid: Brownian increments and
// finite-activity marked jump streams (exact event times kept; cell indices used
// by the integrators).
#include <cstdint>
#include <functional>
#include <vector>

#include "msfilter/grid.hpp"
#include "msfilter/quadrature.hpp"
#include "msfilter/rng.hpp"

namespace msf {

struct BrownianPath {
  TimeGrid grid;
  std::vector<double> dw;  // increments, one per cell

  double total() const {
    double s = 0.0;
    for (double x : dw) s += x;
    return s;
  }
};

struct JumpEvent {
  double time = 0.0;
  double mark = 0.0;
};

// marked Poisson stream with intensity rate * markLaw(du) on (0, horizon]
struct JumpStream {
  TimeGrid grid;
  double rate = 0.0;  // total arrival rate (already includes any 1/eps scaling)
  MarkDist marks;
  std::vector<JumpEvent> events;  // sorted by time

  // events grouped by grid cell: [first_in_cell[k], first_in_cell[k+1]) index events
  std::vector<std::uint32_t> first_in_cell;

  void build_cell_index() {
    first_in_cell.assign(static_cast<std::size_t>(grid.steps) + 1, 0);
    std::size_t e = 0;
    for (std::int64_t k = 0; k < grid.steps; ++k) {
      first_in_cell[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(e);
      while (e < events.size() && grid.cell_of(events[e].time) == k) ++e;
    }
    first_in_cell[static_cast<std::size_t>(grid.steps)] = static_cast<std::uint32_t>(e);
  }
};

BrownianPath sample_brownian(const TimeGrid& grid, const SeedSpec& seed);

JumpStream sample_jump_stream(const TimeGrid& grid, double rate, const MarkDist& marks,
                              const SeedSpec& seed);

// int g d(N - compensator) over (0, horizon]: sum of g at events minus
// int_0^T int g(s,u) rate*markLaw(du) ds (trapezoid in time x mark quadrature)
double compensated_integral(const JumpStream& stream,
                            const std::function<double(double, double)>& g);

// Everything one replication of the slow-fast system consumes. Shared between
// the eps-path and its homogenized partner so that the coupling is pathwise.
struct NoiseBundle {
  TimeGrid grid;
  std::vector<double> dv;  // slow Brownian V
  std::vector<double> dw;  // fast Brownian W
  std::vector<double> db;  // extra slow channel B (levy family) / sensor noise
  JumpStream j1;           // slow jumps
  JumpStream j2;           // fast jumps (rate already scaled by 1/eps)
  double xi0 = 0.0;        // draw for a spread initial condition
  double z_xi0 = 0.0;

  // fixed stream component ids under a replication seed
  enum Channel : std::uint64_t { V = 0, W = 1, B = 2, J1 = 3, J2 = 4, PROP = 5, THIN = 6, X0 = 7 };
};

// j2 is sampled at rate nu2.rate / eps; pass eps = 1 for scale-1 dynamics
NoiseBundle make_noise_bundle(const TimeGrid& grid, const SeedSpec& rep_seed, double r1,
                              const MarkDist& m1, double r2_over_eps, const MarkDist& m2);

// deterministic checksum of the shared channels (coupling sanity in experiments)
std::uint64_t noise_checksum(const NoiseBundle& nb);

}  // namespace msf
