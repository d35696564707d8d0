#pragma once
// 1-D finite-difference solver for the homogenized unnormalized filtering
// density of the levy observation model (no slow-state jumps: c1 = 0). Used as
// an independent oracle for the particle filter.
//
// Lie splitting per grid cell:
//   (i)  Fokker-Planck half  dq = [-d/dx(bbar q) + 1/2 (sv^2+sb^2) d2/dx2 q] dt
//        flux-form central transport + diffusion (implicit Thomas solve by
//        default, explicit branch CFL-guarded), reflecting boundaries;
//   (ii) observation half    q <- q (1 + h dV) - d/dx(sv q) dV
//        central differences, one-sided at the boundary nodes;
//   (iii) compensator        q <- q exp(dt r3 E_u[1 - lambda(t, x, u)])
// plus a pointwise multiplication q <- q lambda(tau, x, u) at informative
// observed events.
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "msfilter/model.hpp"
#include "msfilter/observation.hpp"
#include "msfilter/sde.hpp"

namespace msf {

struct MassUnderflowError : std::runtime_error {
  MassUnderflowError() : std::runtime_error("density mass collapsed below the underflow guard") {}
};

struct DensityGrid {
  double x_lo = -6.0, x_hi = 6.0;
  std::int64_t cells = 400;  // nodes = cells + 1
  std::vector<double> q;     // unnormalized density at nodes
  double t = 0.0;
  std::int64_t clip_events = 0;  // negative nodes clipped (beyond 1e-12 relative)
  std::int64_t node_steps = 0;   // denominator for the clipping-rate invariant

  double dx() const { return (x_hi - x_lo) / static_cast<double>(cells); }
  double node(std::int64_t i) const { return x_lo + dx() * static_cast<double>(i); }
  double mass() const;                    // trapezoid of q
  double boundary_mass_fraction() const;  // first+last cell over total
};

DensityGrid make_gaussian_density(double x_lo, double x_hi, std::int64_t cells, double mean,
                                  double sd);

struct ZakaiFdOptions {
  bool implicit_diffusion = true;
  DriftFn bbar;
};

void zakai_fd_step(DensityGrid& g, const ModelSpec& m, const LevyObservationModel& obs,
                   const ZakaiFdOptions& opt, double dv, double dt);

void zakai_fd_jump_update(DensityGrid& g, const MarkedEvent& ev, const LevyObservationModel& obs);

// trapezoid pi(fn) = int fn q / int q
double fd_filter_estimate(const DensityGrid& g, int fn_id);

// run the solver along a full observation path (events applied at the end of
// their cell, matching the particle filter's convention)
DensityGrid zakai_fd_filter(const ObservationPath& y, const ModelSpec& m,
                            const LevyObservationModel& obs, const ZakaiFdOptions& opt,
                            DensityGrid init);

}  // namespace msf
