#include "msfilter/zakai_fd.hpp"

#include <algorithm>
#include <cmath>

namespace msf {

namespace {

double trapz(const std::vector<double>& v, double dx) {
  if (v.size() < 2) return 0.0;
  double s = 0.5 * (v.front() + v.back());
  for (std::size_t i = 1; i + 1 < v.size(); ++i) s += v[i];
  return s * dx;
}

// Thomas solve of the symmetric tridiagonal system (d, o) x = rhs, in place
void solve_tridiag(std::vector<double>& d, const std::vector<double>& o, std::vector<double>& x) {
  const std::size_t n = d.size();
  for (std::size_t i = 1; i < n; ++i) {
    const double w = o[i - 1] / d[i - 1];
    d[i] -= w * o[i - 1];
    x[i] -= w * x[i - 1];
  }
  x[n - 1] /= d[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (x[i] - o[i] * x[i + 1]) / d[i];
}

}  // namespace

double DensityGrid::mass() const { return trapz(q, dx()); }

double DensityGrid::boundary_mass_fraction() const {
  const double total = mass();
  if (total <= 0.0) return 1.0;
  const double edge = (q.front() + q[1] + q[q.size() - 2] + q.back()) * 0.5 * dx();
  return edge / total;
}

DensityGrid make_gaussian_density(double x_lo, double x_hi, std::int64_t cells, double mean,
                                  double sd) {
  if (cells < 4 || !(x_hi > x_lo)) throw ConfigError("density grid: need x_hi > x_lo, cells >= 4");
  if (!(sd > 0.0)) throw ConfigError("density grid: initial law needs sd > 0");
  DensityGrid g;
  g.x_lo = x_lo;
  g.x_hi = x_hi;
  g.cells = cells;
  g.q.resize(static_cast<std::size_t>(cells) + 1);
  const double c = 1.0 / (sd * std::sqrt(2.0 * M_PI));
  for (std::int64_t i = 0; i <= cells; ++i) {
    const double u = (g.node(i) - mean) / sd;
    g.q[static_cast<std::size_t>(i)] = c * std::exp(-0.5 * u * u);
  }
  return g;
}

void zakai_fd_step(DensityGrid& g, const ModelSpec& m, const LevyObservationModel& obs,
                   const ZakaiFdOptions& opt, double dv, double dt) {
  if (!opt.bbar) throw ConfigError("zakai_fd_step: missing averaged-drift evaluator");
  const std::size_t n = g.q.size();
  const double dx = g.dx();
  const double sv = m.sig_v(0.0), sb = m.sig_b(0.0);
  const double diff = sv * sv + sb * sb;
  const double a = 0.5 * diff * dt / (dx * dx);

  // (i) transport, flux form with central face values (reflecting boundaries)
  std::vector<double> flux(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double xm = 0.5 * (g.node(static_cast<std::int64_t>(i)) +
                             g.node(static_cast<std::int64_t>(i) + 1));
    flux[i] = opt.bbar(xm) * 0.5 * (g.q[i] + g.q[i + 1]);
  }
  std::vector<double> qn(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double fr = i + 1 < n ? flux[i] : 0.0;
    const double fl = i > 0 ? flux[i - 1] : 0.0;
    qn[i] = g.q[i] - dt / dx * (fr - fl);
  }

  // (i) diffusion
  if (opt.implicit_diffusion) {
    std::vector<double> d(n), o(n - 1, -a);
    for (std::size_t i = 0; i < n; ++i) d[i] = 1.0 + (i == 0 || i + 1 == n ? a : 2.0 * a);
    solve_tridiag(d, o, qn);
  } else {
    if (dt * diff / (dx * dx) > 0.5)
      throw ConfigError("zakai_fd_step: explicit diffusion violates the CFL bound");
    std::vector<double> qd(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double ql = i > 0 ? qn[i - 1] : qn[i];
      const double qr = i + 1 < n ? qn[i + 1] : qn[i];
      qd[i] = qn[i] + a * (ql - 2.0 * qn[i] + qr);
    }
    qn.swap(qd);
  }

  // (ii) observation half: q (1 + h dv) - d/dx(sigma_v q) dv
  std::vector<double> grad(n);
  grad[0] = (qn[1] - qn[0]) / dx;
  grad[n - 1] = (qn[n - 1] - qn[n - 2]) / dx;
  for (std::size_t i = 1; i + 1 < n; ++i) grad[i] = (qn[i + 1] - qn[i - 1]) / (2.0 * dx);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = g.node(static_cast<std::int64_t>(i));
    qn[i] = qn[i] * (1.0 + obs.h(x) * dv) - sv * grad[i] * dv;
  }

  // (iii) jump compensator factor
  if (obs.r3 > 0.0)
    for (std::size_t i = 0; i < n; ++i)
      qn[i] *= std::exp(dt * obs.compensator_rate(g.t, g.node(static_cast<std::int64_t>(i))));

  // positivity: clip, counting violations beyond 1e-12 relative
  double qmax = 0.0;
  for (std::size_t i = 0; i < n; ++i) qmax = std::max(qmax, qn[i]);
  for (std::size_t i = 0; i < n; ++i)
    if (qn[i] < 0.0) {
      if (qn[i] < -1e-12 * qmax) ++g.clip_events;
      qn[i] = 0.0;
    }
  g.node_steps += static_cast<std::int64_t>(n);

  g.q.swap(qn);
  g.t += dt;
  if (g.mass() < 1e-300) throw MassUnderflowError();
}

void zakai_fd_jump_update(DensityGrid& g, const MarkedEvent& ev, const LevyObservationModel& obs) {
  for (std::size_t i = 0; i < g.q.size(); ++i) {
    const double lam = obs.lambda(ev.time, g.node(static_cast<std::int64_t>(i)), ev.mark);
    if (!(lam > 0.0)) throw ConfigError("zakai_fd_jump_update: lambda must stay positive");
    g.q[i] *= lam;
  }
  if (g.mass() < 1e-300) throw MassUnderflowError();
}

double fd_filter_estimate(const DensityGrid& g, int fn_id) {
  const double total = g.mass();
  if (!(total > 0.0)) throw MassUnderflowError();
  std::vector<double> fq(g.q.size());
  for (std::size_t i = 0; i < g.q.size(); ++i)
    fq[i] = test_function(fn_id, g.node(static_cast<std::int64_t>(i))).v * g.q[i];
  return trapz(fq, g.dx()) / total;
}

DensityGrid zakai_fd_filter(const ObservationPath& y, const ModelSpec& m,
                            const LevyObservationModel& obs, const ZakaiFdOptions& opt,
                            DensityGrid init) {
  if (m.c1 != 0.0 && m.r1 > 0.0)
    throw ConfigError("zakai_fd_filter: oracle configs carry no slow-state jumps (set c1 = 0)");
  DensityGrid g = std::move(init);
  const double dt = y.grid.dt();
  for (std::int64_t k = 0; k < y.grid.steps; ++k) {
    const auto ku = static_cast<std::size_t>(k);
    zakai_fd_step(g, m, obs, opt, y.dy[ku], dt);
    for (std::uint32_t e = y.first_in_cell[ku]; e < y.first_in_cell[ku + 1]; ++e)
      if (y.events[e].informative) zakai_fd_jump_update(g, y.events[e], obs);
  }
  return g;
}

}  // namespace msf
