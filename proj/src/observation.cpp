#include "msfilter/observation.hpp"

#include <algorithm>
#include <cmath>

namespace msf {

void SensorObservationModel::validate() const {
  const double gram = s3 * s3 + s4 * s4;
  if (std::abs(gram - 1.0) > 1e-12)
    throw ConfigError("sensor observation: sigma3^2 + sigma4^2 must equal 1 (got " +
                      std::to_string(gram) + ")");
}

void LevyObservationModel::validate() const {
  if (!(r3 >= 0.0)) throw ConfigError("levy observation: r3 must be >= 0");
  if (!(a3 != 0.0)) throw ConfigError("levy observation: a3 must be invertible (nonzero)");
  if (r3 == 0.0) return;  // no jump channel, thinning registry unused
  if (lambda_slope != 0.0 && m3.law == MarkLaw::Normal)
    throw ConfigError("levy observation: state-dependent thinning needs bounded marks");
  // sampled lattice check of lcheck <= L(u) < lambda(t,x,u) < 1
  const Quadrature rule = m3.expectation_rule(9);
  std::vector<double> us = rule.nodes;
  if (m3.law == MarkLaw::Uniform) us.insert(us.end(), {-1.0, 1.0});
  for (double x : {-8.0, -3.0, -1.0, 0.0, 1.0, 3.0, 8.0})
    for (double u : us)
      for (double t : {0.0, 0.5, 1.0}) {
        const double l = lambda(t, x, u);
        if (!(l > lcheck) || !(l < 1.0))
          throw ConfigError("levy observation: lambda(t,x,u) outside (lcheck, 1) at x=" +
                            std::to_string(x) + " u=" + std::to_string(u));
      }
  if (g_rate > 0.0 && !(g_lambda > 0.0 && g_lambda < 1.0))
    throw ConfigError("levy observation: g_lambda must lie in (0,1)");
}

void ObservationPath::build_cell_index() {
  first_in_cell.assign(static_cast<std::size_t>(grid.steps) + 1, 0);
  std::size_t e = 0;
  for (std::int64_t k = 0; k < grid.steps; ++k) {
    first_in_cell[static_cast<std::size_t>(k)] = static_cast<std::uint32_t>(e);
    while (e < events.size() && grid.cell_of(events[e].time) == k) ++e;
  }
  first_in_cell[static_cast<std::size_t>(grid.steps)] = static_cast<std::uint32_t>(e);
}

ObservationPath simulate_observation_sensor(const std::vector<double>& x_path,
                                            const NoiseBundle& nb,
                                            const SensorObservationModel& obs) {
  obs.validate();
  ObservationPath y;
  y.grid = nb.grid;
  const double dt = y.grid.dt();
  const auto n = static_cast<std::size_t>(y.grid.steps);
  y.dy.resize(n);
  for (std::size_t k = 0; k < n; ++k)
    y.dy[k] = obs.h(x_path[k]) * dt + obs.s3 * nb.dv[k] + obs.s4 * nb.db[k];
  y.build_cell_index();
  return y;
}

ObservationPath simulate_observation_levy(const std::vector<double>& x_path,
                                          const NoiseBundle& nb,
                                          const LevyObservationModel& obs,
                                          const SeedSpec& rep_seed) {
  obs.validate();
  ObservationPath y;
  y.grid = nb.grid;
  const double dt = y.grid.dt();
  const auto n = static_cast<std::size_t>(y.grid.steps);
  y.dy.resize(n);
  for (std::size_t k = 0; k < n; ++k) y.dy[k] = obs.h(x_path[k]) * dt + nb.dv[k];

  // proposals at rate r3, thinned by lambda at the left grid state
  JumpStream prop = sample_jump_stream(y.grid, obs.r3, obs.m3, rep_seed.child(NoiseBundle::PROP));
  Rng thin(rep_seed.child(NoiseBundle::THIN));
  for (const auto& e : prop.events) {
    const auto k = static_cast<std::size_t>(y.grid.cell_of(e.time));
    const double lam = obs.lambda(e.time, x_path[k], e.mark);
    if (thin.uniform() < lam)
      y.events.push_back({e.time, e.mark, obs.f3(e.time, e.mark), true});
  }
  if (obs.g_rate > 0.0) {
    JumpStream gp =
        sample_jump_stream(y.grid, obs.g_rate, obs.mg, rep_seed.child(NoiseBundle::PROP + 100));
    Rng gthin(rep_seed.child(NoiseBundle::THIN + 100));
    for (const auto& e : gp.events)
      if (gthin.uniform() < obs.g_lambda)
        y.events.push_back({e.time, e.mark, obs.g_scale * e.mark, false});
    std::sort(y.events.begin(), y.events.end(),
              [](const MarkedEvent& a, const MarkedEvent& b) { return a.time < b.time; });
  }
  y.build_cell_index();
  return y;
}

std::vector<double> girsanov_weight_sensor(const std::vector<double>& x_path,
                                           const ObservationPath& y,
                                           const SensorObservationModel& obs) {
  const double dt = y.grid.dt();
  const auto n = static_cast<std::size_t>(y.grid.steps);
  std::vector<double> lg(n + 1, 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = obs.h(x_path[k]);
    acc += h * y.dy[k] - 0.5 * h * h * dt;
    lg[k + 1] = acc;
  }
  return lg;
}

std::vector<double> likelihood_levy(const std::vector<double>& x_path, const ObservationPath& y,
                                    const LevyObservationModel& obs) {
  const double dt = y.grid.dt();
  const auto n = static_cast<std::size_t>(y.grid.steps);
  std::vector<double> ll(n + 1, 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = x_path[k];
    const double h = obs.h(x);
    acc += h * y.dy[k] - 0.5 * h * h * dt + obs.compensator_rate(y.grid.t(k), x) * dt;
    for (std::uint32_t e = y.first_in_cell[k]; e < y.first_in_cell[k + 1]; ++e) {
      const auto& ev = y.events[e];
      if (ev.informative) acc += std::log(obs.lambda(ev.time, x, ev.mark));
    }
    ll[k + 1] = acc;
  }
  return ll;
}

std::vector<double> likelihood_levy_euler(const std::vector<double>& x_path,
                                          const ObservationPath& y,
                                          const LevyObservationModel& obs) {
  const double dt = y.grid.dt();
  const auto n = static_cast<std::size_t>(y.grid.steps);
  std::vector<double> lam(n + 1, 1.0);
  double L = 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = x_path[k];
    const double h = obs.h(x);
    // dL = L h dY + L * compensator_rate dt  (N~ compensation of the event term)
    double Lnew = L + L * h * y.dy[k] + L * obs.compensator_rate(y.grid.t(k), x) * dt;
    for (std::uint32_t e = y.first_in_cell[k]; e < y.first_in_cell[k + 1]; ++e) {
      const auto& ev = y.events[e];
      if (ev.informative) Lnew *= obs.lambda(ev.time, x, ev.mark);
    }
    L = Lnew;
    lam[k + 1] = L;
  }
  return lam;
}

ObservationPath coarsen_observation(const ObservationPath& y, int factor) {
  if (factor <= 0 || y.grid.steps % factor != 0)
    throw ConfigError("coarsen_observation: factor must divide the step count");
  ObservationPath out;
  out.grid = TimeGrid(y.grid.horizon, y.grid.steps / factor);
  out.dy.resize(static_cast<std::size_t>(out.grid.steps), 0.0);
  for (std::size_t k = 0; k < y.dy.size(); ++k)
    out.dy[k / static_cast<std::size_t>(factor)] += y.dy[k];
  out.events = y.events;
  out.build_cell_index();
  return out;
}

}  // namespace msf
