// Python bindings: thin wrappers over the core operations (simulate, averaged
// drift, one filter run, experiment driver). Heavy lifting stays in the C++
// library; everything here converts arguments and packages results as dicts.
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <map>
#include <string>
#include <vector>

#include "msfilter/averaging.hpp"
#include "msfilter/config.hpp"
#include "msfilter/experiment.hpp"
#include "msfilter/filter.hpp"
#include "msfilter/model.hpp"
#include "msfilter/noise.hpp"
#include "msfilter/observation.hpp"
#include "msfilter/sde.hpp"

namespace py = pybind11;
using namespace msf;

namespace {

ModelSpec model_of(const std::string& name, const std::map<std::string, double>& overrides) {
  return make_model(name, overrides);
}

TimeGrid grid_of(double horizon, double dt) {
  const auto steps = static_cast<std::int64_t>(std::llround(horizon / dt));
  if (steps < 1 || std::abs(steps * dt - horizon) > 1e-9 * std::max(1.0, horizon))
    throw ConfigError("dt must divide horizon");
  return TimeGrid(horizon, steps);
}

DriftFn oracle_bbar(const ModelSpec& m) {
  if (!m.has_drift_oracle())
    throw ConfigError("model '" + m.name + "' has no closed-form averaged drift");
  const ModelSpec mc = m;
  return [mc](double x) { return mc.bbar_oracle(x); };
}

py::dict simulate_py(const std::string& model, const std::map<std::string, double>& overrides,
                     double eps, double dt, double horizon, std::uint64_t seed) {
  const ModelSpec m = model_of(model, overrides);
  const TimeGrid grid = grid_of(horizon, dt);
  NoiseBundle nb = make_noise_bundle(grid, SeedSpec(seed).child(0), m.r1, m.m1, m.r2 / eps, m.m2);
  std::vector<double> x, z;
  simulate_slow_fast(m, eps, nb, x, z);
  const std::vector<double> xh = simulate_homogenized(m, oracle_bbar(m), nb);
  std::vector<double> t(x.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = grid.t(static_cast<std::int64_t>(k));
  py::dict out;
  out["t"] = t;
  out["x_eps"] = x;
  out["z_eps"] = z;
  out["x_hom"] = xh;
  out["sup_sq_diff"] = pathwise_sup_sq_diff(x, xh);
  return out;
}

double averaged_drift_py(double x, const std::string& model,
                         const std::map<std::string, double>& overrides) {
  return oracle_bbar(model_of(model, overrides))(x);
}

py::dict estimate_averaged_drift_py(const std::vector<double>& nodes, const std::string& model,
                                    const std::map<std::string, double>& overrides, double dt,
                                    double horizon, std::uint64_t seed) {
  if (nodes.empty()) throw ConfigError("estimate_averaged_drift: need at least one node");
  const ModelSpec m = model_of(model, overrides);
  AveragingConfig cfg;
  cfg.dt = dt;
  cfg.horizon = horizon;
  // Same per-node streams as build_drift_cache, but without the interpolation
  // cache so a single node works too.
  const SeedSpec root(seed);
  std::vector<double> vals(nodes.size()), ses(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const MeanSE est = averaged_drift(m, nodes[i], cfg, root.child(i));
    vals[i] = est.mean;
    ses[i] = est.se;
  }
  std::vector<std::string> warnings;
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double slope = std::abs(vals[i + 1] - vals[i]) / (nodes[i + 1] - nodes[i]);
    if (slope > 25.0)
      warnings.push_back("drift slope " + std::to_string(slope) + " between node " +
                         std::to_string(nodes[i]) + " and " + std::to_string(nodes[i + 1]) +
                         " looks too steep");
  }
  py::dict out;
  out["x"] = nodes;
  out["bbar"] = vals;
  out["se"] = ses;
  out["warnings"] = warnings;
  return out;
}

py::dict run_filter_py(const std::string& model, const std::map<std::string, double>& overrides,
                       const std::string& obs_kind, const std::string& mode, double eps, double dt,
                       double horizon, int np, double resample_frac, std::uint64_t seed) {
  const ModelSpec m = model_of(model, overrides);
  const TimeGrid grid = grid_of(horizon, dt);
  const SeedSpec rs = SeedSpec(seed).child(0);
  NoiseBundle nb = make_noise_bundle(grid, rs, m.r1, m.m1, m.r2 / eps, m.m2);
  std::vector<double> x, z;
  simulate_slow_fast(m, eps, nb, x, z);

  FilterOptions opt;
  opt.n_particles = np;
  opt.eps = eps;
  opt.resample_frac = resample_frac;
  if (mode == "homogenized") {
    opt.mode = FilterMode::Homogenized;
    opt.bbar = oracle_bbar(m);
  } else if (mode == "epsilon") {
    opt.mode = FilterMode::Epsilon;
  } else {
    throw ConfigError("mode must be 'homogenized' or 'epsilon'");
  }

  FilterTrace tr;
  if (obs_kind == "sensor") {
    SensorObservationModel obs;
    const ObservationPath y = simulate_observation_sensor(x, nb, obs);
    tr = particle_filter_sensor(m, obs, y, opt, rs.child(200));
  } else if (obs_kind == "levy") {
    LevyObservationModel obs;
    const ObservationPath y = simulate_observation_levy(x, nb, obs, rs);
    tr = particle_filter_levy(m, obs, y, opt, rs.child(200));
  } else {
    throw ConfigError("obs must be 'sensor' or 'levy'");
  }

  std::vector<double> t(x.size());
  for (std::size_t k = 0; k < t.size(); ++k) t[k] = grid.t(static_cast<std::int64_t>(k));
  py::dict pi;
  for (std::size_t j = 0; j < tr.test_fns.size(); ++j) {
    std::vector<double> col(t.size());
    for (std::size_t k = 0; k < t.size(); ++k)
      col[k] = tr.pi(static_cast<std::int64_t>(k), j);
    pi[py::str(test_function_name(tr.test_fns[j]))] = col;
  }
  py::dict out;
  out["t"] = t;
  out["x_truth"] = x;
  out["pi"] = pi;
  out["log_mass"] = tr.log_mass;
  out["ess"] = tr.ess;
  out["n_resamples"] = tr.n_resamples;
  return out;
}

py::tuple run_experiment_py(const std::string& kind, const std::string& config_text, int threads) {
  Config c = Config::from_string(config_text);
  ExperimentConfig ec = ExperimentConfig::from_config(c, kind);
  ec.threads = threads;
  const ExperimentReport rep = run_experiment(ec);
  return py::make_tuple(rep.pass, rep.to_csv().to_string());
}

bool selftest_py() {
  ExperimentConfig ec;
  ec.kind = "invariant-suite";
  return run_experiment(ec).pass;
}

}  // namespace

PYBIND11_MODULE(msfilter, mod) {
  mod.doc() = "slow-fast jump-diffusion simulation and nonlinear filtering toolkit";
  py::register_exception<ConfigError>(mod, "ConfigError");

  mod.def("simulate", &simulate_py, py::arg("model") = "analytic-ou",
          py::arg("overrides") = std::map<std::string, double>{}, py::arg("eps") = 0.1,
          py::arg("dt") = 1e-3, py::arg("horizon") = 1.0, py::arg("seed") = 20260817ull,
          "Simulate one coupled replication of the two-scale system and its homogenized limit.");
  mod.def("averaged_drift", &averaged_drift_py, py::arg("x"), py::arg("model") = "analytic-ou",
          py::arg("overrides") = std::map<std::string, double>{},
          "Closed-form averaged drift, when the model has one.");
  mod.def("estimate_averaged_drift", &estimate_averaged_drift_py, py::arg("nodes"),
          py::arg("model") = "analytic-ou",
          py::arg("overrides") = std::map<std::string, double>{}, py::arg("dt") = 0.01,
          py::arg("horizon") = 500.0, py::arg("seed") = 20260817ull,
          "Monte Carlo averaged-drift estimate at the given nodes (values + standard errors).");
  mod.def("run_filter", &run_filter_py, py::arg("model") = "analytic-ou",
          py::arg("overrides") = std::map<std::string, double>{}, py::arg("obs") = "sensor",
          py::arg("mode") = "homogenized", py::arg("eps") = 0.1, py::arg("dt") = 1e-3,
          py::arg("horizon") = 1.0, py::arg("np") = 1000, py::arg("resample_frac") = 0.5,
          py::arg("seed") = 20260817ull,
          "Run one particle filter on a simulated observation path.");
  mod.def("run_experiment", &run_experiment_py, py::arg("kind"), py::arg("config_text") = "",
          py::arg("threads") = 1,
          "Run an experiment by kind; returns (pass, report_csv). config_text uses the same "
          "'section.key = value' schema as the CLI config file.");
  mod.def("selftest", &selftest_py, "Run the invariant suite; returns True when all checks pass.");
}
