// Command-line surface. Exit codes: 0 = all checks of the invoked run pass,
// 1 = a check failed (or a runtime failure), 2 = configuration error.
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "msfilter/averaging.hpp"
#include "msfilter/csv.hpp"
#include "msfilter/experiment.hpp"
#include "msfilter/filter.hpp"
#include "msfilter/noise.hpp"
#include "msfilter/sde.hpp"

namespace {

using namespace msf;

std::string out_path(const std::string& dir, const std::string& file) {
  std::filesystem::create_directories(dir);
  return (std::filesystem::path(dir) / file).string();
}

// averaged drift for the one-shot verbs: cache file if given, else closed form
DriftFn light_bbar(const Config& c, const ModelSpec& m) {
  const std::string cache_path = c.get_string("avg.cache", "");
  if (!cache_path.empty()) {
    DriftCache cache = load_drift_cache(cache_path);
    return [cache](double x) { return cache.eval(x); };
  }
  if (!m.has_drift_oracle())
    throw ConfigError("model has no closed-form averaged drift; build one with "
                      "'average' and pass it via avg.cache");
  const ModelSpec mc = m;
  return [mc](double x) { return mc.bbar_oracle(x); };
}

int cmd_simulate(const Config& c) {
  const ModelSpec m = model_from_config(c);
  const double dt = c.get_double("sim.dt", 1e-3);
  const double horizon = c.get_double("sim.horizon", 1.0);
  const double eps = c.get_double("sim.eps", 0.1);
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed.master", 20260817));
  const std::string dir = c.get_string("out.dir", ".");
  DriftFn bbar = light_bbar(c, m);
  c.check_all_consumed();

  const TimeGrid grid(horizon, static_cast<std::int64_t>(std::llround(horizon / dt)));
  NoiseBundle nb = make_noise_bundle(grid, SeedSpec(seed).child(0), m.r1, m.m1, m.r2 / eps, m.m2);
  std::vector<double> x, z;
  simulate_slow_fast(m, eps, nb, x, z);
  const std::vector<double> xh = simulate_homogenized(m, bbar, nb);

  CsvTable t;
  t.header = {"t", "x_eps", "z_eps", "x_hom"};
  for (std::size_t k = 0; k < x.size(); ++k)
    t.rows.push_back({fmt_double(grid.t(static_cast<std::int64_t>(k))), fmt_double(x[k]),
                      fmt_double(z[k]), fmt_double(xh[k])});
  const std::string path = out_path(dir, "simulate_path.csv");
  t.save(path);
  std::cout << "model " << m.name << ", eps " << eps << ", " << grid.steps << " steps\n"
            << "X_eps(T) = " << fmt_double(x.back()) << ", X_hom(T) = " << fmt_double(xh.back())
            << ", sup|X_eps - X_hom|^2 = " << fmt_double(pathwise_sup_sq_diff(x, xh)) << "\n"
            << "path: " << path << "\n";
  return 0;
}

int cmd_average(const Config& c) {
  const ModelSpec m = model_from_config(c);
  AveragingConfig cfg;
  cfg.dt = c.get_double("avg.dt", cfg.dt);
  cfg.horizon = c.get_double("avg.horizon", cfg.horizon);
  const double lo = c.get_double("avg.x_lo", -3.0);
  const double hi = c.get_double("avg.x_hi", 3.0);
  const auto nodes = c.get_int("avg.nodes", 21);
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed.master", 20260817));
  const std::string dir = c.get_string("out.dir", ".");
  c.check_all_consumed();

  const DriftCache cache =
      build_drift_cache(m, linspace(lo, hi, nodes), cfg, SeedSpec(seed).child(900));
  const std::string path = out_path(dir, "drift_cache.csv");
  save_drift_cache(cache, path);
  for (std::size_t i = 0; i < cache.nodes().size(); ++i) {
    std::cout << "bbar(" << fmt_double(cache.nodes()[i]) << ") = " << fmt_double(cache.values()[i])
              << " +- " << fmt_double(cache.ses()[i]);
    if (m.has_drift_oracle())
      std::cout << "  (closed form " << fmt_double(m.bbar_oracle(cache.nodes()[i])) << ")";
    std::cout << "\n";
  }
  for (const auto& w : cache.warnings()) std::cout << "warning: " << w << "\n";
  std::cout << "cache: " << path << "\n";
  return 0;
}

int cmd_filter(const Config& c) {
  const ModelSpec m = model_from_config(c);
  const std::string obs_kind = c.get_string("filter.obs", m.levy_family ? "levy" : "sensor");
  const std::string mode = c.get_string("filter.mode", "homogenized");
  const double eps = c.get_double("filter.eps", 0.1);
  const double dt = c.get_double("sim.dt", 1e-3);
  const double horizon = c.get_double("sim.horizon", 1.0);
  const auto np = static_cast<int>(c.get_int("filter.np", 1000));
  const double resample_frac = c.get_double("filter.resample_frac", 0.5);
  const auto seed = static_cast<std::uint64_t>(c.get_int("seed.master", 20260817));
  const std::string dir = c.get_string("out.dir", ".");

  FilterOptions opt;
  opt.n_particles = np;
  opt.eps = eps;
  opt.resample_frac = resample_frac;
  if (mode == "homogenized") {
    opt.mode = FilterMode::Homogenized;
    opt.bbar = light_bbar(c, m);
  } else if (mode == "epsilon") {
    opt.mode = FilterMode::Epsilon;
  } else {
    throw ConfigError("filter.mode must be 'homogenized' or 'epsilon'");
  }

  const TimeGrid grid(horizon, static_cast<std::int64_t>(std::llround(horizon / dt)));
  const SeedSpec rs = SeedSpec(seed).child(0);
  NoiseBundle nb = make_noise_bundle(grid, rs, m.r1, m.m1, m.r2 / eps, m.m2);
  std::vector<double> x, z;
  simulate_slow_fast(m, eps, nb, x, z);

  FilterTrace tr;
  if (obs_kind == "sensor") {
    const SensorObservationModel obs = sensor_obs_from_config(c);
    c.check_all_consumed();
    const ObservationPath y = simulate_observation_sensor(x, nb, obs);
    tr = particle_filter_sensor(m, obs, y, opt, rs.child(200));
  } else if (obs_kind == "levy") {
    const LevyObservationModel obs = levy_obs_from_config(c);
    c.check_all_consumed();
    const ObservationPath y = simulate_observation_levy(x, nb, obs, rs);
    tr = particle_filter_levy(m, obs, y, opt, rs.child(200));
  } else {
    throw ConfigError("filter.obs must be 'sensor' or 'levy'");
  }

  const std::string path = out_path(dir, "filter_trace.csv");
  save_filter_trace(tr, path);
  std::cout << "truth X(T) = " << fmt_double(x.back()) << "\n";
  for (std::size_t j = 0; j < tr.test_fns.size(); ++j)
    std::cout << "pi_T(" << test_function_name(tr.test_fns[j])
              << ") = " << fmt_double(tr.pi(grid.steps, j)) << "\n";
  std::cout << "log rho_T(1) = " << fmt_double(tr.log_mass.back()) << ", resamples "
            << tr.n_resamples << "\n"
            << "trace: " << path << "\n";
  return 0;
}

int cmd_run(const Config& c, const std::string& kind, int threads) {
  ExperimentConfig ec = ExperimentConfig::from_config(c, kind);
  ec.threads = threads;
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentReport rep = run_experiment(ec);
  const std::chrono::duration<double> dur = std::chrono::steady_clock::now() - t0;
  for (const auto& msg : rep.messages) std::cout << msg << "\n";
  const std::string path = out_path(ec.out_dir, rep.kind + "_report.csv");
  rep.to_csv().save(path);
  std::cout << "report: " << path << "\n"
            << rep.kind << ": " << (rep.pass ? "PASS" : "FAIL") << "  (" << dur.count()
            << " s)\n";
  return rep.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slow-fast jump-diffusion simulation and nonlinear filtering toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // allow the global options below to appear after the verb
  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int threads = 1;
  app.add_option("--config", config_path, "configuration file (key = value lines)");
  auto* seed_opt = app.add_option("--seed", seed, "override seed.master");
  app.add_option("--out", out_dir, "override out.dir");
  app.add_option("--threads", threads, "worker threads, 0 = all cores");

  auto* sub_sim = app.add_subcommand(
      "simulate", "one coupled replication of the two-scale system and its homogenized limit");
  auto* sub_avg =
      app.add_subcommand("average", "estimate the averaged drift on a node grid (drift cache)");
  auto* sub_flt =
      app.add_subcommand("filter", "run one particle filter on a simulated observation path");
  auto* sub_run = app.add_subcommand("run", "run an experiment and write its CSV report");
  std::string kind;
  sub_run
      ->add_option("kind", kind,
                   "strong-convergence | aux-scaling | filter-l1 | filter-weak | "
                   "zakai-crosscheck | invariant-suite")
      ->required();
  auto* sub_self = app.add_subcommand("selftest", "run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    msf::Config c =
        config_path.empty() ? msf::Config() : msf::Config::from_file(config_path);
    if (seed_opt->count() > 0) c.set("seed.master", std::to_string(seed));
    if (!out_dir.empty()) c.set("out.dir", out_dir);

    if (sub_sim->parsed()) return cmd_simulate(c);
    if (sub_avg->parsed()) return cmd_average(c);
    if (sub_flt->parsed()) return cmd_filter(c);
    if (sub_run->parsed()) return cmd_run(c, kind, threads);
    if (sub_self->parsed()) return cmd_run(c, "invariant-suite", threads);
    return 2;
  } catch (const msf::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
