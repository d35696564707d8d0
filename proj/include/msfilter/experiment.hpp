#pragma once
// Experiment orchestration: config ingestion with per-kind defaults, the six
// experiment runners, and CSV report assembly. Reports are deterministic
// functions of (config, master seed); wall-clock and thread count never enter
// the CSV so reruns and parallel runs stay bit-identical.
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msfilter/averaging.hpp"
#include "msfilter/config.hpp"
#include "msfilter/csv.hpp"
#include "msfilter/observation.hpp"

namespace msf {

struct ExperimentConfig {
  std::string kind;
  std::string model_name = "analytic-ou";
  std::map<std::string, double> model_overrides;

  // sweep
  std::vector<double> eps_list;
  std::string delta_rule = "power";  // power | fixed
  double delta_power = 2.0 / 3.0;
  double delta_fixed = 0.3;

  // integration / replication
  double dt = 1e-3;
  double horizon = 1.0;
  std::int64_t reps = 200;
  int np = 1000;
  int test_fn = 0;
  double resample_frac = 0.5;

  // observation models (sensor + levy share h)
  std::string h_name = "scaled-tanh";
  double h_scale = 0.5;
  double h_clip = 5.0;
  double sigma3 = 0.6;
  double lambda0 = 0.5, lambda_slope = 0.3, lcheck = 0.2, r3 = 2.0, a3 = 1.0;

  // averaged drift source
  bool use_drift_oracle = true;
  AveragingConfig avg;
  std::string drift_cache_path;  // load instead of oracle/build when set

  // zakai-crosscheck extras
  int fd_cells = 400;
  double x_lo = -6.0, x_hi = 6.0;
  double x0_spread = 0.3;
  double residual_eps = 0.1;
  int residual_np = 4000;
  int residual_reps = 16;

  bool plateau_diag = false;  // filter-l1 Np-ladder diagnostic

  std::uint64_t master_seed = 20260817ull;
  std::string out_dir = ".";
  int threads = 1;  // not echoed into reports

  // applies per-kind defaults, then validates (eps decreasing, dt guard);
  // kind_override (from the CLI verb) wins over experiment.kind in the file
  static ExperimentConfig from_config(const Config& c, const std::string& kind_override = "");

  SensorObservationModel sensor_obs() const;
  LevyObservationModel levy_obs() const;

  // everything a rerun needs, in canonical key order
  std::vector<std::pair<std::string, std::string>> echo() const;
};

struct ReportRow {
  std::string record;  // config | metric | slope | check | invariant
  std::string key;
  double eps = std::numeric_limits<double>::quiet_NaN();
  double value = std::numeric_limits<double>::quiet_NaN();
  double se = std::numeric_limits<double>::quiet_NaN();
  std::int64_t n = 0;
  std::int64_t aborts = 0;
  std::string note;
};

struct ExperimentReport {
  std::string kind;
  bool pass = true;
  std::vector<ReportRow> rows;
  std::vector<std::string> messages;

  void metric(const std::string& key, double eps, double value, double se, std::int64_t n,
              std::int64_t aborts = 0, const std::string& note = "");
  void check(const std::string& key, bool ok, const std::string& detail);

  CsvTable to_csv() const;
};

// standalone builders for the light CLI verbs (simulate / average / filter),
// reading the same model.* / obs.* / levy.* keys the experiments use
ModelSpec model_from_config(const Config& c, const std::string& default_family = "analytic-ou");
SensorObservationModel sensor_obs_from_config(const Config& c);
LevyObservationModel levy_obs_from_config(const Config& c);

ExperimentReport run_experiment(const ExperimentConfig& ec);

ExperimentReport run_strong_convergence(const ExperimentConfig& ec);
ExperimentReport run_aux_scaling(const ExperimentConfig& ec);
ExperimentReport run_filter_l1(const ExperimentConfig& ec);
ExperimentReport run_filter_weak(const ExperimentConfig& ec);
ExperimentReport run_zakai_crosscheck(const ExperimentConfig& ec);
ExperimentReport run_invariant_suite(const ExperimentConfig& ec);

}  // namespace msf
