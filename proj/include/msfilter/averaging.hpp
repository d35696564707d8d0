#pragma once
// Empirical averaged drift: long-run ergodic averages of b1(x, Z) under the
// frozen fast dynamics, plus a node-grid cache with linear interpolation.
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "msfilter/model.hpp"
#include "msfilter/rng.hpp"
#include "msfilter/stats.hpp"

namespace msf {

struct AveragingConfig {
  double dt = 0.01;
  double horizon = 2000.0;   // sampling horizon after burn-in (time units)
  double burnin = -1.0;      // < 0: auto, 10/M time units
  std::int64_t thin = -1;    // < 0: auto, round(1/(M dt)) steps per retained sample
  int n_batches = 20;        // batch-means SE
};

struct InvariantSample {
  double x = 0.0;
  std::vector<double> z;  // thinned post-burn-in samples
  double dt = 0.0;
  std::int64_t burn_steps = 0;
  std::int64_t thin_steps = 1;
};

InvariantSample estimate_invariant(const ModelSpec& m, double x, const AveragingConfig& cfg,
                                   const SeedSpec& seed);

// mean of b1(x, Z_i) over an invariant sample; SE by batch means
MeanSE averaged_drift(const ModelSpec& m, double x, const AveragingConfig& cfg,
                      const SeedSpec& seed);

class DriftCache {
 public:
  DriftCache() : extrap_(std::make_shared<std::atomic<std::uint64_t>>(0)) {}
  DriftCache(std::vector<double> nodes, std::vector<double> values, std::vector<double> ses);

  // linear interpolation inside the hull; nearest node outside (counted)
  double eval(double x) const;

  const std::vector<double>& nodes() const { return nodes_; }
  const std::vector<double>& values() const { return values_; }
  const std::vector<double>& ses() const { return ses_; }
  std::uint64_t extrapolations() const { return extrap_->load(); }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void add_warning(std::string w) { warnings_.push_back(std::move(w)); }

 private:
  std::vector<double> nodes_, values_, ses_;
  std::vector<std::string> warnings_;
  std::shared_ptr<std::atomic<std::uint64_t>> extrap_;
};

// builds node estimates with independent per-node streams; a jump in slope
// beyond slope_bound between neighbours is recorded as a warning, not an error
DriftCache build_drift_cache(const ModelSpec& m, const std::vector<double>& nodes,
                             const AveragingConfig& cfg, const SeedSpec& seed,
                             double slope_bound = 25.0);

std::vector<double> linspace(double lo, double hi, std::int64_t n);

}  // namespace msf
