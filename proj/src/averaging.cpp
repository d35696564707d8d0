#include "msfilter/averaging.hpp"

#include <algorithm>
#include <cmath>

#include "msfilter/sde.hpp"

namespace msf {

namespace {
// burn-in / thinning defaults are tied to the mixing rate through M
void resolve_defaults(const ModelSpec& m, const AveragingConfig& cfg, std::int64_t* burn,
                      std::int64_t* thin) {
  const double M = m.dissipativity().M;
  const double burnin_time = cfg.burnin >= 0.0 ? cfg.burnin : 10.0 / M;
  *burn = static_cast<std::int64_t>(std::ceil(burnin_time / cfg.dt));
  *thin = cfg.thin > 0 ? cfg.thin
                       : std::max<std::int64_t>(1, std::llround(1.0 / (M * cfg.dt)));
}
}  // namespace

InvariantSample estimate_invariant(const ModelSpec& m, double x, const AveragingConfig& cfg,
                                   const SeedSpec& seed) {
  std::int64_t burn = 0, thin = 1;
  resolve_defaults(m, cfg, &burn, &thin);
  const auto total_kept = static_cast<std::int64_t>(cfg.horizon / (cfg.dt * static_cast<double>(thin)));
  InvariantSample out;
  out.x = x;
  out.dt = cfg.dt;
  out.burn_steps = burn;
  out.thin_steps = thin;
  out.z.reserve(static_cast<std::size_t>(total_kept));

  // start at the invariant mean to shorten transients; burn-in still applied
  FrozenFastStepper stepper(m, x, m.invariant_mean(x), cfg.dt, seed);
  for (std::int64_t k = 0; k < burn; ++k) stepper.step();
  for (std::int64_t i = 0; i < total_kept; ++i) {
    for (std::int64_t j = 0; j < thin; ++j) stepper.step();
    out.z.push_back(stepper.z());
  }
  return out;
}

MeanSE averaged_drift(const ModelSpec& m, double x, const AveragingConfig& cfg,
                      const SeedSpec& seed) {
  const InvariantSample s = estimate_invariant(m, x, cfg, seed);
  std::vector<double> vals;
  vals.reserve(s.z.size());
  for (double z : s.z) vals.push_back(m.b1(x, z));
  return batch_means_se(vals, static_cast<std::size_t>(cfg.n_batches));
}

DriftCache::DriftCache(std::vector<double> nodes, std::vector<double> values,
                       std::vector<double> ses)
    : nodes_(std::move(nodes)),
      values_(std::move(values)),
      ses_(std::move(ses)),
      extrap_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (nodes_.size() != values_.size() || nodes_.size() != ses_.size() || nodes_.size() < 2)
    throw ConfigError("DriftCache: need >= 2 nodes with matching values/ses");
  if (!std::is_sorted(nodes_.begin(), nodes_.end()))
    throw ConfigError("DriftCache: nodes must be sorted");
}

double DriftCache::eval(double x) const {
  if (x <= nodes_.front()) {
    if (x < nodes_.front()) extrap_->fetch_add(1, std::memory_order_relaxed);
    return values_.front();
  }
  if (x >= nodes_.back()) {
    if (x > nodes_.back()) extrap_->fetch_add(1, std::memory_order_relaxed);
    return values_.back();
  }
  const auto it = std::upper_bound(nodes_.begin(), nodes_.end(), x);
  const auto i = static_cast<std::size_t>(it - nodes_.begin()) - 1;
  const double w = (x - nodes_[i]) / (nodes_[i + 1] - nodes_[i]);
  return values_[i] + w * (values_[i + 1] - values_[i]);
}

DriftCache build_drift_cache(const ModelSpec& m, const std::vector<double>& nodes,
                             const AveragingConfig& cfg, const SeedSpec& seed,
                             double slope_bound) {
  std::vector<double> vals(nodes.size()), ses(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const MeanSE est = averaged_drift(m, nodes[i], cfg, seed.child(i));
    vals[i] = est.mean;
    ses[i] = est.se;
  }
  DriftCache cache(nodes, vals, ses);
  for (std::size_t i = 0; i + 1 < nodes.size(); ++i) {
    const double slope = std::abs(vals[i + 1] - vals[i]) / (nodes[i + 1] - nodes[i]);
    if (slope > slope_bound)
      cache.add_warning("drift cache slope " + std::to_string(slope) + " between node " +
                        std::to_string(nodes[i]) + " and " + std::to_string(nodes[i + 1]) +
                        " exceeds bound " + std::to_string(slope_bound));
  }
  return cache;
}

std::vector<double> linspace(double lo, double hi, std::int64_t n) {
  std::vector<double> xs(static_cast<std::size_t>(n));
  for (std::int64_t i = 0; i < n; ++i)
    xs[static_cast<std::size_t>(i)] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return xs;
}

}  // namespace msf
