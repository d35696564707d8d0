#pragma once
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "msfilter/rng.hpp"

namespace msf {

struct MeanSE {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

MeanSE mean_se(const std::vector<double>& xs);

// standard error of a correlated sequence via non-overlapping batch means
MeanSE batch_means_se(const std::vector<double>& xs, std::size_t n_batches = 20);

double sample_variance(const std::vector<double>& xs);

// two-sample Kolmogorov-Smirnov statistic sup|F1 - F2| (inputs get sorted copies)
double ks_statistic(std::vector<double> a, std::vector<double> b);

// critical value for the two-sample KS test at significance alpha, c(alpha)*sqrt((n+m)/(n m))
double ks_critical(double alpha, std::size_t n, std::size_t m);

// bootstrap SE of the two-sample KS statistic (resamples both samples, seeded)
double ks_bootstrap_se(const std::vector<double>& a, const std::vector<double>& b,
                       int n_boot, const SeedSpec& seed);

// Pearson chi-square independence test on a contingency table; returns the statistic
// and writes degrees of freedom
double chi2_independence(const std::vector<std::vector<double>>& table, int* dof);

// upper quantile of chi-square via Wilson-Hilferty
double chi2_quantile(double p, int dof);

struct SlopeFit {
  double slope = 0.0;
  double intercept = 0.0;
  double ci_lo = 0.0;  // 95% CI on the slope
  double ci_hi = 0.0;
  std::size_t n_used = 0;
};

// Weighted least squares of log(value) on log(eps). Weights come from the SEs by
// the delta method (sigma_log = se/value). Points with value <= 0 are skipped;
// fewer than 3 usable points is an error.
SlopeFit fit_loglog_slope(const std::vector<double>& eps, const std::vector<double>& values,
                          const std::vector<double>& ses);

// v strictly decreasing allowing 3*sqrt(se_i^2 + se_{i+1}^2) slack per consecutive pair
bool decreasing_within_3se(const std::vector<double>& v, const std::vector<double>& se);

}  // namespace msf
