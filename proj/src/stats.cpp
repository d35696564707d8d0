#include "msfilter/stats.hpp"

#include <algorithm>
#include <numeric>

namespace msf {

MeanSE mean_se(const std::vector<double>& xs) {
  MeanSE r;
  r.n = xs.size();
  if (r.n == 0) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(r.n);
  if (r.n < 2) return r;
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / (static_cast<double>(r.n) * (static_cast<double>(r.n) - 1.0)));
  return r;
}

double sample_variance(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return ss / (static_cast<double>(xs.size()) - 1.0);
}

MeanSE batch_means_se(const std::vector<double>& xs, std::size_t n_batches) {
  MeanSE r;
  r.n = xs.size();
  if (xs.empty()) return r;
  if (n_batches < 2) n_batches = 2;
  if (n_batches > xs.size()) n_batches = xs.size();
  const std::size_t len = xs.size() / n_batches;
  if (len == 0) return mean_se(xs);
  std::vector<double> batch(n_batches, 0.0);
  for (std::size_t b = 0; b < n_batches; ++b) {
    double acc = 0.0;
    for (std::size_t i = b * len; i < (b + 1) * len; ++i) acc += xs[i];
    batch[b] = acc / static_cast<double>(len);
  }
  MeanSE bm = mean_se(batch);
  r.mean = bm.mean;
  r.se = bm.se;
  return r;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_statistic: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical(double alpha, std::size_t n, std::size_t m) {
  const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
  return c * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

double ks_bootstrap_se(const std::vector<double>& a, const std::vector<double>& b,
                       int n_boot, const SeedSpec& seed) {
  Rng rng(seed);
  std::vector<double> stats;
  stats.reserve(n_boot);
  std::vector<double> ra(a.size()), rb(b.size());
  for (int t = 0; t < n_boot; ++t) {
    for (std::size_t i = 0; i < a.size(); ++i)
      ra[i] = a[static_cast<std::size_t>(rng.uniform() * static_cast<double>(a.size()))];
    for (std::size_t i = 0; i < b.size(); ++i)
      rb[i] = b[static_cast<std::size_t>(rng.uniform() * static_cast<double>(b.size()))];
    stats.push_back(ks_statistic(ra, rb));
  }
  return std::sqrt(sample_variance(stats));
}

double chi2_independence(const std::vector<std::vector<double>>& table, int* dof) {
  const std::size_t nr = table.size();
  const std::size_t nc = table.empty() ? 0 : table[0].size();
  std::vector<double> row(nr, 0.0), col(nc, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) {
      row[i] += table[i][j];
      col[j] += table[i][j];
      total += table[i][j];
    }
  double stat = 0.0;
  for (std::size_t i = 0; i < nr; ++i)
    for (std::size_t j = 0; j < nc; ++j) {
      const double expct = row[i] * col[j] / total;
      if (expct > 0.0) {
        const double d = table[i][j] - expct;
        stat += d * d / expct;
      }
    }
  if (dof) *dof = static_cast<int>((nr - 1) * (nc - 1));
  return stat;
}

double chi2_quantile(double p, int dof) {
  // Wilson-Hilferty: X ~ chi2_k  =>  (X/k)^(1/3) approx Normal(1-2/(9k), 2/(9k))
  const double k = static_cast<double>(dof);
  const double z = Rng::norm_inv(p);
  const double c = 1.0 - 2.0 / (9.0 * k) + z * std::sqrt(2.0 / (9.0 * k));
  return k * c * c * c;
}

SlopeFit fit_loglog_slope(const std::vector<double>& eps, const std::vector<double>& values,
                          const std::vector<double>& ses) {
  if (eps.size() != values.size() || eps.size() != ses.size())
    throw std::invalid_argument("fit_loglog_slope: size mismatch");
  std::vector<double> x, y, w;
  for (std::size_t i = 0; i < eps.size(); ++i) {
    if (!(values[i] > 0.0) || !(eps[i] > 0.0)) continue;
    x.push_back(std::log(eps[i]));
    y.push_back(std::log(values[i]));
    double sl = ses[i] > 0.0 ? ses[i] / values[i] : 1e-6;  // delta method
    w.push_back(1.0 / (sl * sl));
  }
  if (x.size() < 3) throw std::invalid_argument("fit_loglog_slope: need >= 3 positive points");
  double sw = 0, swx = 0, swy = 0, swxx = 0, swxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sw += w[i];
    swx += w[i] * x[i];
    swy += w[i] * y[i];
    swxx += w[i] * x[i] * x[i];
    swxy += w[i] * x[i] * y[i];
  }
  const double det = sw * swxx - swx * swx;
  SlopeFit f;
  f.n_used = x.size();
  f.slope = (sw * swxy - swx * swy) / det;
  f.intercept = (swxx * swy - swx * swxy) / det;
  // slope variance from the weight (measurement error) covariance
  const double var_slope = sw / det;
  const double half = 1.959963984540054 * std::sqrt(var_slope);
  f.ci_lo = f.slope - half;
  f.ci_hi = f.slope + half;
  return f;
}

bool decreasing_within_3se(const std::vector<double>& v, const std::vector<double>& se) {
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    const double slack = 3.0 * std::sqrt(se[i] * se[i] + se[i + 1] * se[i + 1]);
    if (!(v[i + 1] < v[i] + slack)) return false;
  }
  return true;
}

}  // namespace msf
