#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "msfilter/rng.hpp"
#include "msfilter/stats.hpp"

using namespace msf;

TEST_CASE("seed keys depend on the full path, not just its fold") {
  SeedSpec root(42);
  CHECK(root.child(1).key() != root.child(2).key());
  CHECK(root.child(1).child(2).key() != root.child(2).child(1).key());
  CHECK(root.child(0).key() != root.key());
  // a distinct master changes every stream in the tree
  CHECK(SeedSpec(43).child(1).key() != root.child(1).key());
}

TEST_CASE("streams are reproducible from their coordinates") {
  Rng a(SeedSpec(7).child(3).child(9));
  Rng b(SeedSpec(7).child(3).child(9));
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("skip is equivalent to drawing and discarding") {
  Rng a(SeedSpec(11).child(1));
  Rng b(SeedSpec(11).child(1));
  for (int i = 0; i < 57; ++i) (void)a.next_u64();
  b.skip(57);
  CHECK(a.counter() == b.counter());
  CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("uniform stays strictly inside (0,1)") {
  Rng r(SeedSpec(1).child(0));
  for (int i = 0; i < 100000; ++i) {
    const double u = r.uniform();
    CHECK(u > 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("uniform(lo,hi) covers the requested interval") {
  Rng r(SeedSpec(5));
  double lo = 1e9, hi = -1e9, acc = 0.0;
  const int n = 50000;
  for (int i = 0; i < n; ++i) {
    const double u = r.uniform(-2.0, 3.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
    acc += u;
  }
  CHECK(lo >= -2.0);
  CHECK(hi <= 3.0);
  CHECK(lo < -1.99);
  CHECK(hi > 2.99);
  // mean 0.5, sd 5/sqrt(12): 4 sigma band
  CHECK(std::abs(acc / n - 0.5) < 4.0 * 5.0 / std::sqrt(12.0 * n));
}

TEST_CASE("normal moments match the standard law") {
  Rng r(SeedSpec(2026).child(1));
  const int n = 200000;
  double s1 = 0.0, s2 = 0.0, s4 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double g = r.normal();
    s1 += g;
    s2 += g * g;
    s4 += g * g * g * g;
  }
  const double mean = s1 / n, var = s2 / n, kurt = s4 / n;
  CHECK(std::abs(mean) < 4.0 / std::sqrt(static_cast<double>(n)));
  // var(g^2) = 2 => SE of the variance estimate is sqrt(2/n)
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
  // E g^4 = 3, var(g^4) = 96
  CHECK(std::abs(kurt - 3.0) < 4.0 * std::sqrt(96.0 / n));
}

TEST_CASE("exponential has the requested rate") {
  Rng r(SeedSpec(99));
  const int n = 100000;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    const double e = r.exponential(2.0);
    CHECK(e > 0.0);
    acc += e;
  }
  CHECK(std::abs(acc / n - 0.5) < 4.0 * 0.5 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("poisson matches mean and variance") {
  Rng r(SeedSpec(123).child(4));
  const int n = 100000;
  const double mean = 3.0;
  std::vector<double> ks(n);
  for (int i = 0; i < n; ++i) ks[static_cast<std::size_t>(i)] = r.poisson(mean);
  const MeanSE m = mean_se(ks);
  CHECK(std::abs(m.mean - mean) < 4.0 * std::sqrt(mean / n));
  double v = 0.0;
  for (double k : ks) v += (k - m.mean) * (k - m.mean);
  v /= (n - 1);
  CHECK(v == doctest::Approx(mean).epsilon(0.05));
  CHECK(Rng(SeedSpec(1)).poisson(0.0) == 0);
  CHECK(Rng(SeedSpec(1)).poisson(-1.0) == 0);
}

TEST_CASE("norm_inv spot values and symmetry") {
  CHECK(std::abs(Rng::norm_inv(0.5)) < 1e-9);
  CHECK(Rng::norm_inv(0.975) == doctest::Approx(1.959963985).epsilon(1e-6));
  CHECK(Rng::norm_inv(0.8413447460685429) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(Rng::norm_inv(1e-10) == doctest::Approx(-6.361340902404056).epsilon(1e-5));
  for (double p : {0.01, 0.1, 0.25, 0.4, 0.499}) {
    CHECK(Rng::norm_inv(p) == doctest::Approx(-Rng::norm_inv(1.0 - p)).epsilon(1e-8));
  }
}

TEST_CASE("sibling streams look independent") {
  // correlation of 1e5 paired normals from adjacent children: |rho| < 4/sqrt(n)
  Rng a(SeedSpec(777).child(10));
  Rng b(SeedSpec(777).child(11));
  const int n = 100000;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = a.normal();
    const double y = b.normal();
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  const double rho = sxy / std::sqrt(sxx * syy);
  CHECK(std::abs(rho) < 4.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("mix64 scrambles nearby inputs") {
  // 0 is the finalizer's one fixed point; stream keys always add offsets first
  CHECK(mix64(1) != 0);
  CHECK(mix64(1) != mix64(2));
  // avalanche spot check: single-bit input flip changes ~half the output bits
  const int d = __builtin_popcountll(mix64(12345) ^ mix64(12345 ^ 1ull));
  CHECK(d > 16);
  CHECK(d < 48);
}
