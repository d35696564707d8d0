#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <map>
#include <vector>

#include "doctest.h"
#include "msfilter/sde.hpp"
#include "msfilter/stats.hpp"

using namespace msf;

namespace {
NoiseBundle bundle_for(const ModelSpec& m, const TimeGrid& grid, double eps,
                       std::uint64_t rep) {
  return make_noise_bundle(grid, SeedSpec(500).child(rep), m.r1, m.m1, m.r2 / eps, m.m2);
}
}  // namespace

TEST_CASE("integrator guards: step-size vs scale separation, divergence") {
  const ModelSpec m = make_model("analytic-ou");
  const TimeGrid coarse(1.0, 50);  // dt = 0.02 > eps/10
  const NoiseBundle nb = bundle_for(m, coarse, 0.1, 0);
  std::vector<double> x, z;
  CHECK_THROWS_AS(simulate_slow_fast(m, 0.1, nb, x, z), ConfigError);
  CHECK_THROWS_AS(simulate_slow_fast(m, 0.0, nb, x, z), ConfigError);
  CHECK_THROWS_AS(simulate_slow_fast(m, -1.0, nb, x, z), ConfigError);

  // an explosive fast drift must be caught, with the failing step reported
  ModelSpec bad = make_model("analytic-ou", {{"kappa", 1e6}});
  const TimeGrid grid(1.0, 1000);
  const NoiseBundle nb2 = bundle_for(bad, grid, 0.1, 1);
  bool thrown = false;
  try {
    simulate_slow_fast(bad, 0.1, nb2, x, z);
  } catch (const DivergenceError& e) {
    thrown = true;
    CHECK(e.step >= 0);
    CHECK(e.step < grid.steps);
  }
  CHECK(thrown);
}

TEST_CASE("shapes, initial conditions, determinism") {
  const ModelSpec m = make_model("analytic-ou");
  const TimeGrid grid(1.0, 1000);
  const NoiseBundle nb = bundle_for(m, grid, 0.1, 2);
  std::vector<double> x, z, x2, z2;
  simulate_slow_fast(m, 0.1, nb, x, z);
  REQUIRE(x.size() == 1001);
  REQUIRE(z.size() == 1001);
  CHECK(x[0] == doctest::Approx(m.x0));  // x0_spread = 0 in the catalog
  CHECK(z[0] == doctest::Approx(m.z0));
  simulate_slow_fast(m, 0.1, nb, x2, z2);
  CHECK(x == x2);
  CHECK(z == z2);
  for (double v : x) CHECK(std::isfinite(v));

  // spread initial condition shifts x0 by x0_spread * xi0
  ModelSpec ms = make_model("analytic-ou", {{"x0_spread", 0.4}});
  simulate_slow_fast(ms, 0.1, nb, x2, z2);
  CHECK(x2[0] == doctest::Approx(m.x0 + 0.4 * nb.xi0));
}

TEST_CASE("decoupled slow equation matches its homogenized partner exactly") {
  // q = 0: the slow equation never reads z, so the eps-path and the
  // homogenized path (same V, J1, bbar = theta sin x) coincide pathwise.
  const ModelSpec m = make_model("analytic-ou", {{"q", 0.0}});
  const TimeGrid grid(1.0, 1000);
  for (std::uint64_t rep = 0; rep < 3; ++rep) {
    const NoiseBundle nb = bundle_for(m, grid, 0.1, 10 + rep);
    std::vector<double> x, z;
    simulate_slow_fast(m, 0.1, nb, x, z);
    const std::vector<double> xh =
        simulate_homogenized(m, [&](double xx) { return m.bbar_oracle(xx); }, nb);
    CHECK(pathwise_sup_sq_diff(x, xh) <= 1e-24);
  }
}

TEST_CASE("homogenized path with zero drift is the driving noise") {
  // bbar = 0, c1 = 0: x(t) = x0 + sigma1 * sum dV (analytic-ou has no B channel)
  const ModelSpec m = make_model("analytic-ou", {{"c1", 0.0}});
  const TimeGrid grid(1.0, 500);
  const NoiseBundle nb = bundle_for(m, grid, 1.0, 4);
  const std::vector<double> xh = simulate_homogenized(m, [](double) { return 0.0; }, nb);
  double acc = m.x0;
  CHECK(xh[0] == doctest::Approx(acc).epsilon(1e-15));
  for (std::size_t k = 0; k < 500; ++k) {
    acc += m.sigma1 * nb.dv[k];
    CHECK(xh[k + 1] == doctest::Approx(acc).epsilon(1e-12));
  }
}

TEST_CASE("auxiliary process: delta of one cell reproduces the fast path") {
  const ModelSpec m = make_model("analytic-ou");
  const TimeGrid grid(1.0, 1000);
  const NoiseBundle nb = bundle_for(m, grid, 0.05, 5);
  std::vector<double> x, z;
  simulate_slow_fast(m, 0.05, nb, x, z);
  // re-anchoring at every step makes the auxiliary path the fast path itself
  const std::vector<double> zh = simulate_auxiliary(m, 0.05, 1, x, z, nb);
  CHECK(pathwise_sup_sq_diff(z, zh) == 0.0);
  // a coarser partition deviates but stays close (Khasminskii gap is small)
  const std::vector<double> zh2 = simulate_auxiliary(m, 0.05, 100, x, z, nb);
  CHECK(pathwise_sup_sq_diff(z, zh2) > 0.0);
  CHECK(pathwise_sup_sq_diff(z, zh2) < 1.0);
}

TEST_CASE("frozen fast process relaxes to c*tanh(x) without noise") {
  // sigma2 = c2 = 0: dz = -kappa (z - c tanh x) dt, an explicit ODE
  const ModelSpec m = make_model("analytic-ou", {{"sigma2", 0.0}, {"c2", 0.0}});
  const TimeGrid grid(5.0, 5000);
  const NoiseBundle nb = make_noise_bundle(grid, SeedSpec(77), m.r1, m.m1, m.r2, m.m2);
  const double x_frozen = 0.8;
  const std::vector<double> zs = simulate_frozen_fast(m, x_frozen, 0.0, nb);
  const double target = m.c * std::tanh(x_frozen);
  CHECK(zs.back() == doctest::Approx(target).epsilon(5e-3));
  // exact Euler recursion for the ODE: z_{k+1} = z_k (1 - kappa dt) + kappa c tanh(x) dt
  double zk = 0.0;
  for (std::int64_t k = 0; k < 20; ++k) {
    zk += -m.kappa * (zk - target) * grid.dt();
    CHECK(zs[static_cast<std::size_t>(k) + 1] == doctest::Approx(zk).epsilon(1e-12));
  }
}

TEST_CASE("streaming frozen-fast stepper tracks the OU moments") {
  const ModelSpec m = make_model("analytic-ou");
  const double dt = 1e-3;
  FrozenFastStepper st(m, 0.5, 0.0, dt, SeedSpec(9).child(1));
  // long run: time-average mean ~ c tanh(0.5), variance ~ invariant_var
  const int burn = 20000, keep = 400000;
  for (int i = 0; i < burn; ++i) st.step();
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < keep; ++i) {
    const double zv = st.step();
    s1 += zv;
    s2 += zv * zv;
  }
  const double mean = s1 / keep;
  const double var = s2 / keep - mean * mean;
  CHECK(mean == doctest::Approx(m.invariant_mean(0.5)).epsilon(0.05));
  CHECK(var == doctest::Approx(m.invariant_var()).epsilon(0.05));
}

TEST_CASE("pathwise sup and delta snapping helpers") {
  CHECK(pathwise_sup_sq_diff({0.0, 1.0, 3.0}, {0.0, 2.0, 1.0}) == doctest::Approx(4.0));
  CHECK(pathwise_sup_sq_diff({}, {}) == 0.0);
  const TimeGrid grid(1.0, 1000);
  // eps^{2/3}/dt: 0.1 -> 215.44 -> 215; 0.01 -> 46.4 -> 46
  CHECK(snapped_delta_steps(0.1, 2.0 / 3.0, grid) == 215);
  CHECK(snapped_delta_steps(0.01, 2.0 / 3.0, grid) == 46);
  // never below one cell
  CHECK(snapped_delta_steps(1e-6, 2.0, grid) == 1);
}

TEST_CASE("two-scale statistics: fast marginal near its invariant law") {
  // at eps = 0.01 and T = 1 the fast process is well mixed; its terminal draw
  // across replications matches the invariant mean/variance around tanh(x)
  const ModelSpec m = make_model("analytic-ou");
  const TimeGrid grid(1.0, 1000);
  std::vector<double> zT, xT;
  for (std::uint64_t r = 0; r < 400; ++r) {
    const NoiseBundle nb = bundle_for(m, grid, 0.01, 100 + r);
    std::vector<double> x, z;
    simulate_slow_fast(m, 0.01, nb, x, z);
    xT.push_back(x.back());
    zT.push_back(z.back() - m.invariant_mean(x.back()));
  }
  const MeanSE mz = mean_se(zT);
  CHECK(std::abs(mz.mean) < 4.0 * mz.se);
  double v = 0.0;
  for (double d : zT) v += d * d;
  v /= static_cast<double>(zT.size());
  CHECK(v == doctest::Approx(m.invariant_var()).epsilon(0.2));
}
