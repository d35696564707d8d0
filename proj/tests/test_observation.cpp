#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "doctest.h"
#include "msfilter/observation.hpp"
#include "msfilter/sde.hpp"
#include "msfilter/stats.hpp"

using namespace msf;

namespace {
struct World {
  ModelSpec m;
  TimeGrid grid{1.0, 500};
  NoiseBundle nb;
  std::vector<double> x, z;

  explicit World(const std::string& family, double eps = 0.1, std::uint64_t rep = 0)
      : m(make_model(family)),
        nb(make_noise_bundle(grid, SeedSpec(900).child(rep), m.r1, m.m1, m.r2 / eps, m.m2)) {
    simulate_slow_fast(m, eps, nb, x, z);
  }
};
}  // namespace

TEST_CASE("sensor observation: increments decompose exactly") {
  World w("analytic-ou");
  SensorObservationModel obs;  // defaults: scaled-tanh, s3 = 0.6, s4 = 0.8
  obs.validate();
  const ObservationPath y = simulate_observation_sensor(w.x, w.nb, obs);
  REQUIRE(y.dy.size() == 500);
  CHECK(y.events.empty());
  for (std::size_t k = 0; k < 500; ++k) {
    const double expect =
        obs.h(w.x[k]) * w.grid.dt() + obs.s3 * w.nb.dv[k] + obs.s4 * w.nb.db[k];
    CHECK(y.dy[k] == doctest::Approx(expect).epsilon(1e-12));
  }
  // unit-variance constraint on the noise mixture is enforced
  SensorObservationModel bad = obs;
  bad.s4 = 0.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("sensor change of measure on a tiny hand-checked grid") {
  SensorObservationModel obs;
  obs.h = HFun::parse("constant", 0.4, 5.0);
  ObservationPath y;
  y.grid = TimeGrid(0.03, 3);
  y.dy = {0.01, -0.02, 0.005};
  y.build_cell_index();
  const std::vector<double> x{1.0, 1.0, 1.0, 1.0};
  const std::vector<double> lg = girsanov_weight_sensor(x, y, obs);
  REQUIRE(lg.size() == 4);
  CHECK(lg[0] == 0.0);
  double acc = 0.0;
  for (std::size_t k = 0; k < 3; ++k) {
    acc += 0.4 * y.dy[k] - 0.5 * 0.16 * 0.01;
    CHECK(lg[k + 1] == doctest::Approx(acc).epsilon(1e-14));
  }
}

TEST_CASE("sensor inverse change of measure is an exact discrete martingale") {
  // E[exp(-log gamma_T)] = 1 at any dt because h is evaluated at the left state
  const int reps = 3000;
  std::vector<double> vals;
  SensorObservationModel obs;
  for (int r = 0; r < reps; ++r) {
    World w("analytic-ou", 0.1, 1000 + static_cast<std::uint64_t>(r));
    const ObservationPath y = simulate_observation_sensor(w.x, w.nb, obs);
    const std::vector<double> lg = girsanov_weight_sensor(w.x, y, obs);
    vals.push_back(std::exp(-lg.back()));
  }
  const MeanSE m = mean_se(vals);
  CHECK(std::abs(m.mean - 1.0) <= std::max(4.0 * m.se, 0.02));
}

TEST_CASE("levy observation: continuous part and event bookkeeping") {
  World w("levy-correlated");
  LevyObservationModel obs;  // defaults: r3 = 2, lambda = 0.5 + 0.3 tanh(x) u
  obs.validate();
  const ObservationPath y = simulate_observation_levy(w.x, w.nb, obs, SeedSpec(900).child(0));
  // continuous part: dY = h(X_k) dt + dV_k exactly
  for (std::size_t k = 0; k < 500; ++k) {
    CHECK(y.dy[k] == doctest::Approx(obs.h(w.x[k]) * w.grid.dt() + w.nb.dv[k]).epsilon(1e-12));
  }
  // all events informative when the uninformative stream is off; marks invert
  for (const MarkedEvent& e : y.events) {
    CHECK(e.informative);
    CHECK(e.time > 0.0);
    CHECK(e.time <= 1.0);
    CHECK(e.mark == doctest::Approx(obs.mark_from_jump(e.jump)).epsilon(1e-12));
    CHECK(e.jump == doctest::Approx(obs.a3 * e.mark).epsilon(1e-12));
  }
  CHECK(y.first_in_cell.size() == 501);
  CHECK(y.first_in_cell.back() == y.events.size());
  // determinism
  const ObservationPath y2 = simulate_observation_levy(w.x, w.nb, obs, SeedSpec(900).child(0));
  CHECK(y2.dy == y.dy);
  REQUIRE(y2.events.size() == y.events.size());
  for (std::size_t e = 0; e < y.events.size(); ++e)
    CHECK(y2.events[e].time == y.events[e].time);
}

TEST_CASE("levy acceptance rate follows the thinning registry") {
  // with lambda ~ 0.5 about half of the r3*T proposals are accepted
  LevyObservationModel obs;
  std::vector<double> counts;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    World w("levy-correlated", 0.1, 3000 + r);
    const ObservationPath y =
        simulate_observation_levy(w.x, w.nb, obs, SeedSpec(900).child(3000 + r));
    counts.push_back(static_cast<double>(y.events.size()));
  }
  const MeanSE m = mean_se(counts);
  // accepted rate = r3 * E[lambda] ~ 2 * 0.5 (the tanh(x)-u coupling is centred)
  CHECK(std::abs(m.mean - 1.0) < std::max(4.0 * m.se, 0.05));
}

TEST_CASE("uninformative stream is kept but marked") {
  // a single path can miss one of the streams (about one accepted event per
  // run), so scan a few replications
  LevyObservationModel obs;
  obs.g_rate = 3.0;
  bool has_uninformative = false, has_informative = false;
  for (std::uint64_t rep = 0; rep < 10 && !(has_uninformative && has_informative); ++rep) {
    World w("levy-correlated", 0.1, 40 + rep);
    const ObservationPath y =
        simulate_observation_levy(w.x, w.nb, obs, SeedSpec(901).child(rep));
    for (const MarkedEvent& e : y.events) {
      (e.informative ? has_informative : has_uninformative) = true;
      if (!e.informative) CHECK(e.jump == doctest::Approx(obs.g_scale * e.mark));
    }
    // events stay time-sorted after merging the two streams
    for (std::size_t e = 0; e + 1 < y.events.size(); ++e)
      CHECK(y.events[e].time <= y.events[e + 1].time);
  }
  CHECK(has_uninformative);
  CHECK(has_informative);
}

TEST_CASE("thinning registry validation") {
  LevyObservationModel obs;
  obs.lambda_slope = 0.6;  // lambda can leave (lcheck, 1) on the lattice
  CHECK_THROWS_AS(obs.validate(), ConfigError);
  LevyObservationModel obs2;
  obs2.m3.law = MarkLaw::Normal;  // unbounded marks break the envelope
  CHECK_THROWS_AS(obs2.validate(), ConfigError);
  LevyObservationModel obs3;
  obs3.r3 = -1.0;
  CHECK_THROWS_AS(obs3.validate(), ConfigError);
  LevyObservationModel obs4;
  obs4.a3 = 0.0;  // marks must be recoverable from jumps
  CHECK_THROWS_AS(obs4.validate(), ConfigError);
  LevyObservationModel off;  // r3 = 0 disables the event channel entirely
  off.r3 = 0.0;
  off.lambda_slope = 5.0;
  CHECK_NOTHROW(off.validate());
}

TEST_CASE("levy likelihood on a hand-built observation record") {
  LevyObservationModel obs;
  obs.h = HFun::parse("constant", 0.3, 5.0);
  obs.lambda0 = 0.5;
  obs.lambda_slope = 0.3;
  ObservationPath y;
  y.grid = TimeGrid(0.02, 2);
  y.dy = {0.02, -0.01};
  MarkedEvent ev;
  ev.time = 0.015;  // second cell
  ev.mark = 0.4;
  ev.jump = 0.4;
  y.events = {ev};
  y.build_cell_index();
  const std::vector<double> x{0.5, 0.6, 0.7};
  const std::vector<double> ll = likelihood_levy(x, y, obs);
  REQUIRE(ll.size() == 3);
  const double dt = 0.01;
  double acc = 0.3 * y.dy[0] - 0.5 * 0.09 * dt + obs.compensator_rate(0.0, x[0]) * dt;
  CHECK(ll[1] == doctest::Approx(acc).epsilon(1e-13));
  acc += 0.3 * y.dy[1] - 0.5 * 0.09 * dt + obs.compensator_rate(dt, x[1]) * dt +
         std::log(obs.lambda(0.015, x[1], 0.4));
  CHECK(ll[2] == doctest::Approx(acc).epsilon(1e-13));
}

TEST_CASE("levy likelihood: closed form vs Euler SDE integration") {
  World w("levy-correlated");
  LevyObservationModel obs;
  const ObservationPath y = simulate_observation_levy(w.x, w.nb, obs, SeedSpec(902).child(2));
  const std::vector<double> ll = likelihood_levy(w.x, y, obs);
  const std::vector<double> le = likelihood_levy_euler(w.x, y, obs);
  REQUIRE(ll.size() == le.size());
  // the Euler product differs from exp(closed form) only at O(dt) per step
  for (std::size_t k = 0; k < ll.size(); k += 50) {
    CHECK(le[k] == doctest::Approx(std::exp(ll[k])).epsilon(0.02));
  }
  CHECK(le.back() == doctest::Approx(std::exp(ll.back())).epsilon(0.02));
}

TEST_CASE("levy inverse likelihood is an exact discrete martingale") {
  const int reps = 3000;
  std::vector<double> vals;
  LevyObservationModel obs;
  for (int r = 0; r < reps; ++r) {
    World w("levy-correlated", 0.1, 5000 + static_cast<std::uint64_t>(r));
    const ObservationPath y =
        simulate_observation_levy(w.x, w.nb, obs, SeedSpec(900).child(5000 + static_cast<std::uint64_t>(r)));
    const std::vector<double> ll = likelihood_levy(w.x, y, obs);
    vals.push_back(std::exp(-ll.back()));
  }
  const MeanSE m = mean_se(vals);
  CHECK(std::abs(m.mean - 1.0) <= std::max(4.0 * m.se, 0.02));
}

TEST_CASE("compensator rate agrees with the mark-law integral") {
  LevyObservationModel obs;
  const Quadrature rule = obs.m3.expectation_rule();
  for (double x : {-2.0, -0.3, 0.0, 1.1}) {
    const double direct = obs.compensator_rate(0.0, x);
    const double byquad =
        obs.r3 * mark_mean([&](double u) { return 1.0 - obs.lambda(0.0, x, u); }, obs.m3, rule);
    CHECK(direct == doctest::Approx(byquad).epsilon(1e-10));
  }
}

TEST_CASE("observation coarsening sums increments and keeps events") {
  World w("levy-correlated");
  LevyObservationModel obs;
  const ObservationPath y = simulate_observation_levy(w.x, w.nb, obs, SeedSpec(903));
  const ObservationPath yc = coarsen_observation(y, 2);
  REQUIRE(yc.dy.size() == 250);
  CHECK(yc.grid.steps == 250);
  CHECK(yc.grid.horizon == doctest::Approx(1.0));
  for (std::size_t k = 0; k < 250; ++k)
    CHECK(yc.dy[k] == doctest::Approx(y.dy[2 * k] + y.dy[2 * k + 1]).epsilon(1e-14));
  REQUIRE(yc.events.size() == y.events.size());
  for (std::size_t e = 0; e < y.events.size(); ++e) {
    CHECK(yc.events[e].time == y.events[e].time);
    CHECK(yc.events[e].mark == y.events[e].mark);
  }
  CHECK(yc.first_in_cell.size() == 251);
  // a factor that does not divide the grid is rejected
  CHECK_THROWS_AS(coarsen_observation(y, 3), ConfigError);
}
