// The invariant-suite experiment: a battery of cheap, deterministic property
// checks over every module. Each check lands as one report row; any failure
// fails the suite but never stops it (exceptions become failed checks).
#include <algorithm>
#include <cmath>
#include <functional>

#include "msfilter/experiment.hpp"
#include "msfilter/filter.hpp"
#include "msfilter/noise.hpp"
#include "msfilter/sde.hpp"
#include "msfilter/zakai_fd.hpp"

namespace msf {

namespace {

constexpr std::uint64_t kSuiteBase = 1000;

struct Suite {
  ExperimentReport& rep;
  SeedSpec seed;

  void run(const std::string& name, const std::function<std::pair<bool, std::string>()>& body) {
    try {
      auto [ok, note] = body();
      rep.check(name, ok, note);
    } catch (const std::exception& ex) {
      rep.check(name, false, std::string("exception: ") + ex.what());
    }
  }
};

double trapezoid_moment(const DensityGrid& g, int order) {
  double s = 0.0;
  for (std::size_t i = 0; i < g.q.size(); ++i) {
    const double w = (i == 0 || i + 1 == g.q.size()) ? 0.5 : 1.0;
    s += w * std::pow(g.node(static_cast<std::int64_t>(i)), order) * g.q[i];
  }
  return s * g.dx();
}

}  // namespace

ExperimentReport run_invariant_suite(const ExperimentConfig& ec) {
  ExperimentReport rep;
  rep.kind = ec.kind;
  Suite s{rep, SeedSpec(ec.master_seed)};
  const ModelSpec mou = make_model("analytic-ou");

  s.run("rng-stream-reproducibility", [&]() -> std::pair<bool, std::string> {
    const SeedSpec sp = s.seed.child(kSuiteBase + 1);
    Rng a(sp), b(sp), skipped(sp);
    bool same = true;
    std::vector<std::uint64_t> draws(1000);
    for (auto& d : draws) d = a.next_u64();
    for (std::size_t i = 0; i < draws.size(); ++i) same = same && (b.next_u64() == draws[i]);
    skipped.skip(500);
    for (std::size_t i = 500; i < draws.size(); ++i)
      same = same && (skipped.next_u64() == draws[i]);
    return {same, "replay and skip() agree over 1000 draws"};
  });

  s.run("rng-stream-independence", [&]() -> std::pair<bool, std::string> {
    Rng a(s.seed.child(kSuiteBase + 2).child(1)), b(s.seed.child(kSuiteBase + 2).child(2));
    const int n = 4096;
    double sa = 0, sb = 0, sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < n; ++i) {
      const double x = a.uniform(), y = b.uniform();
      sa += x; sb += y; sab += x * y; saa += x * x; sbb += y * y;
    }
    const double cov = sab / n - (sa / n) * (sb / n);
    const double corr = cov / std::sqrt((saa / n - (sa / n) * (sa / n)) *
                                        (sbb / n - (sb / n) * (sb / n)));
    return {std::abs(corr) < 0.08, "sibling-stream correlation " + fmt_double(corr)};
  });

  s.run("normal-moments", [&]() -> std::pair<bool, std::string> {
    Rng r(s.seed.child(kSuiteBase + 3));
    std::vector<double> xs(100000);
    for (auto& x : xs) x = r.normal();
    const MeanSE ms = mean_se(xs);
    const double var = sample_variance(xs);
    const double q975 = Rng::norm_inv(0.975);
    const bool ok = std::abs(ms.mean) < 0.02 && std::abs(var - 1.0) < 0.03 &&
                    std::abs(q975 - 1.959963985) < 1e-6;
    return {ok, "mean " + fmt_double(ms.mean) + ", var " + fmt_double(var) + ", invcdf(.975) " +
                    fmt_double(q975)};
  });

  s.run("brownian-variance", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 1000);
    std::vector<double> totals(2000);
    for (std::size_t i = 0; i < totals.size(); ++i)
      totals[i] = sample_brownian(g, s.seed.child(kSuiteBase + 4).child(i)).total();
    const double var = sample_variance(totals);
    return {std::abs(var - 1.0) < 0.15, "Var[W_1] = " + fmt_double(var)};
  });

  s.run("poisson-count-moments", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 100);
    std::vector<double> counts(2000);
    for (std::size_t i = 0; i < counts.size(); ++i)
      counts[i] = static_cast<double>(
          sample_jump_stream(g, 4.0, MarkDist{}, s.seed.child(kSuiteBase + 5).child(i))
              .events.size());
    const MeanSE ms = mean_se(counts);
    const double vr = sample_variance(counts) / ms.mean;
    const bool ok = std::abs(ms.mean - 4.0) < 0.18 && vr > 0.8 && vr < 1.2;
    return {ok, "mean " + fmt_double(ms.mean) + " (target 4), var/mean " + fmt_double(vr)};
  });

  s.run("jump-count-independence", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 100);
    std::vector<std::vector<double>> table(2, std::vector<double>(2, 0.0));
    for (std::size_t i = 0; i < 1000; ++i) {
      const JumpStream st =
          sample_jump_stream(g, 4.0, MarkDist{}, s.seed.child(kSuiteBase + 6).child(i));
      int n1 = 0, n2 = 0;
      for (const auto& e : st.events) (e.time <= 0.5 ? n1 : n2)++;
      table[n1 <= 1 ? 0 : 1][n2 <= 1 ? 0 : 1] += 1.0;
    }
    int dof = 0;
    const double stat = chi2_independence(table, &dof);
    const double crit = chi2_quantile(0.999, dof);
    return {stat <= crit, "chi2 " + fmt_double(stat) + " vs crit " + fmt_double(crit) +
                              " (dof " + std::to_string(dof) + ")"};
  });

  s.run("compensated-integral-centering", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 100);
    std::vector<double> ints(2000);
    for (std::size_t i = 0; i < ints.size(); ++i) {
      const JumpStream st =
          sample_jump_stream(g, 2.0, MarkDist{}, s.seed.child(kSuiteBase + 7).child(i));
      ints[i] = compensated_integral(st, [](double, double u) { return u; });
    }
    const MeanSE ms = mean_se(ints);
    return {std::abs(ms.mean) <= 4.0 * std::max(ms.se, 1e-12),
            "mean " + fmt_double(ms.mean) + " +- " + fmt_double(ms.se)};
  });

  s.run("dissipativity-arithmetic", [&]() -> std::pair<bool, std::string> {
    const auto a = verify_dissipativity({2.0, 0.5, 0.0, 0.0});
    const auto b = verify_dissipativity({1.0, 2.0, 0.0, 0.0});
    const auto c = verify_dissipativity({1.0, 0.5, 0.0, 0.0});
    const bool ok = a.M == 3.5 && a.valid && b.M == 0.0 && !b.valid && c.M == 1.5 && c.valid;
    return {ok, "M = 3.5 / 0 / 1.5, validity +/-/+"};
  });

  s.run("catalog-dissipativity", [&]() -> std::pair<bool, std::string> {
    const ModelSpec mt = make_model("bounded-tanh");
    const ModelSpec ml = make_model("levy-correlated");
    const double Mou = mou.dissipativity().M;
    const double Mt = mt.dissipativity().M;
    const double Ml = ml.dissipativity().M;
    const bool ok = std::abs(Mou - 5.0 / 6.0) < 1e-12 && std::abs(Mt - 1.0) < 1e-12 && Ml > 0.0;
    return {ok, "M = " + fmt_double(Mou) + " / " + fmt_double(Mt) + " / " + fmt_double(Ml)};
  });

  s.run("coupling-checksum", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 1000);
    const SeedSpec sp = s.seed.child(kSuiteBase + 10);
    NoiseBundle nb = make_noise_bundle(g, sp, mou.r1, mou.m1, mou.r2 / 0.1, mou.m2);
    const std::uint64_t ck = noise_checksum(nb);
    std::vector<double> x1, z1, x2, z2;
    simulate_slow_fast(mou, 0.1, nb, x1, z1);
    const ModelSpec mc = mou;
    const auto xh = simulate_homogenized(mou, [mc](double x) { return mc.bbar_oracle(x); }, nb);
    (void)xh;
    const bool unchanged = noise_checksum(nb) == ck;
    simulate_slow_fast(mou, 0.1, nb, x2, z2);
    const bool det = x1 == x2 && z1 == z2;
    const NoiseBundle nb2 = make_noise_bundle(g, sp, mou.r1, mou.m1, mou.r2 / 0.1, mou.m2);
    const bool rebuild = noise_checksum(nb2) == ck;
    return {unchanged && det && rebuild,
            "checksum stable, resimulation bit-identical, bundle rebuild identical"};
  });

  s.run("frozen-fast-invariant-moments", [&]() -> std::pair<bool, std::string> {
    AveragingConfig cfg;
    cfg.horizon = 400.0;
    const InvariantSample inv = estimate_invariant(mou, 0.7, cfg, s.seed.child(kSuiteBase + 11));
    const MeanSE bm = batch_means_se(inv.z);
    const double var = sample_variance(inv.z);
    const double tmean = mou.invariant_mean(0.7), tvar = mou.invariant_var();
    const bool ok = std::abs(bm.mean - tmean) <= std::max(5.0 * bm.se, 0.05) &&
                    std::abs(var - tvar) <= 0.25 * tvar;
    return {ok, "mean " + fmt_double(bm.mean) + " (target " + fmt_double(tmean) + "), var " +
                    fmt_double(var) + " (target " + fmt_double(tvar) + ")"};
  });

  s.run("drift-cache-vs-oracle", [&]() -> std::pair<bool, std::string> {
    AveragingConfig cfg;
    cfg.horizon = 300.0;
    const std::vector<double> nodes = linspace(-2.0, 2.0, 5);
    const DriftCache cache = build_drift_cache(mou, nodes, cfg, s.seed.child(kSuiteBase + 12));
    bool ok = true;
    double worst = 0.0;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double err = std::abs(cache.values()[i] - mou.bbar_oracle(nodes[i]));
      worst = std::max(worst, err);
      ok = ok && err <= std::max(5.0 * cache.ses()[i], 0.03);
      ok = ok && std::abs(cache.eval(nodes[i]) - cache.values()[i]) <= 1e-12;
    }
    ok = ok && std::abs(mou.bbar_oracle(-1.3) + mou.bbar_oracle(1.3)) <= 1e-12;
    return {ok, "max node error " + fmt_double(worst) + ", interpolation exact at nodes"};
  });

  s.run("filter-normalization", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 200);
    const SeedSpec sp = s.seed.child(kSuiteBase + 13);
    NoiseBundle nb = make_noise_bundle(g, sp, mou.r1, mou.m1, mou.r2, mou.m2);
    const ModelSpec mc = mou;
    DriftFn bbar = [mc](double x) { return mc.bbar_oracle(x); };
    const auto xh = simulate_homogenized(mou, bbar, nb);
    SensorObservationModel obs;
    const ObservationPath y = simulate_observation_sensor(xh, nb, obs);
    FilterOptions opt;
    opt.n_particles = 200;
    opt.bbar = bbar;
    const FilterTrace tr = particle_filter_sensor(mou, obs, y, opt, sp.child(200));
    bool ok = tr.rho1(0) == 1.0;
    for (std::int64_t k = 0; k <= g.steps; ++k) {
      ok = ok && tr.pi(k, 3) == 1.0;  // bit-exact normalization
      ok = ok && tr.ess[static_cast<std::size_t>(k)] >= 1.0 &&
           tr.ess[static_cast<std::size_t>(k)] <= 200.0 + 1e-9;
    }
    return {ok, "pi(1) = 1 bit-exact at all 201 checkpoints, ESS in [1, np]"};
  });

  s.run("filter-uninformative-h", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 200);
    const SeedSpec sp = s.seed.child(kSuiteBase + 14);
    NoiseBundle nb = make_noise_bundle(g, sp, mou.r1, mou.m1, mou.r2, mou.m2);
    const ModelSpec mc = mou;
    DriftFn bbar = [mc](double x) { return mc.bbar_oracle(x); };
    const auto xh = simulate_homogenized(mou, bbar, nb);
    SensorObservationModel obs;
    obs.h = HFun::parse("zero", 0.0, 5.0);
    const ObservationPath y = simulate_observation_sensor(xh, nb, obs);
    FilterOptions opt;
    opt.n_particles = 200;
    opt.bbar = bbar;
    const FilterTrace tr = particle_filter_sensor(mou, obs, y, opt, sp.child(200));
    bool ok = tr.n_resamples == 0;
    for (std::int64_t k = 0; k <= g.steps; ++k) {
      ok = ok && std::abs(tr.log_mass[static_cast<std::size_t>(k)]) <= 1e-12;
      ok = ok && std::abs(tr.ess[static_cast<std::size_t>(k)] - 200.0) <= 1e-4;
    }
    return {ok, "uniform weights: |log mass| <= 1e-12, ESS = np, no resampling"};
  });

  s.run("levy-likelihood-euler-consistency", [&]() -> std::pair<bool, std::string> {
    const ModelSpec ml = make_model("levy-correlated");
    const TimeGrid g(1.0, 1000);
    const SeedSpec sp = s.seed.child(kSuiteBase + 15);
    NoiseBundle nb = make_noise_bundle(g, sp, ml.r1, ml.m1, ml.r2 / 0.1, ml.m2);
    std::vector<double> x, z;
    simulate_slow_fast(ml, 0.1, nb, x, z);
    LevyObservationModel obs;
    const ObservationPath y = simulate_observation_levy(x, nb, obs, sp);
    const double closed = std::exp(likelihood_levy(x, y, obs).back());
    const double euler = likelihood_levy_euler(x, y, obs).back();
    const double rel = std::abs(closed - euler) / std::max(closed, 1e-12);
    return {rel <= 0.05, "closed " + fmt_double(closed) + " vs Euler " + fmt_double(euler) +
                             " (rel gap " + fmt_double(rel) + ")"};
  });

  s.run("mark-recovery", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 100);
    const SeedSpec sp = s.seed.child(kSuiteBase + 16);
    NoiseBundle nb = make_noise_bundle(g, sp, 0.0, MarkDist{}, 0.0, MarkDist{});
    const std::vector<double> xs(static_cast<std::size_t>(g.steps) + 1, 0.3);
    bool ok = true;
    std::size_t n_events = 0;
    for (double a3 : {1.0, 2.0}) {
      LevyObservationModel obs;
      obs.a3 = a3;
      const ObservationPath y = simulate_observation_levy(xs, nb, obs, sp.child(a3 == 1.0 ? 1 : 2));
      n_events += y.events.size();
      for (const auto& ev : y.events) ok = ok && obs.mark_from_jump(ev.jump) == ev.mark;
    }
    return {ok && n_events > 0,
            "jump -> mark inversion exact on " + std::to_string(n_events) + " events"};
  });

  s.run("thinning-acceptance-rate", [&]() -> std::pair<bool, std::string> {
    const TimeGrid g(1.0, 100);
    LevyObservationModel obs;
    obs.lambda0 = 0.5;
    obs.lambda_slope = 0.0;
    obs.r3 = 4.0;
    const std::vector<double> xs(static_cast<std::size_t>(g.steps) + 1, 0.0);
    std::vector<double> counts(1000);
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const SeedSpec sp = s.seed.child(kSuiteBase + 17).child(i);
      NoiseBundle nb = make_noise_bundle(g, sp, 0.0, MarkDist{}, 0.0, MarkDist{});
      const ObservationPath y = simulate_observation_levy(xs, nb, obs, sp);
      std::size_t n = 0;
      for (const auto& ev : y.events) n += ev.informative ? 1 : 0;
      counts[i] = static_cast<double>(n);
    }
    const MeanSE ms = mean_se(counts);
    return {std::abs(ms.mean - 2.0) <= 4.0 * ms.se,
            "accepted-event rate " + fmt_double(ms.mean) + " +- " + fmt_double(ms.se) +
                " (target 2 = lambda * r3)"};
  });

  s.run("slope-fit-synthetic", [&]() -> std::pair<bool, std::string> {
    const std::vector<double> eps = {0.1, 0.05, 0.02, 0.01};
    std::vector<double> v1, v13, se1, vn;
    for (double e : eps) {
      v1.push_back(e);
      v13.push_back(std::cbrt(e));
      se1.push_back(0.01 * e);
    }
    const SlopeFit f1 = fit_loglog_slope(eps, v1, se1);
    const SlopeFit f13 = fit_loglog_slope(eps, v13, se1);
    Rng r(s.seed.child(kSuiteBase + 18));
    for (double e : eps) vn.push_back(std::cbrt(e) * (1.0 + 0.05 * r.normal()));
    std::vector<double> sen;
    for (double v : vn) sen.push_back(0.05 * v);
    const SlopeFit fn = fit_loglog_slope(eps, vn, sen);
    const bool ok = std::abs(f1.slope - 1.0) < 1e-8 && std::abs(f13.slope - 1.0 / 3.0) < 1e-8 &&
                    fn.ci_lo <= 1.0 / 3.0 && 1.0 / 3.0 <= fn.ci_hi;
    return {ok, "exact slopes " + fmt_double(f1.slope) + " / " + fmt_double(f13.slope) +
                    ", noisy CI [" + fmt_double(fn.ci_lo) + ", " + fmt_double(fn.ci_hi) + "]"};
  });

  s.run("fd-mass-and-variance", [&]() -> std::pair<bool, std::string> {
    const ModelSpec ml = make_model("levy-correlated", {{"c1", 0.0}});
    LevyObservationModel obs;
    obs.h = HFun::parse("zero", 0.0, 5.0);
    obs.r3 = 0.0;
    DensityGrid g = make_gaussian_density(-6.0, 6.0, 200, 0.0, 0.8);
    ZakaiFdOptions fopt;
    fopt.bbar = [](double) { return 0.0; };
    const double mass0 = g.mass();
    const double var0 = trapezoid_moment(g, 2) / trapezoid_moment(g, 0);
    for (int k = 0; k < 100; ++k) zakai_fd_step(g, ml, obs, fopt, 0.0, 2e-3);
    const double mass1 = g.mass();
    const double var1 = trapezoid_moment(g, 2) / trapezoid_moment(g, 0);
    const double diff = ml.sigma_v * ml.sigma_v + ml.sigma_b * ml.sigma_b;
    const double growth = var1 - var0, target = diff * 0.2;
    bool ok = std::abs(mass1 - mass0) <= 1e-9 * mass0;
    ok = ok && std::abs(growth - target) <= 0.05 * target;

    // lambda = 1/2 event halves the mass bit-exactly
    LevyObservationModel obs2;
    obs2.lambda0 = 0.5;
    obs2.lambda_slope = 0.0;
    const double before = g.mass();
    zakai_fd_jump_update(g, MarkedEvent{0.1, 0.3, 0.3, true}, obs2);
    ok = ok && g.mass() == 0.5 * before;

    // explicit scheme rejects a CFL-violating step
    bool threw = false;
    try {
      DensityGrid g2 = make_gaussian_density(-6.0, 6.0, 200, 0.0, 0.8);
      ZakaiFdOptions bad = fopt;
      bad.implicit_diffusion = false;
      zakai_fd_step(g2, ml, obs, bad, 0.0, 0.05);
    } catch (const ConfigError&) {
      threw = true;
    }
    ok = ok && threw;
    return {ok, "mass conserved, variance growth " + fmt_double(growth) + " (target " +
                    fmt_double(target) + "), halving exact, CFL guard throws"};
  });

  s.run("observation-coarsening", [&]() -> std::pair<bool, std::string> {
    const ModelSpec ml = make_model("levy-correlated");
    const TimeGrid g(1.0, 100);
    const SeedSpec sp = s.seed.child(kSuiteBase + 20);
    NoiseBundle nb = make_noise_bundle(g, sp, ml.r1, ml.m1, ml.r2 / 0.1, ml.m2);
    std::vector<double> x, z;
    simulate_slow_fast(ml, 0.1, nb, x, z);
    LevyObservationModel obs;
    const ObservationPath y = simulate_observation_levy(x, nb, obs, sp);
    const ObservationPath c = coarsen_observation(y, 2);
    bool ok = c.grid.steps == 50 && c.events.size() == y.events.size();
    for (std::size_t k = 0; k < 50; ++k)
      ok = ok && c.dy[k] == y.dy[2 * k] + y.dy[2 * k + 1];
    ok = ok && c.first_in_cell.back() == c.events.size();
    return {ok, "increment sums exact, events preserved, cell index consistent"};
  });

  s.run("reproducibility-mini", [&]() -> std::pair<bool, std::string> {
    const ModelSpec mc = mou;
    DriftFn bbar = [mc](double x) { return mc.bbar_oracle(x); };
    SensorObservationModel obs;
    const TimeGrid g(0.2, 100);
    const SeedSpec sp = s.seed.child(kSuiteBase + 21);
    auto run = [&](int threads) {
      return filter_l1_distance(mou, obs, 0.1, g, 100, 6, 0, bbar, sp, threads);
    };
    const FilterDistanceResult r1 = run(1), r2 = run(1), r3 = run(3);
    auto same = [](const FilterDistanceResult& a, const FilterDistanceResult& b) {
      return a.dist.mean == b.dist.mean && a.dist.se == b.dist.se && a.ks == b.ks &&
             a.eps_samples == b.eps_samples && a.hom_samples == b.hom_samples;
    };
    return {same(r1, r2) && same(r1, r3),
            "rerun and 3-thread run bit-identical to the serial run"};
  });

  return rep;
}

}  // namespace msf
