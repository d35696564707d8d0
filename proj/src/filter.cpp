#include "msfilter/filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "msfilter/parallel.hpp"

namespace msf {

double ParticleEnsemble::ess() const {
  double s2 = 0.0;
  for (double wi : w) s2 += wi * wi;
  return s2 > 0.0 ? 1.0 / s2 : 0.0;
}

namespace {

// stream ids under the filter seed: 0..np-1 are particle slots
constexpr std::uint64_t kResampleStream = std::uint64_t{1} << 20;

// per-cell compound-Poisson increment through a linear jump map coef*u
double jump_increment(Rng& rng, double rate_dt, const MarkDist& marks, double coef) {
  if (rate_dt <= 0.0 || coef == 0.0) return 0.0;
  const int n = rng.poisson(rate_dt);
  double s = 0.0;
  for (int j = 0; j < n; ++j) s += marks.sample(rng);
  return coef * s;
}

// particle slot i keeps stream i across resampling, so duplicated ancestors
// diverge and re-runs are bit-identical
void systematic_resample(std::vector<double>& x, std::vector<double>& z, std::vector<double>& w,
                         Rng& rng) {
  const std::size_t np = w.size();
  const bool has_z = !z.empty();
  const double u0 = rng.uniform();
  std::vector<double> nx(np), nz(has_z ? np : 0);
  std::size_t i = 0;
  double cum = w[0];
  for (std::size_t j = 0; j < np; ++j) {
    const double pos = (static_cast<double>(j) + u0) / static_cast<double>(np);
    while (pos > cum && i + 1 < np) cum += w[++i];
    nx[j] = x[i];
    if (has_z) nz[j] = z[i];
  }
  x = std::move(nx);
  if (has_z) z = std::move(nz);
  std::fill(w.begin(), w.end(), 1.0 / static_cast<double>(np));
}

// shared scaffolding of the two filters
struct FilterState {
  const FilterOptions& opt;
  TimeGrid grid;
  std::size_t np;
  bool eps_mode;
  std::vector<Rng> rng;
  Rng rng_sys;
  std::vector<double> x, z, w, lw, hh;
  double log_mass = 0.0;
  FilterTrace tr;

  FilterState(const ModelSpec& m, const TimeGrid& g, const FilterOptions& o, const SeedSpec& seed)
      : opt(o), grid(g), np(static_cast<std::size_t>(o.n_particles)),
        eps_mode(o.mode == FilterMode::Epsilon), rng_sys(seed.child(kResampleStream)) {
    if (o.n_particles < 1) throw ConfigError("filter: n_particles must be >= 1");
    if (eps_mode && g.dt() > o.eps / 10.0 + 1e-15)
      throw ConfigError("filter: dt must satisfy dt <= eps/10 in epsilon mode");
    if (!eps_mode && !o.bbar)
      throw ConfigError("filter: homogenized mode needs an averaged-drift evaluator");
    rng.reserve(np);
    for (std::size_t i = 0; i < np; ++i) rng.emplace_back(seed.child(i));
    x.assign(np, m.x0);
    if (m.x0_spread > 0.0)
      for (std::size_t i = 0; i < np; ++i) x[i] = m.x0 + m.x0_spread * rng[i].normal();
    if (eps_mode) z.assign(np, m.z0);
    w.assign(np, 1.0 / static_cast<double>(np));
    lw.assign(np, 0.0);
    hh.assign(np, 0.0);

    tr.grid = g;
    tr.test_fns = o.test_fns;
    const std::size_t rows = static_cast<std::size_t>(g.steps) + 1;
    tr.pi_hat.assign(rows * o.test_fns.size(), 0.0);
    tr.log_mass.assign(rows, 0.0);
    tr.ess.assign(rows, 0.0);
    if (o.keep_residual_terms) tr.zakai_rhs.assign(rows * o.test_fns.size(), 0.0);
  }

  // pi_hat row from the weighted ensemble; num and den accumulate in the same
  // slot order so pi(one) == 1 bit-exactly
  void record(std::size_t row) {
    const std::size_t nf = tr.test_fns.size();
    double den = 0.0, s2 = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      den += w[i];
      s2 += w[i] * w[i];
    }
    for (std::size_t fj = 0; fj < nf; ++fj) {
      const int fid = tr.test_fns[fj];
      double num = 0.0;
      for (std::size_t i = 0; i < np; ++i) num += w[i] * test_function(fid, x[i]).v;
      tr.pi_hat[row * nf + fj] = num / den;
    }
    tr.log_mass[row] = log_mass;
    tr.ess[row] = s2 > 0.0 ? 1.0 / s2 : 0.0;
  }

  // multiply the staged per-particle log-increments into the weights
  void fold_weights() {
    double cmax = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < np; ++i) cmax = std::max(cmax, lw[i]);
    double s = 0.0;
    for (std::size_t i = 0; i < np; ++i) {
      w[i] *= std::exp(lw[i] - cmax);
      s += w[i];
    }
    if (!(s > 0.0) || !std::isfinite(s)) throw FilterDegeneracyError();
    log_mass += cmax + std::log(s);
    for (std::size_t i = 0; i < np; ++i) w[i] /= s;
  }

  void maybe_resample(std::size_t row) {
    if (opt.resample_frac <= 0.0) return;
    if (tr.ess[row] < opt.resample_frac * static_cast<double>(np)) {
      systematic_resample(x, z, w, rng_sys);
      ++tr.n_resamples;
    }
  }

  void finish() {
    tr.final_ensemble.x = x;
    tr.final_ensemble.z = z;
    tr.final_ensemble.w = w;
    tr.final_ensemble.log_mass = log_mass;
  }
};

double generator_apply_impl(const ModelSpec& m, int fn_id, const TestFn& f, double x, double z,
                            const Quadrature* jump_rule) {
  double acc = f.d1 * m.b1(x, z) +
               0.5 * f.d2 * (m.sig_v(x) * m.sig_v(x) + m.sig_b(x) * m.sig_b(x));
  if (jump_rule) {
    double j = 0.0;
    for (std::size_t qi = 0; qi < jump_rule->nodes.size(); ++qi) {
      const double du = m.f1(jump_rule->nodes[qi]);
      j += jump_rule->weights[qi] * (test_function(fn_id, x + du).v - f.v - f.d1 * du);
    }
    acc += m.r1 * j;
  }
  return acc;
}

}  // namespace

FilterTrace particle_filter_sensor(const ModelSpec& m, const SensorObservationModel& obs,
                                   const ObservationPath& y, const FilterOptions& opt,
                                   const SeedSpec& seed) {
  obs.validate();
  if (m.levy_family) throw ConfigError("sensor filter expects a sensor-family model");
  if (opt.keep_residual_terms)
    throw ConfigError("residual accumulation is a levy-filter feature");

  FilterState st(m, y.grid, opt, seed);
  const double dt = st.grid.dt(), sdt = std::sqrt(dt);
  const double s3 = obs.s3, S = obs.cond_root();
  const double comp1_dt = m.f1_compensator() * dt;
  const double r1_dt = m.r1 * dt;
  const double eps = opt.eps;
  const double dte = dt / eps, sdte = std::sqrt(dte);
  const double comp2_dte = m.f2_compensator() * dte;
  const double r2_dte = m.r2 * dte;

  st.record(0);
  for (std::int64_t k = 0; k < st.grid.steps; ++k) {
    const double dyk = y.dy[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < st.np; ++i) {
      const double h = obs.h(st.x[i]);
      st.hh[i] = h;
      st.lw[i] = h * dyk - 0.5 * h * h * dt;
    }
    for (std::size_t i = 0; i < st.np; ++i) {
      Rng& g = st.rng[i];
      // conditional draw of the particle's V-increment given the observation,
      // then the reference-measure drift correction
      const double dv = s3 * dyk + S * sdt * g.normal() - s3 * st.hh[i] * dt;
      double xnew;
      if (st.eps_mode) {
        xnew = st.x[i] + m.b1(st.x[i], st.z[i]) * dt + m.sigma1 * dv +
               jump_increment(g, r1_dt, m.m1, m.c1) - comp1_dt;
        st.z[i] += m.b2(st.x[i], st.z[i]) * dte + m.sigma2 * sdte * g.normal() +
                   jump_increment(g, r2_dte, m.m2, m.c2) - comp2_dte;
      } else {
        xnew = st.x[i] + opt.bbar(st.x[i]) * dt + m.sigma1 * dv +
               jump_increment(g, r1_dt, m.m1, m.c1) - comp1_dt;
      }
      st.x[i] = xnew;
    }
    st.fold_weights();
    st.record(static_cast<std::size_t>(k) + 1);
    st.maybe_resample(static_cast<std::size_t>(k) + 1);
  }
  st.finish();
  return st.tr;
}

FilterTrace particle_filter_levy(const ModelSpec& m, const LevyObservationModel& obs,
                                 const ObservationPath& y, const FilterOptions& opt,
                                 const SeedSpec& seed) {
  obs.validate();
  if (!m.levy_family) throw ConfigError("levy filter expects a levy-family model");
  if (opt.keep_residual_terms && opt.mode != FilterMode::Epsilon)
    throw ConfigError("residual accumulation requires epsilon mode");
  if (opt.keep_residual_terms && opt.resample_frac > 0.0)
    throw ConfigError("residual accumulation requires resampling off");

  FilterState st(m, y.grid, opt, seed);
  const double dt = st.grid.dt(), sdt = std::sqrt(dt);
  const double sv = m.sigma_v, sb = m.sigma_b;
  const double comp1_dt = m.f1_compensator() * dt;
  const double r1_dt = m.r1 * dt;
  const double eps = opt.eps;
  const double dte = dt / eps, sdte = std::sqrt(dte);
  const double comp2_dte = m.f2_compensator() * dte;
  const double r2_dte = m.r2 * dte;

  const std::size_t nf = opt.test_fns.size();
  const bool with_jump_gen = m.c1 != 0.0 && m.r1 > 0.0;
  Quadrature jump_rule;
  if (opt.keep_residual_terms && with_jump_gen) jump_rule = m.m1.expectation_rule(16);
  std::vector<double> rhs_acc(nf, 0.0);
  std::vector<double> ev_w, ev_lam;  // residual bookkeeping scratch

  st.record(0);
  for (std::int64_t k = 0; k < st.grid.steps; ++k) {
    const std::size_t ku = static_cast<std::size_t>(k);
    const double dyk = y.dy[ku];
    const double tk = st.grid.t(k);
    for (std::size_t i = 0; i < st.np; ++i) {
      const double h = obs.h(st.x[i]);
      st.hh[i] = h;
      st.lw[i] = h * dyk - 0.5 * h * h * dt + obs.compensator_rate(tk, st.x[i]) * dt;
    }
    for (std::uint32_t e = y.first_in_cell[ku]; e < y.first_in_cell[ku + 1]; ++e) {
      const MarkedEvent& ev = y.events[e];
      if (!ev.informative) continue;
      for (std::size_t i = 0; i < st.np; ++i)
        st.lw[i] += std::log(obs.lambda(ev.time, st.x[i], ev.mark));
    }

    if (opt.keep_residual_terms) {
      // discrete Zakai right-hand side at the left states, scaled by the
      // current unnormalized mass
      const double mass = std::exp(st.log_mass);
      for (std::size_t fj = 0; fj < nf; ++fj) {
        const int fid = opt.test_fns[fj];
        double a_gen = 0.0, a_corr = 0.0, a_comp = 0.0;
        for (std::size_t i = 0; i < st.np; ++i) {
          const TestFn f = test_function(fid, st.x[i]);
          a_gen += st.w[i] * generator_apply_impl(m, fid, f, st.x[i], st.z[i],
                                                  with_jump_gen ? &jump_rule : nullptr);
          a_corr += st.w[i] * (f.v * st.hh[i] + f.d1 * sv);
          a_comp += st.w[i] * f.v * obs.compensator_rate(tk, st.x[i]);
        }
        rhs_acc[fj] += mass * (a_gen * dt + a_corr * dyk + a_comp * dt);
      }
      // events compose within a cell: each event reweights the measure that
      // the next event integrates against (additive for one event, but the
      // cross terms matter when several events share a cell)
      bool first_ev = true;
      for (std::uint32_t e = y.first_in_cell[ku]; e < y.first_in_cell[ku + 1]; ++e) {
        const MarkedEvent& ev = y.events[e];
        if (!ev.informative) continue;
        if (first_ev) {
          ev_w.assign(st.w.begin(), st.w.end());
          ev_lam.resize(st.np);
          first_ev = false;
        }
        for (std::size_t i = 0; i < st.np; ++i)
          ev_lam[i] = obs.lambda(ev.time, st.x[i], ev.mark);
        for (std::size_t fj = 0; fj < nf; ++fj) {
          double a_ev = 0.0;
          for (std::size_t i = 0; i < st.np; ++i)
            a_ev += ev_w[i] * test_function(opt.test_fns[fj], st.x[i]).v * (ev_lam[i] - 1.0);
          rhs_acc[fj] += mass * a_ev;
        }
        for (std::size_t i = 0; i < st.np; ++i) ev_w[i] *= ev_lam[i];
      }
      for (std::size_t fj = 0; fj < nf; ++fj)
        st.tr.zakai_rhs[(ku + 1) * nf + fj] = rhs_acc[fj];
    }

    for (std::size_t i = 0; i < st.np; ++i) {
      Rng& g = st.rng[i];
      // the correlated channel is fully observed: recover it by removing the
      // particle's own drift from the continuous observation increment
      const double dv = dyk - st.hh[i] * dt;
      double xnew;
      if (st.eps_mode) {
        xnew = st.x[i] + m.b1(st.x[i], st.z[i]) * dt + sv * dv + sb * sdt * g.normal() +
               jump_increment(g, r1_dt, m.m1, m.c1) - comp1_dt;
        st.z[i] += m.b2(st.x[i], st.z[i]) * dte + m.sigma2 * sdte * g.normal() +
                   jump_increment(g, r2_dte, m.m2, m.c2) - comp2_dte;
      } else {
        xnew = st.x[i] + opt.bbar(st.x[i]) * dt + sv * dv + sb * sdt * g.normal() +
               jump_increment(g, r1_dt, m.m1, m.c1) - comp1_dt;
      }
      st.x[i] = xnew;
    }
    st.fold_weights();
    st.record(ku + 1);
    st.maybe_resample(ku + 1);
  }
  st.finish();
  return st.tr;
}

double generator_apply(const ModelSpec& m, int fn_id, double x, double z) {
  const TestFn f = test_function(fn_id, x);
  if (m.c1 != 0.0 && m.r1 > 0.0) {
    const Quadrature rule = m.m1.expectation_rule(16);
    return generator_apply_impl(m, fn_id, f, x, z, &rule);
  }
  return generator_apply_impl(m, fn_id, f, x, z, nullptr);
}

double zakai_residual_check(const FilterTrace& tr, std::size_t fn_idx) {
  if (tr.zakai_rhs.empty())
    throw ConfigError("zakai_residual_check needs a trace with residual accumulation on");
  const std::size_t nf = tr.test_fns.size();
  const double rho0 = tr.rho1(0) * tr.pi(0, fn_idx);
  double worst = 0.0;
  for (std::int64_t k = 0; k <= tr.grid.steps; ++k) {
    const double rho_k = tr.rho1(k) * tr.pi(k, fn_idx);
    const double rhs = tr.zakai_rhs[static_cast<std::size_t>(k) * nf + fn_idx];
    worst = std::max(worst, std::abs(rho_k - rho0 - rhs));
  }
  return worst;
}

double zakai_residual_step_mean(const FilterTrace& tr, std::size_t fn_idx) {
  if (tr.zakai_rhs.empty())
    throw ConfigError("zakai_residual_step_mean needs a trace with residual accumulation on");
  if (tr.grid.steps <= 0) return 0.0;
  const std::size_t nf = tr.test_fns.size();
  double acc = 0.0;
  for (std::int64_t k = 0; k < tr.grid.steps; ++k) {
    const double lhs = tr.rho1(k + 1) * tr.pi(k + 1, fn_idx) - tr.rho1(k) * tr.pi(k, fn_idx);
    const double rhs = tr.zakai_rhs[static_cast<std::size_t>(k + 1) * nf + fn_idx] -
                       tr.zakai_rhs[static_cast<std::size_t>(k) * nf + fn_idx];
    acc += std::abs(lhs - rhs);
  }
  return acc / static_cast<double>(tr.grid.steps);
}

KalmanResult kalman_reference(const std::vector<double>& dy, double dt, double sigma1, double m0,
                              double p0) {
  double mean = m0, var = p0;
  for (const double dyk : dy) {
    const double s = var * dt * dt + dt;  // innovation variance
    const double gain = var * dt / s;
    mean += gain * (dyk - mean * dt);
    var -= gain * dt * var;
    var += sigma1 * sigma1 * dt;
  }
  return {mean, var};
}

namespace {

constexpr std::uint64_t kSeedEpsFilter = 100;
constexpr std::uint64_t kSeedHomFilter = 200;
constexpr std::uint64_t kSeedBootstrap = 300;

std::size_t fn_index(const std::vector<int>& fns, int fn_id) {
  for (std::size_t j = 0; j < fns.size(); ++j)
    if (fns[j] == fn_id) return j;
  throw ConfigError("requested test function is not registered in the filter options");
}

template <class RunRep>
FilterDistanceResult distance_driver(const TimeGrid& grid, int reps, const SeedSpec& seed,
                                     int threads, RunRep&& run_rep) {
  std::vector<double> a(static_cast<std::size_t>(reps), 0.0);
  std::vector<double> b(static_cast<std::size_t>(reps), 0.0);
  // 0 = ok, 1 = divergence abort, 2 = degeneracy abort
  std::vector<std::uint8_t> tag(static_cast<std::size_t>(reps), 0);
  parallel_for(reps, threads, [&](std::int64_t r) {
    const auto ru = static_cast<std::size_t>(r);
    try {
      run_rep(seed.child(static_cast<std::uint64_t>(r)), a[ru], b[ru]);
    } catch (const DivergenceError&) {
      tag[ru] = 1;
    } catch (const FilterDegeneracyError&) {
      tag[ru] = 2;
    }
  });
  FilterDistanceResult res;
  std::vector<double> d;
  for (std::size_t r = 0; r < tag.size(); ++r) {
    if (tag[r] == 1) { ++res.aborts_divergence; continue; }
    if (tag[r] == 2) { ++res.aborts_degeneracy; continue; }
    res.eps_samples.push_back(a[r]);
    res.hom_samples.push_back(b[r]);
    d.push_back(std::abs(a[r] - b[r]));
  }
  if (d.empty()) throw ConfigError("distance experiment: all replications aborted");
  res.dist = mean_se(d);
  res.mean_eps = mean_se(res.eps_samples);
  res.mean_hom = mean_se(res.hom_samples);
  res.ks = ks_statistic(res.eps_samples, res.hom_samples);
  res.ks_se = ks_bootstrap_se(res.eps_samples, res.hom_samples, 200, seed.child(kSeedBootstrap));
  (void)grid;
  return res;
}

}  // namespace

FilterDistanceResult filter_l1_distance(const ModelSpec& m, const SensorObservationModel& obs,
                                        double eps, const TimeGrid& grid, int np, int reps,
                                        int fn_id, const DriftFn& bbar, const SeedSpec& seed,
                                        int threads) {
  return distance_driver(grid, reps, seed, threads,
                         [&](const SeedSpec& rs, double& out_eps, double& out_hom) {
    NoiseBundle nb = make_noise_bundle(grid, rs, m.r1, m.m1, m.r2 / eps, m.m2);
    std::vector<double> xp, zp;
    simulate_slow_fast(m, eps, nb, xp, zp);
    const ObservationPath y = simulate_observation_sensor(xp, nb, obs);
    FilterOptions oe;
    oe.n_particles = np;
    oe.mode = FilterMode::Epsilon;
    oe.eps = eps;
    FilterOptions oh;
    oh.n_particles = np;
    oh.mode = FilterMode::Homogenized;
    oh.bbar = bbar;
    const FilterTrace te = particle_filter_sensor(m, obs, y, oe, rs.child(kSeedEpsFilter));
    const FilterTrace th = particle_filter_sensor(m, obs, y, oh, rs.child(kSeedHomFilter));
    const std::size_t fj = fn_index(oe.test_fns, fn_id);
    out_eps = te.pi(grid.steps, fj);
    out_hom = th.pi(grid.steps, fj);
  });
}

FilterDistanceResult weak_filter_distance(const ModelSpec& m, const LevyObservationModel& obs,
                                          double eps, const TimeGrid& grid, int np, int reps,
                                          int fn_id, const DriftFn& bbar, const SeedSpec& seed,
                                          int threads) {
  return distance_driver(grid, reps, seed, threads,
                         [&](const SeedSpec& rs, double& out_eps, double& out_hom) {
    NoiseBundle nb = make_noise_bundle(grid, rs, m.r1, m.m1, m.r2 / eps, m.m2);
    std::vector<double> xp, zp;
    simulate_slow_fast(m, eps, nb, xp, zp);
    const ObservationPath y = simulate_observation_levy(xp, nb, obs, rs);
    FilterOptions oe;
    oe.n_particles = np;
    oe.mode = FilterMode::Epsilon;
    oe.eps = eps;
    FilterOptions oh;
    oh.n_particles = np;
    oh.mode = FilterMode::Homogenized;
    oh.bbar = bbar;
    const FilterTrace te = particle_filter_levy(m, obs, y, oe, rs.child(kSeedEpsFilter));
    const FilterTrace th = particle_filter_levy(m, obs, y, oh, rs.child(kSeedHomFilter));
    const std::size_t fj = fn_index(oe.test_fns, fn_id);
    out_eps = te.pi(grid.steps, fj);
    out_hom = th.pi(grid.steps, fj);
  });
}

MeanSE inverse_moment_check(const ModelSpec& m, const SensorObservationModel& obs, double eps,
                            const TimeGrid& grid, int p, int np, int reps, const DriftFn& bbar,
                            const SeedSpec& seed, int threads) {
  if (p < 1) throw ConfigError("inverse_moment_check: p must be >= 1");
  std::vector<double> vals(static_cast<std::size_t>(reps), 0.0);
  std::vector<std::uint8_t> ok(static_cast<std::size_t>(reps), 0);
  parallel_for(reps, threads, [&](std::int64_t r) {
    const auto ru = static_cast<std::size_t>(r);
    const SeedSpec rs = seed.child(static_cast<std::uint64_t>(r));
    try {
      NoiseBundle nb = make_noise_bundle(grid, rs, m.r1, m.m1, m.r2 / eps, m.m2);
      std::vector<double> xp, zp;
      simulate_slow_fast(m, eps, nb, xp, zp);
      const ObservationPath y = simulate_observation_sensor(xp, nb, obs);
      FilterOptions oh;
      oh.n_particles = np;
      oh.mode = FilterMode::Homogenized;
      oh.bbar = bbar;
      const FilterTrace th = particle_filter_sensor(m, obs, y, oh, rs.child(kSeedHomFilter));
      vals[ru] = std::exp(-static_cast<double>(p) * th.final_ensemble.log_mass);
      ok[ru] = 1;
    } catch (const DivergenceError&) {
    } catch (const FilterDegeneracyError&) {
    }
  });
  std::vector<double> kept;
  for (std::size_t r = 0; r < ok.size(); ++r)
    if (ok[r]) kept.push_back(vals[r]);
  if (kept.empty()) throw ConfigError("inverse_moment_check: all replications aborted");
  return mean_se(kept);
}

}  // namespace msf
