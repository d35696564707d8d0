#include "msfilter/noise.hpp"

#include <cstring>

namespace msf {

BrownianPath sample_brownian(const TimeGrid& grid, const SeedSpec& seed) {
  Rng rng(seed);
  BrownianPath p;
  p.grid = grid;
  p.dw.resize(static_cast<std::size_t>(grid.steps));
  const double sdt = std::sqrt(grid.dt());
  for (auto& x : p.dw) x = sdt * rng.normal();
  return p;
}

JumpStream sample_jump_stream(const TimeGrid& grid, double rate, const MarkDist& marks,
                              const SeedSpec& seed) {
  JumpStream s;
  s.grid = grid;
  s.rate = rate;
  s.marks = marks;
  if (rate > 0.0) {
    Rng rng(seed);
    double t = 0.0;
    while (true) {
      t += rng.exponential(rate);
      if (t > grid.horizon) break;
      s.events.push_back({t, marks.sample(rng)});
    }
  }
  s.build_cell_index();
  return s;
}

double compensated_integral(const JumpStream& stream,
                            const std::function<double(double, double)>& g) {
  double acc = 0.0;
  for (const auto& e : stream.events) acc += g(e.time, e.mark);
  // compensator: trapezoid in t of rate * E_mark[g(t, .)]
  const Quadrature rule = stream.marks.expectation_rule();
  const auto mean_at = [&](double t) {
    double m = 0.0;
    for (std::size_t i = 0; i < rule.nodes.size(); ++i) m += rule.weights[i] * g(t, rule.nodes[i]);
    return m;
  };
  const double dt = stream.grid.dt();
  double comp = 0.0;
  double prev = mean_at(0.0);
  for (std::int64_t k = 1; k <= stream.grid.steps; ++k) {
    const double cur = mean_at(stream.grid.t(k));
    comp += 0.5 * (prev + cur) * dt;
    prev = cur;
  }
  return acc - stream.rate * comp;
}

NoiseBundle make_noise_bundle(const TimeGrid& grid, const SeedSpec& rep_seed, double r1,
                              const MarkDist& m1, double r2_over_eps, const MarkDist& m2) {
  NoiseBundle nb;
  nb.grid = grid;
  nb.dv = sample_brownian(grid, rep_seed.child(NoiseBundle::V)).dw;
  nb.dw = sample_brownian(grid, rep_seed.child(NoiseBundle::W)).dw;
  nb.db = sample_brownian(grid, rep_seed.child(NoiseBundle::B)).dw;
  nb.j1 = sample_jump_stream(grid, r1, m1, rep_seed.child(NoiseBundle::J1));
  nb.j2 = sample_jump_stream(grid, r2_over_eps, m2, rep_seed.child(NoiseBundle::J2));
  Rng rx(rep_seed.child(NoiseBundle::X0));
  nb.xi0 = rx.normal();
  nb.z_xi0 = rx.normal();
  return nb;
}

std::uint64_t noise_checksum(const NoiseBundle& nb) {
  std::uint64_t h = 0x12345678ABCDEF01ull;
  auto fold = [&h](double x) {
    std::uint64_t b;
    std::memcpy(&b, &x, sizeof(b));
    h = mix64(h ^ b);
  };
  for (double x : nb.dv) fold(x);
  for (const auto& e : nb.j1.events) {
    fold(e.time);
    fold(e.mark);
  }
  return h;
}

}  // namespace msf
