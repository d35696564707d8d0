#pragma once
// Counter-based splittable PRNG. Streams are identified by (master seed, path of
// stream components); the whole tree is stateless apart from a per-stream counter,
// so parallel replications never share state and any draw is reproducible from
// its coordinates alone.
#include <cstdint>
#include <cmath>
#include <vector>

namespace msf {

// splitmix64 finalizer
inline constexpr std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ull;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBull;
  x ^= x >> 31;
  return x;
}

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ull;

// Identifies one stream in the seed tree.
struct SeedSpec {
  std::uint64_t master = 0;
  std::vector<std::uint64_t> path;

  SeedSpec() = default;
  explicit SeedSpec(std::uint64_t m) : master(m) {}
  SeedSpec(std::uint64_t m, std::initializer_list<std::uint64_t> p) : master(m), path(p) {}

  SeedSpec child(std::uint64_t component) const {
    SeedSpec s = *this;
    s.path.push_back(component);
    return s;
  }

  // Fold master + path into a 64-bit stream key.
  std::uint64_t key() const {
    std::uint64_t k = mix64(master + 0x6A09E667F3BCC909ull);
    for (std::uint64_t c : path) k = mix64((k ^ mix64(c + kGolden)) + kGolden);
    return k;
  }
};

// One stream: out(i) = mix64(key + i*gamma), gamma odd and stream-specific
// (SplittableRandom-style), which kills linear aliasing between streams.
class Rng {
 public:
  explicit Rng(const SeedSpec& spec) {
    key_ = spec.key();
    gamma_ = mix64(key_ ^ 0x8000000000000001ull) | 1ull;
    // keep gammas "irregular enough" (same conditioning as JDK SplittableRandom)
    if (__builtin_popcountll(gamma_ ^ (gamma_ >> 1)) < 24) gamma_ ^= 0xAAAAAAAAAAAAAAAAull;
  }

  std::uint64_t next_u64() { return mix64(key_ + (++ctr_) * gamma_); }

  void skip(std::uint64_t n) { ctr_ += n; }
  std::uint64_t counter() const { return ctr_; }

  // uniform on open (0,1); never returns an exact 0 or 1
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53 + 0x1.0p-54;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // standard normal via inverse CDF (Acklam's rational approximation, ~1.2e-9
  // relative error; one uniform per normal keeps stream consumption fixed)
  double normal() { return norm_inv(uniform()); }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  // small-mean Poisson by Knuth product (used per particle-step, mean << 1)
  int poisson(double mean) {
    if (mean <= 0.0) return 0;
    const double lim = std::exp(-mean);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= uniform();
    } while (p > lim);
    return k - 1;
  }

  static double norm_inv(double p);

 private:
  std::uint64_t key_ = 0;
  std::uint64_t gamma_ = kGolden;
  std::uint64_t ctr_ = 0;
};

}  // namespace msf
