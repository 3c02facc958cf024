#pragma once

#include <cstdint>
#include <random>

namespace abq {

// splitmix64: cheap stateless mixer, used to spread user-facing seeds into
// well-separated engine seeds (and to derive per-stream / per-cell seeds).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// One pseudo-random stream.  Every sampler in the library takes an explicit
// Rng& so that replications are reproducible and streams never alias.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(splitmix64(seed)) {}

  // uniform on [0, 1)
  double uniform() { return unif_(eng_); }

  // standard normal; the wrapped distribution caches its spare draw
  double normal() { return norm_(eng_); }

  std::mt19937_64& engine() { return eng_; }

 private:
  std::mt19937_64 eng_;
  std::uniform_real_distribution<double> unif_{0.0, 1.0};
  std::normal_distribution<double> norm_{0.0, 1.0};
};

// Derive the seed of an auxiliary stream (u / v / patience, or one (n, rep)
// worker cell) from a base seed and a salt.  Pure function of its inputs.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
  return splitmix64(base ^ (0x9e3779b97f4a7c15ULL * (salt + 1)));
}

}  // namespace abq
