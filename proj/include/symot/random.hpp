#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace symot {

// Deterministic random source. Wraps std::mt19937_64, whose output sequence
// is fixed by the standard, and converts to doubles and normals by hand so
// results do not depend on the standard library's distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

  // Uniform index in [0, n).
  std::size_t index(std::size_t n);

  // Fisher-Yates shuffle of 0..n-1.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Derives an independent stream seed for `purpose` from a top-level seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose);

}  // namespace symot
