#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace convsynth {

// Derives an independent sub-seed for a named stream and counter, so every
// sampling step can be replayed from a single master seed.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream, std::uint64_t counter = 0);

// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

// Thin wrapper over mt19937_64 with distribution code written out here, so
// draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n); n must be positive.
  std::size_t index(std::size_t n);
  double exponential(double mean);
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace convsynth
