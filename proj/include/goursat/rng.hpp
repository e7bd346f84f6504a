#pragma once

#include <cstdint>
#include <random>

namespace goursat {

std::uint64_t splitmix64(std::uint64_t& state);

// Seeded 64-bit generator. Draws are platform independent (no std distributions).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  Rng split(std::uint64_t stream) const;

  double uniform();  // [0, 1)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int uniform_int(int lo, int hi);  // inclusive

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace goursat
