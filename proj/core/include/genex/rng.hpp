#pragma once

#include <cstdint>
#include <random>

namespace genex {

/// SplitMix64 finalizer folded over (seed, value). Used to derive independent
/// streams from a master seed and stable identifiers (bucket id, instance id).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value);

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a) { return mix_seed(seed, a); }
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix_seed(mix_seed(seed, a), b);
}

/// Seeded random stream. Thin wrapper so every component draws the same way.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform_(engine_); }
  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound);

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace genex
