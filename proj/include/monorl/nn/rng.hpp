#ifndef MONORL_NN_RNG_HPP_
#define MONORL_NN_RNG_HPP_

#include <array>
#include <cstdint>
#include <string_view>

namespace monorl {

// Deterministic PRNG: xoshiro256** seeded through SplitMix64.
//
// The generator and every derived quantity (uniform doubles, normals via
// Box-Muller, bounded integers) are implemented here rather than through
// <random> distributions so that a seed produces the same stream with any
// standard library.
//
// Child streams: child_seed = mix(parent_seed, fnv1a64(purpose), index), see
// Rng::DeriveSeed. Training code derives one child per purpose ("env",
// "init", "explore", "shuffle", ...) from the run seed.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  static uint64_t DeriveSeed(uint64_t parent_seed, std::string_view purpose,
                             uint64_t index);

  Rng Child(std::string_view purpose, uint64_t index = 0) const {
    return Rng(DeriveSeed(seed_, purpose, index));
  }

  uint64_t seed() const { return seed_; }

  uint64_t NextU64();
  // Uniform in [0, 1) with 53 random bits.
  double Uniform();
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  // Standard normal (Box-Muller, second variate cached).
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }
  // Uniform integer in [0, n). n must be > 0.
  uint64_t Below(uint64_t n);

 private:
  uint64_t seed_;
  std::array<uint64_t, 4> s_{};
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

uint64_t SplitMix64(uint64_t x);
uint64_t Fnv1a64(std::string_view text);

}  // namespace monorl

#endif  // MONORL_NN_RNG_HPP_
