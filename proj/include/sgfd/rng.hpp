#pragma once

#include <cstdint>
#include <random>

namespace sgfd {

// splitmix64 finalizer: turns structured counters into well-mixed 64-bit
// values. Used only for seed derivation, never as the draw generator.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a,
                                 std::uint64_t b) {
  return splitmix64(splitmix64(splitmix64(seed) ^ a) ^ b);
}

// Counter-based stream derivation: each (experiment seed, replication,
// iteration) triple owns an independent generator. Draws are therefore
// independent across iterations and replications, any iteration can be
// replayed without running its predecessors, and identical seeds reproduce
// bit-identical runs regardless of execution order.
class StreamSeeder {
 public:
  explicit StreamSeeder(std::uint64_t experiment_seed)
      : seed_(experiment_seed) {}

  // Replication indices of real runs count from 0; a few high values are
  // reserved for auxiliary streams so they can never collide with a run.
  static constexpr std::uint64_t kPilotReplication = 0xffffffff00000001ull;
  static constexpr std::uint64_t kConstructionReplication =
      0xffffffff00000002ull;
  static constexpr std::uint64_t kProbeReplication = 0xffffffff00000003ull;

  std::mt19937_64 stream(std::uint64_t replication,
                         std::uint64_t iteration) const {
    return std::mt19937_64(mix_seed(seed_, replication, iteration));
  }

  std::uint64_t experiment_seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

}  // namespace sgfd
