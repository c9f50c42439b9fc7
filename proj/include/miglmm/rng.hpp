#pragma once

#include <cstdint>
#include <random>

namespace miglmm {

/// One step of the splitmix64 sequence; advances state.
std::uint64_t splitmix64(std::uint64_t& state);

/// 64-bit Mersenne twister whose seed is derived from (seed, stream) by
/// splitmix64, so distinct streams under one seed are independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  /// A generator for a child stream of this generator's (seed, stream).
  Rng split(std::uint64_t child) const;

  double normal() { return normal_(engine_); }
  double uniform() { return uniform_(engine_); }
  std::mt19937_64& engine() { return engine_; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream() const { return stream_; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
  std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

}  // namespace miglmm
