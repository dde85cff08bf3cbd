#pragma once

#include <array>
#include <cstdint>

namespace cresmd {

// xoshiro256** (Blackman & Vigna) seeded through splitmix64. Pure integer
// arithmetic, so identical seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform on the open interval (0, 1).
  double uniform_open();
  // Uniform integer in [0, bound), bound > 0, without modulo bias.
  std::uint64_t uniform_int(std::uint64_t bound);
  // Standard normal via the Marsaglia polar method.
  double normal();

  // Seed for an independent child stream; advances this generator.
  std::uint64_t fork_seed() { return next_u64(); }

 private:
  std::array<std::uint64_t, 4> state_{};
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// splitmix64 finalizer; also used to derive stable seeds from keys.
std::uint64_t mix64(std::uint64_t x);

}  // namespace cresmd
