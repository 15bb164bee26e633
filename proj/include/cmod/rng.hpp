#pragma once

#include <cstdint>
#include <random>

namespace cmod {

// Deterministic RNG wrapper. std::mt19937_64 has a standardized sequence;
// the distributions below avoid std::uniform_* whose output is
// implementation-defined, so streams replay identically everywhere.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of entropy.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant for test-scale n.
  uint64_t below(uint64_t n) { return n == 0 ? 0 : engine_() % n; }

  bool coin(double p = 0.5) { return uniform01() < p; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace cmod
