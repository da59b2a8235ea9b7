#pragma once

#include <cstdint>
#include <random>

namespace polyadapt {

/// Deterministic uniform RNG used everywhere seeds appear in the toolkit.
///
/// The seed-to-sample mapping is fixed: a std::mt19937_64 stream (whose output
/// is fully specified by the standard) mapped to doubles via the top 53 bits,
/// offset by half an ulp so samples lie strictly inside (0, 1). Identical
/// seeds therefore give bit-identical sequences on any conforming platform.
class UniformRng {
 public:
  explicit UniformRng(std::uint64_t seed) : gen_(seed) {}

  /// Uniform double strictly inside (0, 1).
  double next() {
    const std::uint64_t bits = gen_() >> 11;  // 53 bits
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
  }

  double in_range(double lo, double hi) { return lo + (hi - lo) * next(); }

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform integer in [0, n). Modulo bias is irrelevant at our scales.
  std::uint64_t below(std::uint64_t n) { return gen_() % n; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace polyadapt
