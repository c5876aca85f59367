#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>

namespace semcom {

/// Seeded generator whose draw sequence depends only on the seed.
///
/// The engine is std::mt19937_64 (fully specified by the standard); the
/// uniform and normal transforms are done here rather than through
/// <random> distributions, whose output is implementation-defined.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller; draws are produced in pairs.
  double normal();

  /// Uniform integer in [0, bound). `bound` must be positive.
  std::size_t below(std::size_t bound);

 private:
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

}  // namespace semcom
