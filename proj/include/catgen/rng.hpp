#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace catgen {

/// Seeded random source shared by every stochastic operation.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the
/// standard. The distributions are implemented here rather than taken from
/// <random> because the standard distributions are implementation-defined,
/// and outputs must be reproducible byte-for-byte given a seed.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 42) : engine_(seed) {}

  /// Derives an independent stream from (seed, stream index).
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform();

  /// Uniform integer in [0, n). Requires n > 0. Unbiased (rejection sampling).
  std::uint64_t below(std::uint64_t n);

  /// Standard normal draw (Box-Muller, caches the second variate).
  double normal();

  /// Index drawn with probability proportional to weights[i].
  std::size_t categorical(const std::vector<double>& weights);

  /// In-place Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace catgen
