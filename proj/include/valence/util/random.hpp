#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace valence {

/// SplitMix64 finalizer applied to (seed, stream). Used to derive independent
/// child seeds, e.g. one per bootstrap replicate or per pipeline stage.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) noexcept;

/// Child seed keyed by a name (stage names, purposes).
std::uint64_t mix_seed(std::uint64_t seed, std::string_view name) noexcept;

/// Seeded generator with platform-stable helpers. std::mt19937_64 output is
/// fixed by the standard; the standard distributions are not, so bounded
/// draws and shuffles are implemented here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). `bound` must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

  /// Indices 0..n-1 in a uniformly random order.
  std::vector<std::size_t> permutation(std::size_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace valence
