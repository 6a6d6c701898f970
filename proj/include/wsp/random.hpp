#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace wsp {

/// Seeded generator with platform-independent draws. std::mt19937_64's raw
/// sequence is fixed by the standard, but the <random> distributions are not,
/// so the draws are implemented here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform();

  /// Standard normal via Box-Muller.
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t fnv1a64(std::string_view s);

/// Per-stage (or per-key) seed derived from the global seed.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view name);

/// Picks `count` distinct indices from [0, n) uniformly; returned sorted.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count, std::uint64_t seed);

}  // namespace wsp
