#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace nibbler {

/// Derive an independent sub-seed from a master seed, a role name and an index.
///
/// The name is folded with 64-bit FNV-1a, combined with the master seed and the
/// index, and finished with two rounds of the splitmix64 mixer:
///
///   h = fnv1a64(role)
///   s = splitmix64(master ^ h)
///   s = splitmix64(s ^ (index * 0x9E3779B97F4A7C15))
///
/// The result is stable across platforms and compilers.
std::uint64_t derive_seed(std::uint64_t master, std::string_view role, std::uint64_t index = 0);

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(std::string_view text);

/// A seeded random stream. The engine is std::mt19937_64, whose output sequence
/// is fixed by the standard; the distribution helpers below are written out by
/// hand so that draws are identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t bound);

  /// Uniform integer in [lo, hi] inclusive.
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// k distinct indices from [0, n), in draw order.
  std::vector<std::uint32_t> sample_distinct(std::uint32_t n, std::uint32_t k);

  std::string save_state() const;
  void load_state(const std::string& state);

  bool operator==(const Rng& other) const { return engine_ == other.engine_; }

 private:
  std::mt19937_64 engine_;
};

}  // namespace nibbler
