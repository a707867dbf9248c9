// Portable draws on top of mt19937_64. The standard distributions are
// implementation defined; these are not, so seeded outputs match across
// standard libraries.
#ifndef GEOLM_SRC_RANDOM_HPP_
#define GEOLM_SRC_RANDOM_HPP_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

namespace geolm::rnd {

using Engine = std::mt19937_64;

/// Uniform integer in [0, n), n > 0, by rejection.
inline std::uint64_t index(Engine& rng, std::uint64_t n) {
  const std::uint64_t limit = Engine::max() - (Engine::max() % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

/// Uniform double in [0, 1) with 53 random bits.
inline double unit(Engine& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

inline double uniform(Engine& rng, double lo, double hi) { return lo + (hi - lo) * unit(rng); }

/// Standard normal via Box-Muller (one draw per call).
inline double normal(Engine& rng) {
  double u1;
  do {
    u1 = unit(rng);
  } while (u1 <= 0.0);
  const double u2 = unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

template <typename T>
void shuffle(std::vector<T>& items, Engine& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = index(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

/// Sampling proportional to nonnegative integer weights via a cumulative
/// table; at least one weight must be positive.
class WeightedIndex {
 public:
  explicit WeightedIndex(std::span<const std::uint64_t> weights) {
    cumulative_.reserve(weights.size());
    std::uint64_t total = 0;
    for (std::uint64_t w : weights) cumulative_.push_back(total += w);
  }
  std::uint64_t total() const { return cumulative_.empty() ? 0 : cumulative_.back(); }
  std::size_t operator()(Engine& rng) const {
    const std::uint64_t r = index(rng, total());
    std::size_t lo = 0, hi = cumulative_.size();
    while (lo < hi) {
      const std::size_t mid = (lo + hi) / 2;
      if (cumulative_[mid] > r) hi = mid; else lo = mid + 1;
    }
    return lo;
  }

 private:
  std::vector<std::uint64_t> cumulative_;
};

}  // namespace geolm::rnd

#endif  // GEOLM_SRC_RANDOM_HPP_
