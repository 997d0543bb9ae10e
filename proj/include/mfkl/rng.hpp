#ifndef MFKL_RNG_HPP
#define MFKL_RNG_HPP

// Counter-based random streams.
//
// Generator: SplitMix64 run in counter mode. Draw c of a stream with seed s is
//   mix64(mix64(s) + 0x9E3779B97F4A7C15 * (c + 1))
// where mix64 is the SplitMix64 finalizer. Uniforms take the top 53 bits.
// Gaussians use the Box-Muller transform on consecutive uniform pairs
// (u1 in (0,1], u2 in [0,1)); the cosine variate is returned first and the
// sine variate is cached for the next call.
//
// Replica and sub-stream seeds come from derive_seed(master, index), so the
// stream of replica k never depends on how replicas are scheduled.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>

namespace mfkl {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Seed of the index-th child stream of `master`.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) noexcept {
  return mix64(mix64(master) ^ mix64(index + kGolden));
}

class RngStream {
 public:
  explicit RngStream(std::uint64_t seed = 0) noexcept : seed_(seed), key_(mix64(seed)) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  std::uint64_t next_u64() noexcept { return mix64(key_ + kGolden * (++counter_)); }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform on (0, 1].
  double uniform_open_zero() noexcept {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  double gaussian() noexcept {
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    const double u1 = uniform_open_zero();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    cached_ = radius * std::sin(angle);
    has_cached_ = true;
    return radius * std::cos(angle);
  }

  void fill_gaussian(std::span<double> out) noexcept {
    for (double& g : out) g = gaussian();
  }

  friend bool operator==(const RngStream&, const RngStream&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

}  // namespace mfkl

#endif  // MFKL_RNG_HPP
