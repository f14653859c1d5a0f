#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace abstain::rng {

// Algorithm identifier echoed in output metadata so other implementations
// can reproduce splits and samples exactly.
inline constexpr const char* kAlgorithm = "splitmix64";

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

inline std::uint64_t mix64(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xBF58476D1CE4E5B9ULL;
  x ^= x >> 27;
  x *= 0x94D049BB133111EBULL;
  x ^= x >> 31;
  return x;
}

// splitmix64: state advances by a fixed gamma, output is a bijective mix of
// the state. Equivalent to output(i) = mix64(seed + (i+1)*gamma), so the
// stream is counter-based and trivially portable.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform in {0, ..., bound-1}, unbiased via rejection sampling.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(
                    next_below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  // Box-Muller; consumes two uniforms per draw, no state beyond the stream.
  double next_normal(double mean = 0.0, double sigma = 1.0) {
    double u1;
    do {
      u1 = next_double();
    } while (u1 <= 0.0);
    const double u2 = next_double();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    return mean + sigma * radius * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

// Independent stream keyed by (seed, index); used for per-instance sampling
// so parallel generation stays deterministic.
inline SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
  return SplitMix64(mix64(seed ^ ((index + 1) * kGoldenGamma)));
}

// Fisher-Yates over indices 0..n-1.
inline std::vector<std::size_t> shuffled_indices(std::size_t n,
                                                 SplitMix64& gen) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(gen.next_below(i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace abstain::rng
