#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace dropfam {

namespace detail {
inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

inline constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// SplitMix64 stream. Only ever built from a SplitSeed so that every
// consumer owns an independent, reproducible sequence.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t key) noexcept : state_(key) {}

  std::uint64_t next_u64() noexcept {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double uniform_open() noexcept {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one normal per call so the stream position stays predictable.
  double normal() noexcept {
    const double u1 = uniform_open();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double sd) noexcept { return mean + sd * normal(); }

  // Uniform integer in [0, n), n > 0, by rejection.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t state_;
};

// A base seed plus a derivation path. Streams for distinct paths are
// decorrelated through repeated 64-bit mixing; equal (base, path) pairs
// always give bitwise-identical streams.
class SplitSeed {
 public:
  SplitSeed() = default;
  explicit SplitSeed(std::uint64_t base) : base_(base) {}
  SplitSeed(std::uint64_t base, std::vector<std::uint64_t> path)
      : base_(base), path_(std::move(path)) {}

  SplitSeed child(std::uint64_t index) const {
    SplitSeed s = *this;
    s.path_.push_back(index);
    return s;
  }

  std::uint64_t base() const noexcept { return base_; }
  const std::vector<std::uint64_t>& path() const noexcept { return path_; }

  std::uint64_t key() const noexcept {
    std::uint64_t k = detail::mix64(base_ ^ detail::kGolden);
    for (std::uint64_t idx : path_) k = detail::mix64(k + detail::mix64(idx + 0x632BE59BD9B4E019ULL));
    return k;
  }

  RandomStream stream() const noexcept { return RandomStream(key()); }

  friend bool operator==(const SplitSeed&, const SplitSeed&) = default;

 private:
  std::uint64_t base_ = 0;
  std::vector<std::uint64_t> path_;
};

}  // namespace dropfam
