#pragma once

#include <cstddef>
#include <cstdint>

namespace seqembed {

// SplitMix64 finalizer. Used as a stateless mixing function so that every
// draw is a pure function of (key, counter) and identical on all platforms.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Counter-based generator: the n-th output depends only on the key and n.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}
  constexpr CounterRng(std::uint64_t key, std::uint64_t stream) noexcept
      : key_(mix64(mix64(key) ^ mix64(stream ^ 0xD1B54A32D192ED03ULL))) {}

  constexpr std::uint64_t next() noexcept {
    return mix64(key_ ^ mix64(counter_++));
  }

  // Uniform double in [0, 1) with 53 bits of precision.
  constexpr double uniform() noexcept {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  constexpr double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  // Unbiased integer in [0, bound); bound must be positive. Draws below
  // 2^64 mod bound are rejected so every residue is equally likely.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = next();
      if (x >= threshold) return x % bound;
    }
  }

  constexpr std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace seqembed
