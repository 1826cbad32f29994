#pragma once

#include <cstdint>
#include <string_view>

namespace ppo {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over a short tag, used to name independent seed streams.
constexpr std::uint64_t tag_hash(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Derive a child seed from (base, stream tag, index). Distinct tags or
/// indices give statistically independent streams.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view tag,
                                    std::uint64_t index = 0) noexcept {
  return mix64(mix64(base ^ tag_hash(tag)) + 0x9e3779b97f4a7c15ULL * (index + 1));
}

/// Counter-based generator: the i-th draw is a pure function of (key, i), so
/// any element of a stream can be produced independently of the others.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t key) noexcept : key_(mix64(key)) {}

  constexpr std::uint64_t at(std::uint64_t index) const noexcept {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * (index + 1));
  }

  constexpr std::uint64_t next() noexcept { return at(counter_++); }

  /// Uniform double in [0, 1) with 53 random bits.
  static constexpr double to_unit(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
  }

  constexpr double uniform() noexcept { return to_unit(next()); }

  constexpr double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  /// Uniform integer in [0, bound) by rejection, bound > 0.
  constexpr std::uint64_t below(std::uint64_t bound) noexcept {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r < limit) return r % bound;
    }
  }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace ppo
