#pragma once

// Counter-based random streams.
//
// Every stochastic step in the library (data synthesis, weight init, dropout,
// mini-batch shuffling, fold assignment, permutation draws) pulls from a
// `Stream` keyed by a hash of (seed, purpose, indices...). The n-th draw of a
// stream is a pure function of (key, n), so results never depend on thread
// scheduling or on the standard library's distribution implementations.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <utility>

namespace permsig {

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

// Folds a list of words into one stream key. Order-sensitive.
constexpr std::uint64_t derive_key(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC908ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + kGoldenGamma));
  return h;
}

// FNV-1a, used to turn names into key material.
constexpr std::uint64_t fnv1a64(std::span<const unsigned char> bytes) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001B3ULL;
  }
  return h;
}

class Stream {
 public:
  constexpr explicit Stream(std::uint64_t key) noexcept : key_(key) {}

  constexpr std::uint64_t next_u64() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGoldenGamma);
  }

  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  // Unbiased integer in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    // Lemire's multiply-shift with rejection.
    std::uint64_t x = next_u64();
    __uint128_t m = static_cast<__uint128_t>(x) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        x = next_u64();
        m = static_cast<__uint128_t>(x) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  // Standard normal via Box-Muller; consumes exactly two draws.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  // Fisher-Yates from the back.
  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t draws() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace permsig
