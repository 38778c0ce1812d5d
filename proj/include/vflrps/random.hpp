// Copyright 2026 The vflrps Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Portable deterministic randomness.
//
// Every random quantity in the engine (mask matrices, private mask vectors,
// shuffles, synthetic data) is drawn from SplitMix64 so that two
// implementations given the same seed produce bit-identical streams:
//
//   state_k  = seed + k * 0x9E3779B97F4A7C15           (mod 2^64, k = 1, 2, ...)
//   out_k    = mix64(state_k)
//   mix64(z) = z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//              z ^= z >> 27; z *= 0x94D049BB133111EB;
//              z ^ (z >> 31)
//   unit(u)  = (u >> 11) * 2^-53                          in [0, 1)
//   pm1(u)   = (u >> 11) * 2^-52 - 1                      in [-1, 1)

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <string_view>

namespace vflrps {

inline constexpr std::uint64_t kGoldenGamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// u >> 11 fits in 53 bits, so the signed conversion is exact and cheaper.
constexpr double to_unit(std::uint64_t u) noexcept {
  return static_cast<double>(static_cast<std::int64_t>(u >> 11)) * 0x1.0p-53;
}

constexpr double to_pm1(std::uint64_t u) noexcept {
  return static_cast<double>(static_cast<std::int64_t>(u >> 11)) * 0x1.0p-52 - 1.0;
}

// Order-sensitive combination of seed material into one 64-bit seed.
constexpr std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) noexcept {
  std::uint64_t h = 0x6A09E667F3BCC909ULL;
  for (std::uint64_t p : parts) h = mix64(h ^ mix64(p + kGoldenGamma));
  return h;
}

// FNV-1a 64-bit hash of a byte string.
constexpr std::uint64_t hash_string(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit constexpr SplitMix64(std::uint64_t seed) noexcept : state_(seed) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return ~result_type{0}; }

  constexpr result_type operator()() noexcept {
    state_ += kGoldenGamma;
    return mix64(state_);
  }

  // Value the stream would produce at position k (1-based) without advancing.
  static constexpr result_type at(std::uint64_t seed, std::uint64_t k) noexcept {
    return mix64(seed + k * kGoldenGamma);
  }

  double uniform() noexcept { return to_unit((*this)()); }
  double uniform_pm1() noexcept { return to_pm1((*this)()); }

  // Uniform integer in [0, bound) by multiply-shift; bound > 0.
  std::uint64_t below(std::uint64_t bound) noexcept {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>((*this)()) * bound) >> 64);
  }

  // Standard normal via Box-Muller (one draw per call, the sine branch is discarded).
  double normal() noexcept {
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::uint64_t state_;
};

}  // namespace vflrps
