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

// Generators for property tests. No property-testing library is available,
// so cases come from a seeded SplitMix64 and every failure message carries
// the case seed for replay.

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vflrps/random.hpp"

namespace vflrps::testing {

class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed), seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t size(std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng_.below(hi - lo + 1)); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * rng_.uniform(); }
  double normal() { return rng_.normal(); }
  bool coin(double p = 0.5) { return rng_.uniform() < p; }

  // Finite values with a fair share of ties: some cases draw from a small
  // integer alphabet, others are continuous with a few repeated entries.
  std::vector<double> vector_with_ties(std::size_t n) {
    std::vector<double> v(n);
    const int mode = static_cast<int>(rng_.below(3));
    if (mode == 0) {
      const std::size_t alphabet = size(2, 6);
      for (double& x : v) x = static_cast<double>(rng_.below(alphabet));
    } else {
      const double scale = std::pow(10.0, uniform(-3.0, 3.0));
      for (double& x : v) x = scale * normal();
      if (mode == 2) {
        for (std::size_t k = 0; k < n / 4; ++k) v[rng_.below(n)] = v[rng_.below(n)];
      }
    }
    return v;
  }

  // Correlated with x: a mix of x, noise and a monotone warp.
  std::vector<double> related(const std::vector<double>& x) {
    const double w = uniform(-1.0, 1.0);
    std::vector<double> y(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) y[i] = w * x[i] + (1.0 - std::abs(w)) * normal();
    return y;
  }

  std::vector<double> normals(std::size_t n) {
    std::vector<double> v(n);
    for (double& x : v) x = normal();
    return v;
  }

 private:
  SplitMix64 rng_;
  std::uint64_t seed_;
};

inline std::string case_label(std::uint64_t seed) { return "case seed " + std::to_string(seed); }

}  // namespace vflrps::testing
