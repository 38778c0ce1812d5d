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

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace vflrps {

// Rank-transformed and standardized values: mean 0, population std 1.
class StandardizedRanks {
 public:
  StandardizedRanks() = default;

  // No invariant checks; used to replay fixed vectors through the protocol.
  static StandardizedRanks unchecked(std::vector<double> values) {
    StandardizedRanks out;
    out.values_ = std::move(values);
    return out;
  }

  std::span<const double> values() const noexcept { return values_; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  friend StandardizedRanks standardize_population(std::span<const double> x);
  std::vector<double> values_;
};

// A correlation coefficient plus the flag raised when either input was
// constant (rho is then exactly 0).
struct Correlation {
  double rho = 0.0;
  bool constant_feature = false;

  friend bool operator==(const Correlation&, const Correlation&) = default;
};

enum class Task { kRegression, kClassification };

struct MetricReport {
  Task task = Task::kRegression;
  double mse = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
  bool r2_defined = true;  // false when the targets have zero variance; r2 is NaN then
  double accuracy = 0.0;
  double f1 = 0.0;
};

// Average ranks (1-based); ties share the mean of the ranks they span.
// Throws InvalidInput on non-finite entries.
std::vector<double> rank_average_ties(std::span<const double> x);

// Centers and scales by the population standard deviation (divide by n).
// Throws InvalidInput for n < 2 or non-finite input, ConstantFeature for zero variance.
StandardizedRanks standardize_population(std::span<const double> x);

bool is_constant(std::span<const double> x);

// (1/n) * sum of products of standardized ranks.
Correlation spearman_plain(std::span<const double> x, std::span<const double> y);

// (1/n) * sum of products of standardized raw values.
Correlation pearson_plain(std::span<const double> x, std::span<const double> y);

// Classification predictions are probabilities thresholded at 0.5, targets in {0, 1}.
// Both tasks get mse/rmse/r2; classification also gets accuracy and f1.
MetricReport compute_metrics(std::span<const double> predictions, std::span<const double> targets,
                             Task task);

double mean(std::span<const double> x);

// Population standard deviation.
double std_pop(std::span<const double> x);

double dot(std::span<const double> a, std::span<const double> b);

}  // namespace vflrps
