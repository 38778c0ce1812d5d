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

#include "vflrps/numerics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "vflrps/error.hpp"

namespace vflrps {
namespace {

void require_finite(std::span<const double> x, const char* what) {
  for (double v : x) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, std::string(what) + " contains a non-finite value");
  }
}

void require_pair(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) {
    throw Error(ErrorCode::kInvalidInput, "length mismatch: " + std::to_string(x.size()) + " vs " +
                                              std::to_string(y.size()));
  }
  if (x.size() < 2) throw Error(ErrorCode::kInvalidInput, "correlation needs at least 2 samples");
}

Correlation correlate_standardized(std::span<const double> x, std::span<const double> y) {
  if (is_constant(x) || is_constant(y)) return {0.0, true};
  StandardizedRanks sx = standardize_population(x);
  StandardizedRanks sy = standardize_population(y);
  double rho = dot(sx.values(), sy.values()) / static_cast<double>(x.size());
  return {rho, false};
}

}  // namespace

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double std_pop(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double m = mean(x);
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(x.size()));
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

bool is_constant(std::span<const double> x) {
  return std::adjacent_find(x.begin(), x.end(), std::not_equal_to<>()) == x.end();
}

std::vector<double> rank_average_ties(std::span<const double> x) {
  require_finite(x, "rank input");
  const std::size_t n = x.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && x[order[j]] == x[order[i]]) ++j;
    // positions i..j-1 hold ranks i+1..j
    const double avg = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = avg;
    i = j;
  }
  return ranks;
}

StandardizedRanks standardize_population(std::span<const double> x) {
  require_finite(x, "standardize input");
  if (x.size() < 2) throw Error(ErrorCode::kInvalidInput, "standardization needs at least 2 samples");
  if (is_constant(x)) throw Error(ErrorCode::kConstantFeature, "zero variance");

  const double m = mean(x);
  const double sd = std_pop(x);
  if (!(sd > 0.0)) throw Error(ErrorCode::kConstantFeature, "zero variance");

  StandardizedRanks out;
  out.values_.resize(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.values_[i] = (x[i] - m) / sd;
  return out;
}

Correlation spearman_plain(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y);
  const std::vector<double> rx = rank_average_ties(x);
  const std::vector<double> ry = rank_average_ties(y);
  return correlate_standardized(rx, ry);
}

Correlation pearson_plain(std::span<const double> x, std::span<const double> y) {
  require_pair(x, y);
  require_finite(x, "pearson input");
  require_finite(y, "pearson input");
  return correlate_standardized(x, y);
}

MetricReport compute_metrics(std::span<const double> predictions, std::span<const double> targets,
                             Task task) {
  if (predictions.size() != targets.size() || targets.empty()) {
    throw Error(ErrorCode::kInvalidInput, "metrics need equal, non-empty prediction and target vectors");
  }
  require_finite(predictions, "predictions");
  require_finite(targets, "targets");

  MetricReport report;
  report.task = task;
  const double n = static_cast<double>(targets.size());
  const double target_mean = mean(targets);
  double ss_res = 0.0;
  double ss_tot = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    ss_res += (predictions[i] - targets[i]) * (predictions[i] - targets[i]);
    ss_tot += (targets[i] - target_mean) * (targets[i] - target_mean);
  }
  report.mse = ss_res / n;
  report.rmse = std::sqrt(report.mse);
  if (ss_tot > 0.0) {
    report.r2 = 1.0 - ss_res / ss_tot;
  } else {
    report.r2 = std::numeric_limits<double>::quiet_NaN();
    report.r2_defined = false;
  }

  if (task == Task::kClassification) {
    std::size_t tp = 0, fp = 0, fn = 0, correct = 0;
    for (std::size_t i = 0; i < targets.size(); ++i) {
      const bool predicted = predictions[i] >= 0.5;
      const bool actual = targets[i] >= 0.5;
      if (predicted == actual) ++correct;
      if (predicted && actual) ++tp;
      if (predicted && !actual) ++fp;
      if (!predicted && actual) ++fn;
    }
    report.accuracy = static_cast<double>(correct) / n;
    const std::size_t denom = 2 * tp + fp + fn;
    report.f1 = denom == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }
  return report;
}

}  // namespace vflrps
