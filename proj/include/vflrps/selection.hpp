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
#include <map>
#include <string>
#include <vector>

#include "vflrps/federation.hpp"

namespace vflrps {

// Relevance of one passive feature f:
//   sum_i (1 - |rho(f, x_a,i)|) * |rho(f, y)|   over the d active features.
double feature_score(const CorrelationMatrix& matrix, std::size_t feature);

// Sum of feature_score over the live features of a party.
double score_party(const CorrelationMatrix& matrix, const std::vector<bool>& dead);

struct SelectionRound {
  int round = 0;                    // 1-based
  std::map<int, double> scores;     // every unselected party at the start of the round
  int chosen = 0;
  std::vector<FeatureRef> died;     // features zeroed after the choice
};

struct SelectionConfig {
  std::size_t m = 1;
  Thresholds thresholds;
};

struct SelectionResult {
  std::vector<int> selected;   // first M of ranking
  std::vector<int> ranking;    // all K parties
  std::vector<SelectionRound> rounds;
  std::map<int, double> initial_scores;
  SelectionConfig config;

  friend bool operator==(const SelectionResult& a, const SelectionResult& b) {
    return a.selected == b.selected && a.ranking == b.ranking && a.initial_scores == b.initial_scores;
  }
};

// Greedy forward selection. Each round takes the highest-scoring party
// (ties to the lowest id), then zeroes every remaining feature confirmed
// redundant with one of its features, then rescores. Continues until every
// party is ranked; the first M form the selection. Active-overlap features
// are dead from the start. Throws InvalidConfig unless 1 <= M <= K.
SelectionResult forward_select(const std::vector<CorrelationMatrix>& matrices, const RedundancyReport& report,
                               const SelectionConfig& config);

json to_json(const SelectionResult& result);

// Aligned text table: one row per rank with the score the party held in the
// round it was chosen and the features that died after it.
std::string render_ranking_table(const SelectionResult& result,
                                 const std::map<int, std::vector<std::string>>& feature_names = {});

}  // namespace vflrps
