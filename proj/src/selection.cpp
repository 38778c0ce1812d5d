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

#include "vflrps/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>

namespace vflrps {

double feature_score(const CorrelationMatrix& matrix, std::size_t feature) {
  const double relevance = std::abs(matrix.at(matrix.target_row(), feature));
  double sum = 0.0;
  for (std::size_t i = 0; i < matrix.active_features; ++i) sum += (1.0 - std::abs(matrix.at(i, feature))) * relevance;
  return sum;
}

double score_party(const CorrelationMatrix& matrix, const std::vector<bool>& dead) {
  double total = 0.0;
  for (std::size_t j = 0; j < matrix.passive_features; ++j) {
    if (!dead[j]) total += feature_score(matrix, j);
  }
  return total;
}

SelectionResult forward_select(const std::vector<CorrelationMatrix>& matrices_in, const RedundancyReport& report,
                               const SelectionConfig& config) {
  const std::size_t k = matrices_in.size();
  if (config.m < 1 || config.m > k) {
    throw Error(ErrorCode::kInvalidConfig, "M must lie in [1, " + std::to_string(k) + "], got " + std::to_string(config.m));
  }
  std::vector<const CorrelationMatrix*> matrices;
  for (const auto& m : matrices_in) matrices.push_back(&m);
  std::sort(matrices.begin(), matrices.end(),
            [](const CorrelationMatrix* a, const CorrelationMatrix* b) { return a->party_id < b->party_id; });
  for (std::size_t i = 1; i < matrices.size(); ++i) {
    if (matrices[i]->party_id == matrices[i - 1]->party_id) throw Error(ErrorCode::kInvalidConfig, "duplicate party id");
  }

  std::map<int, std::vector<bool>> dead;
  for (const auto* m : matrices) dead[m->party_id].assign(m->passive_features, false);
  for (const auto& f : report.active_overlap) {
    auto it = dead.find(f.party_id);
    if (it != dead.end() && f.feature < it->second.size()) it->second[f.feature] = true;
  }

  // redundant[f] = features in other parties confirmed redundant with f
  std::map<FeatureRef, std::vector<FeatureRef>> redundant;
  for (const auto& p : report.cross_pairs) {
    redundant[p.first].push_back(p.second);
    redundant[p.second].push_back(p.first);
  }

  SelectionResult result;
  result.config = config;
  std::set<int> remaining;
  for (const auto* m : matrices) {
    remaining.insert(m->party_id);
    result.initial_scores[m->party_id] = score_party(*m, dead[m->party_id]);
  }

  int round = 0;
  while (!remaining.empty()) {
    SelectionRound r;
    r.round = ++round;
    int best = -1;
    double best_score = -1.0;
    for (const auto* m : matrices) {
      if (!remaining.count(m->party_id)) continue;
      const double s = score_party(*m, dead[m->party_id]);
      r.scores[m->party_id] = s;
      if (s > best_score) {  // strict: ties keep the lower id
        best = m->party_id;
        best_score = s;
      }
    }
    r.chosen = best;
    remaining.erase(best);
    result.ranking.push_back(best);

    const CorrelationMatrix* chosen = nullptr;
    for (const auto* m : matrices) {
      if (m->party_id == best) chosen = m;
    }
    for (std::size_t j = 0; j < chosen->passive_features; ++j) {
      auto it = redundant.find(FeatureRef{best, j});
      if (it == redundant.end()) continue;
      for (const FeatureRef& other : it->second) {
        if (!remaining.count(other.party_id)) continue;
        auto& flags = dead[other.party_id];
        if (other.feature < flags.size() && !flags[other.feature]) {
          flags[other.feature] = true;
          r.died.push_back(other);
        }
      }
    }
    std::sort(r.died.begin(), r.died.end());
    result.rounds.push_back(std::move(r));
  }
  result.selected.assign(result.ranking.begin(), result.ranking.begin() + static_cast<std::ptrdiff_t>(config.m));
  return result;
}

json to_json(const SelectionResult& result) {
  json rounds = json::array();
  for (const auto& r : result.rounds) {
    json scores = json::object();
    for (const auto& [party, s] : r.scores) scores[std::to_string(party)] = s;
    json died = json::array();
    for (const auto& f : r.died) died.push_back({{"party", f.party_id}, {"feature", f.feature}});
    rounds.push_back({{"round", r.round}, {"chosen", r.chosen}, {"scores", scores}, {"died", died}});
  }
  json initial = json::object();
  for (const auto& [party, s] : result.initial_scores) initial[std::to_string(party)] = s;
  return {
      {"selected", result.selected},
      {"ranking", result.ranking},
      {"initial_scores", initial},
      {"rounds", rounds},
      {"config",
       {{"m", result.config.m},
        {"theta", result.config.thresholds.theta},
        {"delta", result.config.thresholds.delta},
        {"tau", result.config.thresholds.tau}}},
  };
}

std::string render_ranking_table(const SelectionResult& result,
                                 const std::map<int, std::vector<std::string>>& feature_names) {
  auto feature_label = [&](const FeatureRef& f) {
    auto it = feature_names.find(f.party_id);
    if (it != feature_names.end() && f.feature < it->second.size()) {
      return "P" + std::to_string(f.party_id) + "." + it->second[f.feature];
    }
    return "P" + std::to_string(f.party_id) + "#" + std::to_string(f.feature);
  };

  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-5s %-6s %-12s %-12s %-9s %s\n", "Rank", "Party", "Initial", "AtSelection",
                "Selected", "Zeroed after pick");
  out << line;
  for (std::size_t i = 0; i < result.ranking.size(); ++i) {
    const SelectionRound& r = result.rounds[i];
    std::string died;
    for (const auto& f : r.died) died += (died.empty() ? "" : ", ") + feature_label(f);
    if (died.empty()) died = "-";
    std::snprintf(line, sizeof(line), "%-5zu P%-5d %-12.6f %-12.6f %-9s ", i + 1, r.chosen,
                  result.initial_scores.at(r.chosen), r.scores.at(r.chosen), i < result.selected.size() ? "yes" : "no");
    out << line << died << "\n";
  }
  return out.str();
}

}  // namespace vflrps
