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

// Scenario files, CSV ingestion, vertical partitioning and the synthetic
// generators. The JSON schema is documented in docs/scenario.md.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "vflrps/federation.hpp"
#include "vflrps/numerics.hpp"
#include "vflrps/transport.hpp"

namespace vflrps {

struct Table {
  std::vector<std::string> names;
  std::vector<std::vector<double>> columns;  // column-major
  std::size_t dropped_rows = 0;              // rows removed for missing values

  std::size_t rows() const noexcept { return columns.empty() ? 0 : columns.front().size(); }
  std::size_t index_of(const std::string& name) const;  // throws InvalidConfig
  bool has(const std::string& name) const;
  const std::vector<double>& column(const std::string& name) const { return columns[index_of(name)]; }
  Table select_rows(const std::vector<std::size_t>& rows) const;
};

// Header row required. Delimiter is ',' unless the header holds more ';'.
// Rows with an empty or NA cell are dropped and counted.
Table load_csv(const std::filesystem::path& path, const std::string& target);

// Seeded shuffle, then the first round(ratio * n) rows train. Needs >= 5 rows.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t n, double ratio,
                                                                            std::uint64_t seed);
std::pair<Table, Table> split_train_test(const Table& table, double ratio, std::uint64_t seed);

enum class ConfigKind { kBasic, kOverlapping, kIrrelevant };
enum class DuplicateTransform { kCopy, kAffine, kCube };

struct Duplicate {
  std::string column;  // source column, active or passive
  int party = 0;       // receiving party; created if absent from the partitions
  DuplicateTransform transform = DuplicateTransform::kCopy;
};

struct NoiseParty {
  int party = 0;
  std::size_t features = 0;
};

struct SyntheticFeature {
  std::string name;
  double beta = 0.0;
};

struct SyntheticSpec {
  std::size_t n = 0;
  std::vector<SyntheticFeature> features;
  double noise_sigma = 0.0;
  double intercept = 0.0;
};

struct ScenarioSeeds {
  std::uint64_t split = 0;
  std::uint64_t protocol = 0;
  std::uint64_t data = 0;    // synthetic rows and noise columns
  std::uint64_t random = 0;  // RANDOM baseline draws
};

struct ScenarioConfig {
  std::string name;
  Task task = Task::kRegression;
  std::optional<std::filesystem::path> csv;  // resolved against the scenario file
  std::string csv_as_written;                // kept for the digest
  std::optional<SyntheticSpec> synthetic;
  std::string target = "y";
  std::optional<double> binarize_at;  // classification label = target >= value
  std::vector<std::string> active;
  std::map<int, std::vector<std::string>> parties;
  std::vector<std::string> ignore;
  ConfigKind kind = ConfigKind::kBasic;
  std::vector<Duplicate> duplicates;
  std::vector<NoiseParty> noise_parties;

  std::size_t m = 1;
  Thresholds thresholds;
  std::size_t concurrency = 8;
  std::optional<std::size_t> mask_width;
  double learning_rate = 0.01;
  int epochs = 1000;
  double train_ratio = 0.8;
  std::size_t random_repeats = 5;
  ScenarioSeeds seeds;
  std::map<int, std::string> endpoints;  // party id -> host:port for multi-process runs

  static ScenarioConfig from_json(const json& j, const std::filesystem::path& base_dir = {});
  static ScenarioConfig load(const std::filesystem::path& path);
  json to_json() const;

  // Every passive id after duplicates and noise parties, ascending.
  std::vector<int> party_ids() const;
  // Throws InvalidConfig on unassigned or doubly assigned columns, a
  // missing target, or kind-specific entries under the wrong kind.
  void validate() const;
};

// FNV-1a over the canonical JSON of the data-defining fields, in hex.
// Selection, training and endpoint settings do not change it.
std::string scenario_digest(const ScenarioConfig& config);

struct GroundTruth {
  std::set<int> informative_parties;
  std::set<std::pair<FeatureRef, FeatureRef>> redundant_feature_pairs;  // passive-passive, ordered
  std::set<FeatureRef> active_duplicates;                              // passive copies of active columns
  std::set<int> noise_parties;
};

struct Partition {
  PartyDataset active;  // party 0, carries the labels
  std::vector<PartyDataset> passive;
  GroundTruth truth;
};

// Builds party datasets over the whole table. Informative parties are only
// known for synthetic sources; pass the coefficients through `betas`.
Partition partition_vertical(const Table& table, const ScenarioConfig& config,
                             const std::map<std::string, double>& betas = {});

// Applies one row selection to every party.
Partition select_rows(const Partition& partition, const std::vector<std::size_t>& rows);

// y = X beta + intercept + sigma * eps, or Bernoulli(sigmoid(X beta + intercept))
// for classification. Features are iid standard normal.
Table generate_synthetic(const SyntheticSpec& spec, Task task, std::uint64_t seed, const std::string& target = "y");

// Everything a run needs, already split. Regression targets are standardized
// with the training mean and population std.
struct PreparedScenario {
  ScenarioConfig config;
  std::string digest;
  Partition train;
  Partition test;
  GroundTruth truth;
  std::size_t dropped_rows = 0;
};

PreparedScenario prepare_scenario(const ScenarioConfig& config);

}  // namespace vflrps
