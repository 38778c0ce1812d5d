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

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "vflrps/federation.hpp"
#include "vflrps/scenario.hpp"
#include "vflrps/selection.hpp"
#include "vflrps/training.hpp"

namespace vflrps {

struct Overrides {
  std::optional<std::size_t> m;
  std::optional<double> theta;
  std::optional<double> delta;
  std::optional<double> tau;
  std::optional<std::uint64_t> seed;  // protocol seed
  std::map<int, std::string> endpoints;
};

// Applies overrides and re-validates.
ScenarioConfig apply_overrides(ScenarioConfig config, const Overrides& overrides);

// Where the passive parties live for one run. Local federations host every
// passive party inside this process, over the in-process transport or on
// loopback TCP servers. Remote federations talk to serve-party processes.
class Federation {
 public:
  static std::unique_ptr<Federation> local(const PreparedScenario& scenario, TransportKind transport);
  static std::unique_ptr<Federation> remote(const PreparedScenario& scenario,
                                            const std::map<int, std::string>& endpoints);
  ~Federation();

  Network& network();
  std::vector<PassiveLink> links() const;  // ascending party id
  // Sends Control{shutdown} to every remote party; no-op for local ones.
  void shutdown();

 private:
  Federation();
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct SelectionRun {
  std::vector<PassivePeer> peers;
  std::vector<CorrelationMatrix> matrices;
  RedundancyReport redundancy;
  SelectionResult result;
  double seconds = 0.0;  // correlation, redundancy and scoring
};

SelectionRun run_selection(const PreparedScenario& scenario, Federation& federation);

// Deterministic: no timing fields.
json selection_report(const PreparedScenario& scenario, const SelectionRun& run);
std::string selection_table(const PreparedScenario& scenario, const SelectionRun& run);

struct BaselineRun {
  std::string name;
  std::vector<int> parties;
  MetricReport metrics;
  std::vector<double> loss_curve;
};

struct RandomSummary {
  std::vector<BaselineRun> draws;
  MetricReport mean;
  MetricReport stddev;
};

struct RunReport {
  std::string digest;
  SelectionRun selection;
  BaselineRun all;
  BaselineRun active_only;
  RandomSummary random;
  BaselineRun vfl_rps;
};

// Fits one model over the active block plus `parties` and scores it on the test split.
BaselineRun train_baseline(const PreparedScenario& scenario, Federation& federation, const std::string& name,
                           const std::vector<int>& parties);

// M of the K parties, drawn with a seeded shuffle; sorted ascending.
std::vector<int> random_parties(const std::vector<int>& all, std::size_t m, std::uint64_t seed, std::size_t repeat);

RunReport run_experiment(const PreparedScenario& scenario, Federation& federation);

json to_json(const RunReport& report, const PreparedScenario& scenario);
std::string experiment_table(const RunReport& report, const PreparedScenario& scenario);
// One row per epoch, one column per model.
std::string loss_curves_csv(const RunReport& report);

// Hosts one passive party on a TCP server until Control{shutdown}.
// Writes the bound port to port_file when given.
void serve_party(const PreparedScenario& scenario, int party_id, const std::string& address,
                 const std::optional<std::filesystem::path>& port_file);

}  // namespace vflrps
