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

// Party roles and the correlation / redundancy phase.
//
// The active party runs one secure Spearman session per (active column,
// passive feature) pair, the target being the last active column, which
// yields the (d + 1) x d_k matrix C_k of every passive party. From those
// matrices it flags features that overlap the active party (max |rho|
// over active rows > theta), pre-filters cross-party pairs whose full
// correlation columns are close (L2 distance < delta) and confirms each
// candidate with a direct passive-to-passive session (|rho| > tau).

#pragma once

#include <atomic>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "vflrps/numerics.hpp"
#include "vflrps/smpc.hpp"
#include "vflrps/training.hpp"
#include "vflrps/transport.hpp"

namespace vflrps {

// Seed for the private masking vectors a party draws as initiator.
// Party 0 is the active party.
std::uint64_t party_private_seed(std::uint64_t protocol_seed, int party_id);

struct PartyDataset {
  int party_id = 0;
  std::vector<std::string> feature_names;
  FeatureColumns columns;                    // d_k columns of n samples
  std::optional<std::vector<double>> labels;  // active party only

  std::size_t samples() const noexcept;
  std::size_t features() const noexcept { return columns.size(); }
  // Throws InvalidInput on ragged columns, duplicate names or non-finite values.
  void validate() const;
};

struct CorrelationMatrix {
  int party_id = 0;
  std::size_t active_features = 0;   // d; row d is the target
  std::size_t passive_features = 0;  // d_k
  std::vector<double> entries;        // row-major (d + 1) x d_k
  std::vector<char> constant_flags;   // same layout

  CorrelationMatrix() = default;
  CorrelationMatrix(int party, std::size_t d, std::size_t d_k);

  std::size_t rows() const noexcept { return active_features + 1; }
  std::size_t target_row() const noexcept { return active_features; }
  double at(std::size_t row, std::size_t col) const { return entries[row * passive_features + col]; }
  double& at(std::size_t row, std::size_t col) { return entries[row * passive_features + col]; }
  bool constant_at(std::size_t row, std::size_t col) const { return constant_flags[row * passive_features + col] != 0; }
  std::vector<double> column(std::size_t col) const;
};

struct FeatureRef {
  int party_id = 0;
  std::size_t feature = 0;

  auto operator<=>(const FeatureRef&) const = default;
};

struct RedundantPair {
  FeatureRef first;   // lower party id
  FeatureRef second;
  double rho = 0.0;

  friend bool operator==(const RedundantPair&, const RedundantPair&) = default;
};

struct RedundancyReport {
  std::set<FeatureRef> active_overlap;
  std::vector<RedundantPair> cross_pairs;  // sorted by (first, second)

  friend bool operator==(const RedundancyReport&, const RedundancyReport&) = default;
};

struct Thresholds {
  double theta = 0.9;   // overlap with the active party
  double delta = 0.5;   // correlation-pattern distance pre-filter
  double tau = 0.95;    // direct correlation confirmation

  void validate() const;
};

// Feature indices j with max_i |C(i, j)| > theta over the active rows only.
std::vector<std::size_t> detect_active_overlap(const CorrelationMatrix& matrix, double theta);

// Pairs (m, n) whose full correlation columns are within L2 distance < delta.
// Features listed in the skip sets are not considered.
std::vector<std::pair<std::size_t, std::size_t>> detect_cross_party_candidates(
    const CorrelationMatrix& first, const CorrelationMatrix& second, double delta,
    const std::set<std::size_t>& skip_first = {}, const std::set<std::size_t>& skip_second = {});

// Direct correlation between two passive features, |rho| for the confirmation test.
using PairCorrelator = std::function<Correlation(const FeatureRef&, const FeatureRef&)>;

// Overlap flags, then candidates over every party pair, then confirmation.
// Constant features (all-zero flagged columns) never become candidates.
RedundancyReport build_redundancy_report(const std::vector<CorrelationMatrix>& matrices, const Thresholds& thresholds,
                                         const PairCorrelator& correlate);

json to_json(const RedundancyReport& report);
json to_json(const CorrelationMatrix& matrix);

// A passive party process: answers secure-correlation sessions on its
// training rows, brokered pair sessions with other passive parties, and
// training messages.
class PassiveNode {
 public:
  struct Options {
    std::uint64_t private_seed = 0;
    std::string scenario_digest;  // empty accepts any hello
  };

  // train carries the rows used for selection and fitting; test is held out.
  PassiveNode(PartyDataset train, PartyDataset test, Network& network, Options options);

  std::vector<Envelope> handle(const Envelope& envelope);
  Handler handler() {
    return [this](const Envelope& e) { return handle(e); };
  }

  int party_id() const noexcept { return train_.party_id; }
  // Set once a Control{shutdown} has been handled.
  bool shutdown_requested() const noexcept { return shutdown_; }
  void on_shutdown(std::function<void()> callback) { shutdown_callback_ = std::move(callback); }

 private:
  const PreparedColumn& column_for(const json& column_ref) const;
  std::vector<Envelope> handle_control(const Envelope& envelope);
  std::vector<Envelope> handle_pair_request(const Envelope& envelope);

  PartyDataset train_;
  std::vector<PreparedColumn> prepared_;
  Network& network_;
  Options options_;
  SpccResponder responder_;
  PassiveTrainer trainer_;
  std::atomic<bool> shutdown_{false};
  std::function<void()> shutdown_callback_;
};

struct PassivePeer {
  int party_id = 0;
  std::string address;
  std::size_t features = 0;
  std::vector<std::string> feature_names;
};

struct CorrelationOptions {
  std::uint64_t protocol_seed = 0;
  std::optional<std::size_t> mask_width;  // default ceil(n / 2)
  std::size_t concurrency = 1;            // sessions in flight per party
};

// The label holder. Orchestrates selection-phase sessions from its side.
class ActiveParty {
 public:
  ActiveParty(PartyDataset train, Network& network, CorrelationOptions options);

  // Control{hello}: alignment check, returns the peer's feature metadata.
  // Throws AlignmentError when the peer's digest or sample count differs.
  PassivePeer hello(int party_id, const std::string& address, const std::string& scenario_digest);

  CorrelationMatrix compute_correlation_matrix(const PassivePeer& peer);

  // Brokers a session between two passive parties; only rho comes back.
  Correlation correlate_passive_pair(const PassivePeer& first, std::size_t first_feature, const PassivePeer& second,
                                     std::size_t second_feature);

  // Confirmed rho if |rho| > tau.
  std::optional<double> confirm_redundancy(const PassivePeer& first, std::size_t first_feature,
                                           const PassivePeer& second, std::size_t second_feature, double tau);

  RedundancyReport build_redundancy_report(const std::vector<PassivePeer>& peers,
                                           const std::vector<CorrelationMatrix>& matrices,
                                           const Thresholds& thresholds);

  const PartyDataset& data() const noexcept { return train_; }

 private:
  PartyDataset train_;
  std::vector<PreparedColumn> prepared_;  // active features, then the target
  Network& network_;
  CorrelationOptions options_;
  std::uint64_t private_seed_;
};

// Test and single-call convenience: hosts the passive dataset in-process or
// on a loopback TCP server and computes its correlation matrix.
CorrelationMatrix compute_correlation_matrix(const PartyDataset& active, const PartyDataset& passive,
                                             TransportKind transport, std::uint64_t seed);

}  // namespace vflrps
