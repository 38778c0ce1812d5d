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

// Vertically federated linear and logistic regression.
//
// Each epoch every party sends its partial score X_k w_k (one value per
// training row) to the active party, which adds them with its own block
// and the bias, forms the residual (prediction - y, with a sigmoid for
// classification) and sends the residual back. Each party then applies
// w_k -= lr / n * X_k^T residual. Partial aggregates travel in plaintext.

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "vflrps/numerics.hpp"
#include "vflrps/transport.hpp"

namespace vflrps {

struct TrainConfig {
  double learning_rate = 0.01;
  int epochs = 1000;
  Task task = Task::kRegression;
  std::uint64_t seed = 0;  // reserved for stochastic variants; zero-initialised weights do not use it

  void validate() const;  // InvalidConfig on lr <= 0 or epochs < 1
};

enum class Split { kTrain, kTest };

// Column-major feature block held by one party.
using FeatureColumns = std::vector<std::vector<double>>;

// Scales train and test columns by the training mean and population std.
// Constant training columns are centred only.
struct ColumnScaler {
  std::vector<double> means;
  std::vector<double> scales;

  static ColumnScaler fit(const FeatureColumns& train);
  FeatureColumns apply(const FeatureColumns& columns) const;
};

struct FederatedModel {
  Task task = Task::kRegression;
  std::vector<int> parties;                   // passive parties in the model, ascending
  std::vector<double> active_weights;         // block held by the active party
  std::map<int, std::vector<double>> passive_weights;  // fetched for reporting once training ends
  double bias = 0.0;
  std::vector<double> loss_curve;             // loss before each update; mse or log-loss
  std::string model_id;
};

double sigmoid(double t);

// Handles the passive side of training: TrainForward (partial scores),
// TrainGradient (weight update) and Control{train_begin, get_weights, set_weights}.
class PassiveTrainer {
 public:
  PassiveTrainer(FeatureColumns train, FeatureColumns test);

  bool handles(const Envelope& envelope) const;
  std::vector<Envelope> handle(const Envelope& envelope);

  std::size_t features() const noexcept { return train_.size(); }

 private:
  struct ModelState {
    std::vector<double> weights;
    double learning_rate = 0.0;
  };

  const FeatureColumns& columns(Split split) const { return split == Split::kTrain ? train_ : test_; }

  FeatureColumns train_;
  FeatureColumns test_;
  std::mutex mutex_;
  std::map<std::string, ModelState> models_;
};

struct PassiveLink {
  int party_id = 0;
  std::string address;
};

// Active side: owns the labels, its own feature block and the bias.
class FederatedTrainer {
 public:
  FederatedTrainer(FeatureColumns active_train, FeatureColumns active_test, std::vector<double> train_labels,
                   Network& network);

  // Runs exactly config.epochs full-batch epochs over the active block plus the
  // given passive parties. Throws Diverged if the loss stops being finite.
  FederatedModel fit(const std::vector<PassiveLink>& parties, const TrainConfig& config,
                     const std::string& model_id);

  // Aggregated linear score (sigmoid for classification) for every row of the split.
  // The link set must match the parties the model was trained with.
  std::vector<double> predict(const FederatedModel& model, const std::vector<PassiveLink>& parties, Split split);

 private:
  std::vector<double> local_partial(std::span<const double> weights, Split split) const;

  FeatureColumns active_train_;
  FeatureColumns active_test_;
  std::vector<double> train_labels_;
  Network& network_;
};

// Metrics of a trained model on the held-out split.
MetricReport evaluate_run(FederatedTrainer& trainer, const FederatedModel& model,
                          const std::vector<PassiveLink>& parties, std::span<const double> test_labels);

// Installs explicit passive weights (used to evaluate hand-built models).
void push_passive_weights(Network& network, const PassiveLink& party, const std::string& model_id,
                          const std::vector<double>& weights);

}  // namespace vflrps
