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

#include "vflrps/training.hpp"

#include <algorithm>
#include <cmath>

#include "vflrps/random.hpp"

namespace vflrps {
namespace {

SessionId model_session(const std::string& model_id) { return derive_session_id({0x545241494EULL, hash_string(model_id)}); }

std::string_view split_name(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split split_from_payload(const json& payload) {
  const std::string name = payload.value("split", "train");
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw Error(ErrorCode::kProtocolViolation, "unknown split '" + name + "'");
}

std::vector<double> read_vector(const json& payload, const char* key, std::size_t expected) {
  const auto it = payload.find(key);
  if (it == payload.end() || !it->is_array() || it->size() != expected) {
    throw Error(ErrorCode::kProtocolViolation, std::string("field '") + key + "' missing or wrong length");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : *it) {
    if (!v.is_number()) throw Error(ErrorCode::kProtocolViolation, std::string("non-numeric entry in '") + key + "'");
    out.push_back(v.get<double>());
  }
  return out;
}

std::size_t row_count(const FeatureColumns& columns) { return columns.empty() ? 0 : columns.front().size(); }

// partial[i] = sum_j columns[j][i] * w[j]
std::vector<double> block_partial(const FeatureColumns& columns, std::span<const double> weights, std::size_t rows) {
  std::vector<double> out(rows, 0.0);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    const double w = weights[j];
    const auto& col = columns[j];
    for (std::size_t i = 0; i < rows; ++i) out[i] += col[i] * w;
  }
  return out;
}

// w[j] -= lr / n * column_j . residual
void block_update(const FeatureColumns& columns, std::vector<double>& weights, std::span<const double> residual,
                  double learning_rate) {
  const double scale = learning_rate / static_cast<double>(residual.size());
  for (std::size_t j = 0; j < columns.size(); ++j) weights[j] -= scale * dot(columns[j], residual);
}

Envelope expect_reply(Connection& connection, MsgType type) {
  Envelope e;
  try {
    e = connection.receive();
  } catch (const Error& err) {
    if (err.code() == ErrorCode::kConnectionLost) throw Error(ErrorCode::kSessionAborted, err.what());
    throw;
  }
  throw_if_error(e);
  if (e.msg_type != type) {
    throw Error(ErrorCode::kProtocolViolation, "expected " + std::string(msg_type_name(type)) + ", got " +
                                                   std::string(msg_type_name(e.msg_type)));
  }
  return e;
}

void check_links(const FederatedModel& model, const std::vector<PassiveLink>& parties) {
  std::vector<int> ids;
  for (const auto& p : parties) ids.push_back(p.party_id);
  std::sort(ids.begin(), ids.end());
  if (ids != model.parties) throw Error(ErrorCode::kInvalidConfig, "party set differs from the trained model");
}

std::vector<PassiveLink> sorted_links(std::vector<PassiveLink> parties) {
  std::sort(parties.begin(), parties.end(),
            [](const PassiveLink& a, const PassiveLink& b) { return a.party_id < b.party_id; });
  for (std::size_t i = 1; i < parties.size(); ++i) {
    if (parties[i].party_id == parties[i - 1].party_id) throw Error(ErrorCode::kInvalidConfig, "duplicate party");
  }
  return parties;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw Error(ErrorCode::kInvalidConfig, "learning_rate must be positive");
  }
  if (epochs < 1) throw Error(ErrorCode::kInvalidConfig, "epochs must be at least 1");
}

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

ColumnScaler ColumnScaler::fit(const FeatureColumns& train) {
  ColumnScaler s;
  for (const auto& col : train) {
    s.means.push_back(mean(col));
    const double sd = std_pop(col);
    s.scales.push_back(sd > 0.0 ? sd : 1.0);
  }
  return s;
}

FeatureColumns ColumnScaler::apply(const FeatureColumns& columns) const {
  FeatureColumns out = columns;
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (double& v : out[j]) v = (v - means[j]) / scales[j];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Passive side

PassiveTrainer::PassiveTrainer(FeatureColumns train, FeatureColumns test)
    : train_(std::move(train)), test_(std::move(test)) {}

bool PassiveTrainer::handles(const Envelope& envelope) const {
  if (envelope.msg_type == MsgType::kTrainForward || envelope.msg_type == MsgType::kTrainGradient) return true;
  if (envelope.msg_type != MsgType::kControl) return false;
  const std::string op = envelope.payload.value("op", "");
  return op == "train_begin" || op == "get_weights" || op == "set_weights";
}

std::vector<Envelope> PassiveTrainer::handle(const Envelope& envelope) {
  const std::string model_id = envelope.payload.value("model", "");
  if (model_id.empty()) throw Error(ErrorCode::kProtocolViolation, "training message without model id");
  std::lock_guard lock(mutex_);

  if (envelope.msg_type == MsgType::kControl) {
    const std::string op = envelope.payload.value("op", "");
    if (op == "train_begin") {
      ModelState state;
      state.weights.assign(train_.size(), 0.0);
      state.learning_rate = envelope.payload.value("learning_rate", 0.0);
      if (!(state.learning_rate > 0.0)) throw Error(ErrorCode::kInvalidConfig, "learning_rate must be positive");
      models_[model_id] = std::move(state);
      return {make_control(envelope.session_id, {{"op", "ack"}, {"features", train_.size()}})};
    }
    auto it = models_.find(model_id);
    if (op == "set_weights") {
      ModelState& state = models_[model_id];
      state.weights = read_vector(envelope.payload, "weights", train_.size());
      return {make_control(envelope.session_id, {{"op", "ack"}})};
    }
    if (it == models_.end()) throw Error(ErrorCode::kInvalidConfig, "unknown model '" + model_id + "'");
    return {make_control(envelope.session_id, {{"op", "weights"}, {"weights", it->second.weights}})};
  }

  auto it = models_.find(model_id);
  if (it == models_.end()) throw Error(ErrorCode::kInvalidConfig, "unknown model '" + model_id + "'");
  ModelState& state = it->second;

  if (envelope.msg_type == MsgType::kTrainForward) {
    const Split split = split_from_payload(envelope.payload);
    const auto& cols = columns(split);
    std::vector<double> partial = block_partial(cols, state.weights, row_count(cols));
    return {Envelope{envelope.session_id, 0, MsgType::kTrainForward, {{"model", model_id}, {"partial", partial}}}};
  }

  // TrainGradient
  const std::vector<double> residual = read_vector(envelope.payload, "residual", row_count(train_));
  block_update(train_, state.weights, residual, state.learning_rate);
  return {make_control(envelope.session_id, {{"op", "ack"}})};
}

// ---------------------------------------------------------------------------
// Active side

FederatedTrainer::FederatedTrainer(FeatureColumns active_train, FeatureColumns active_test,
                                   std::vector<double> train_labels, Network& network)
    : active_train_(std::move(active_train)),
      active_test_(std::move(active_test)),
      train_labels_(std::move(train_labels)),
      network_(network) {
  for (const auto& col : active_train_) {
    if (col.size() != train_labels_.size()) throw Error(ErrorCode::kAlignmentError, "active columns misaligned");
  }
}

std::vector<double> FederatedTrainer::local_partial(std::span<const double> weights, Split split) const {
  const auto& cols = split == Split::kTrain ? active_train_ : active_test_;
  const std::size_t rows = cols.empty() ? (split == Split::kTrain ? train_labels_.size() : 0) : row_count(cols);
  return block_partial(cols, weights, rows);
}

FederatedModel FederatedTrainer::fit(const std::vector<PassiveLink>& parties_in, const TrainConfig& config,
                                     const std::string& model_id) {
  config.validate();
  const std::vector<PassiveLink> parties = sorted_links(parties_in);
  const std::size_t n = train_labels_.size();
  if (n == 0) throw Error(ErrorCode::kInvalidInput, "no training rows");
  const SessionId session = model_session(model_id);

  FederatedModel model;
  model.task = config.task;
  model.model_id = model_id;
  model.active_weights.assign(active_train_.size(), 0.0);
  for (const auto& p : parties) model.parties.push_back(p.party_id);

  std::vector<std::unique_ptr<Connection>> connections;
  for (const auto& p : parties) {
    connections.push_back(network_.connect(p.address));
    connections.back()->send(
        make_control(session, {{"op", "train_begin"}, {"model", model_id}, {"learning_rate", config.learning_rate}}));
    expect_reply(*connections.back(), MsgType::kControl);
  }

  const bool classification = config.task == Task::kClassification;
  std::vector<double> residual(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Forward: every party ships its partial scores; summed in ascending party order.
    for (auto& c : connections) {
      c->send({session, 0, MsgType::kTrainForward, {{"model", model_id}, {"split", "train"}}});
    }
    std::vector<double> logits = local_partial(model.active_weights, Split::kTrain);
    for (auto& c : connections) {
      const Envelope e = expect_reply(*c, MsgType::kTrainForward);
      const std::vector<double> partial = read_vector(e.payload, "partial", n);
      for (std::size_t i = 0; i < n; ++i) logits[i] += partial[i];
    }

    double loss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double score = logits[i] + model.bias;
      const double y = train_labels_[i];
      if (classification) {
        const double p = sigmoid(score);
        residual[i] = p - y;
        // log-loss written in terms of the score for stability
        loss += std::max(score, 0.0) - score * y + std::log1p(std::exp(-std::abs(score)));
      } else {
        residual[i] = score - y;
        loss += residual[i] * residual[i];
      }
    }
    loss /= static_cast<double>(n);
    if (!std::isfinite(loss)) {
      throw Error(ErrorCode::kDiverged, "loss is not finite at epoch " + std::to_string(epoch + 1));
    }
    model.loss_curve.push_back(loss);

    // Backward: broadcast the residual; every block updates itself.
    for (auto& c : connections) {
      c->send({session, 0, MsgType::kTrainGradient, {{"model", model_id}, {"residual", residual}}});
    }
    block_update(active_train_, model.active_weights, residual, config.learning_rate);
    model.bias -= config.learning_rate * mean(residual);
    for (auto& c : connections) expect_reply(*c, MsgType::kControl);
  }

  for (std::size_t k = 0; k < parties.size(); ++k) {
    connections[k]->send(make_control(session, {{"op", "get_weights"}, {"model", model_id}}));
    const Envelope e = expect_reply(*connections[k], MsgType::kControl);
    model.passive_weights[parties[k].party_id] = e.payload.at("weights").get<std::vector<double>>();
  }
  return model;
}

std::vector<double> FederatedTrainer::predict(const FederatedModel& model, const std::vector<PassiveLink>& parties_in,
                                              Split split) {
  check_links(model, parties_in);
  const std::vector<PassiveLink> parties = sorted_links(parties_in);
  const SessionId session = model_session(model.model_id + "/predict/" + std::string(split_name(split)));

  std::vector<double> scores = local_partial(model.active_weights, split);
  for (const auto& p : parties) {
    auto connection = network_.connect(p.address);
    connection->send({session, 0, MsgType::kTrainForward, {{"model", model.model_id}, {"split", split_name(split)}}});
    const Envelope e = expect_reply(*connection, MsgType::kTrainForward);
    if (scores.empty()) scores.assign(e.payload.at("partial").size(), 0.0);
    const std::vector<double> partial = read_vector(e.payload, "partial", scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) scores[i] += partial[i];
  }
  for (double& s : scores) {
    s += model.bias;
    if (model.task == Task::kClassification) s = sigmoid(s);
  }
  return scores;
}

MetricReport evaluate_run(FederatedTrainer& trainer, const FederatedModel& model,
                          const std::vector<PassiveLink>& parties, std::span<const double> test_labels) {
  const std::vector<double> predictions = trainer.predict(model, parties, Split::kTest);
  return compute_metrics(predictions, test_labels, model.task);
}

void push_passive_weights(Network& network, const PassiveLink& party, const std::string& model_id,
                          const std::vector<double>& weights) {
  auto connection = network.connect(party.address);
  connection->send(make_control(model_session(model_id),
                                {{"op", "set_weights"}, {"model", model_id}, {"weights", weights}}));
  expect_reply(*connection, MsgType::kControl);
}

}  // namespace vflrps
