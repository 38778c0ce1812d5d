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

#include "vflrps/federation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <map>
#include <thread>

#include "vflrps/random.hpp"

namespace vflrps {
namespace {

constexpr std::uint64_t kMatrixSessionTag = 0xC0;
constexpr std::uint64_t kPairSessionTag = 0xC1;
constexpr std::uint64_t kBrokerSessionTag = 0xC2;
constexpr std::uint64_t kHelloTag = 0xC3;

std::string seed_hex(std::uint64_t seed) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(seed));
  return buf;
}

std::uint64_t parse_seed_hex(const std::string& text) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(text, &used, 16);
    if (used != text.size() || text.size() > 16) throw std::invalid_argument("seed");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kProtocolViolation, "bad seed '" + text + "'");
  }
}

std::vector<PreparedColumn> prepare_all(const FeatureColumns& columns) {
  std::vector<PreparedColumn> out;
  out.reserve(columns.size());
  for (const auto& col : columns) out.push_back(prepare_column(col));
  return out;
}

Envelope receive_checked(Connection& connection) {
  try {
    Envelope e = connection.receive();
    throw_if_error(e);
    return e;
  } catch (const Error& err) {
    if (err.code() == ErrorCode::kConnectionLost) throw Error(ErrorCode::kSessionAborted, err.what());
    throw;
  }
}

// Runs count independent tasks with up to width workers; each worker gets its own
// connection. Results land at their task index, so scheduling never changes them.
template <typename Task>
void run_batched(std::size_t count, std::size_t width, Network& network, const std::string& address, Task task) {
  width = std::max<std::size_t>(1, std::min(width, count));
  if (width == 1) {
    auto connection = network.connect(address);
    for (std::size_t i = 0; i < count; ++i) task(*connection, i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  for (std::size_t w = 0; w < width; ++w) {
    workers.emplace_back([&] {
      try {
        auto connection = network.connect(address);
        for (std::size_t i = next++; i < count; i = next++) task(*connection, i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = count;
      }
    });
  }
  for (auto& t : workers) t.join();
  if (failure) std::rethrow_exception(failure);
}

bool all_rows_constant(const CorrelationMatrix& matrix, std::size_t col) {
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    if (!matrix.constant_at(r, col)) return false;
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// Data types

std::uint64_t party_private_seed(std::uint64_t protocol_seed, int party_id) {
  return derive_seed({protocol_seed, static_cast<std::uint64_t>(party_id), 0x505249});
}

std::size_t PartyDataset::samples() const noexcept {
  if (!columns.empty()) return columns.front().size();
  return labels ? labels->size() : 0;
}

void PartyDataset::validate() const {
  if (feature_names.size() != columns.size()) {
    throw Error(ErrorCode::kInvalidInput, "party " + std::to_string(party_id) + ": names and columns differ in count");
  }
  std::set<std::string> seen;
  for (const auto& name : feature_names) {
    if (!seen.insert(name).second) {
      throw Error(ErrorCode::kInvalidInput, "party " + std::to_string(party_id) + ": duplicate feature '" + name + "'");
    }
  }
  const std::size_t n = samples();
  for (const auto& col : columns) {
    if (col.size() != n) throw Error(ErrorCode::kAlignmentError, "party " + std::to_string(party_id) + ": ragged columns");
    for (double v : col) {
      if (!std::isfinite(v)) throw Error(ErrorCode::kInvalidInput, "non-finite value in party " + std::to_string(party_id));
    }
  }
  if (labels && labels->size() != n) throw Error(ErrorCode::kAlignmentError, "labels misaligned with features");
}

CorrelationMatrix::CorrelationMatrix(int party, std::size_t d, std::size_t d_k)
    : party_id(party),
      active_features(d),
      passive_features(d_k),
      entries((d + 1) * d_k, 0.0),
      constant_flags((d + 1) * d_k, 0) {}

std::vector<double> CorrelationMatrix::column(std::size_t col) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
  return out;
}

void Thresholds::validate() const {
  if (!(theta > 0.0 && theta <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "theta must lie in (0, 1]");
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidConfig, "delta must be positive");
  if (!(tau > 0.0 && tau <= 1.0)) throw Error(ErrorCode::kInvalidConfig, "tau must lie in (0, 1]");
}

// ---------------------------------------------------------------------------
// Redundancy analysis

std::vector<std::size_t> detect_active_overlap(const CorrelationMatrix& matrix, double theta) {
  std::vector<std::size_t> out;
  for (std::size_t j = 0; j < matrix.passive_features; ++j) {
    double max_abs = 0.0;
    for (std::size_t i = 0; i < matrix.active_features; ++i) max_abs = std::max(max_abs, std::abs(matrix.at(i, j)));
    if (max_abs > theta) out.push_back(j);
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> detect_cross_party_candidates(
    const CorrelationMatrix& first, const CorrelationMatrix& second, double delta,
    const std::set<std::size_t>& skip_first, const std::set<std::size_t>& skip_second) {
  if (first.rows() != second.rows()) {
    throw Error(ErrorCode::kInvalidInput, "correlation matrices built against different active parties");
  }
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t m = 0; m < first.passive_features; ++m) {
    if (skip_first.count(m)) continue;
    for (std::size_t n = 0; n < second.passive_features; ++n) {
      if (skip_second.count(n)) continue;
      double ss = 0.0;
      for (std::size_t r = 0; r < first.rows(); ++r) {
        const double diff = first.at(r, m) - second.at(r, n);
        ss += diff * diff;
      }
      if (std::sqrt(ss) < delta) out.emplace_back(m, n);
    }
  }
  return out;
}

RedundancyReport build_redundancy_report(const std::vector<CorrelationMatrix>& matrices_in,
                                         const Thresholds& thresholds, const PairCorrelator& correlate) {
  thresholds.validate();
  std::vector<const CorrelationMatrix*> matrices;
  for (const auto& m : matrices_in) matrices.push_back(&m);
  std::sort(matrices.begin(), matrices.end(),
            [](const CorrelationMatrix* a, const CorrelationMatrix* b) { return a->party_id < b->party_id; });

  RedundancyReport report;
  std::map<int, std::set<std::size_t>> skip;
  for (const CorrelationMatrix* m : matrices) {
    for (std::size_t j : detect_active_overlap(*m, thresholds.theta)) {
      report.active_overlap.insert({m->party_id, j});
      skip[m->party_id].insert(j);
    }
    for (std::size_t j = 0; j < m->passive_features; ++j) {
      if (all_rows_constant(*m, j)) skip[m->party_id].insert(j);
    }
  }

  for (std::size_t a = 0; a < matrices.size(); ++a) {
    for (std::size_t b = a + 1; b < matrices.size(); ++b) {
      const CorrelationMatrix& ci = *matrices[a];
      const CorrelationMatrix& cj = *matrices[b];
      for (auto [m, n] : detect_cross_party_candidates(ci, cj, thresholds.delta, skip[ci.party_id], skip[cj.party_id])) {
        const FeatureRef first{ci.party_id, m};
        const FeatureRef second{cj.party_id, n};
        const Correlation c = correlate(first, second);
        if (!c.constant_feature && std::abs(c.rho) > thresholds.tau) report.cross_pairs.push_back({first, second, c.rho});
      }
    }
  }
  std::sort(report.cross_pairs.begin(), report.cross_pairs.end(), [](const RedundantPair& x, const RedundantPair& y) {
    return std::tie(x.first, x.second) < std::tie(y.first, y.second);
  });
  return report;
}

json to_json(const RedundancyReport& report) {
  json overlap = json::array();
  for (const auto& f : report.active_overlap) overlap.push_back({{"party", f.party_id}, {"feature", f.feature}});
  json pairs = json::array();
  for (const auto& p : report.cross_pairs) {
    pairs.push_back({{"first", {{"party", p.first.party_id}, {"feature", p.first.feature}}},
                     {"second", {{"party", p.second.party_id}, {"feature", p.second.feature}}},
                     {"rho", p.rho}});
  }
  return {{"active_overlap", overlap}, {"cross_pairs", pairs}};
}

json to_json(const CorrelationMatrix& matrix) {
  json rows = json::array();
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    json row = json::array();
    for (std::size_t c = 0; c < matrix.passive_features; ++c) row.push_back(matrix.at(r, c));
    rows.push_back(row);
  }
  return {{"party", matrix.party_id}, {"rows", rows}};
}

// ---------------------------------------------------------------------------
// Passive party

namespace {

PassiveTrainer make_trainer(const PartyDataset& train, const PartyDataset& test) {
  const ColumnScaler scaler = ColumnScaler::fit(train.columns);
  return PassiveTrainer(scaler.apply(train.columns), scaler.apply(test.columns));
}

}  // namespace

PassiveNode::PassiveNode(PartyDataset train, PartyDataset test, Network& network, Options options)
    : train_(std::move(train)),
      prepared_(prepare_all(train_.columns)),
      network_(network),
      options_(std::move(options)),
      responder_([this](const json& ref) -> const PreparedColumn& { return column_for(ref); }),
      trainer_(make_trainer(train_, test)) {
  train_.validate();
  test.validate();
  if (train_.party_id <= 0) throw Error(ErrorCode::kInvalidConfig, "passive party ids start at 1");
}

const PreparedColumn& PassiveNode::column_for(const json& column_ref) const {
  const auto it = column_ref.find("feature");
  if (it == column_ref.end() || !it->is_number_unsigned() || it->get<std::size_t>() >= prepared_.size()) {
    throw Error(ErrorCode::kInvalidInput, "column reference does not name a local feature");
  }
  return prepared_[it->get<std::size_t>()];
}

std::vector<Envelope> PassiveNode::handle(const Envelope& envelope) {
  switch (envelope.msg_type) {
    case MsgType::kSessionInit:
    case MsgType::kMask:
      return responder_.handle(envelope);
    case MsgType::kCorrRequest:
      return handle_pair_request(envelope);
    case MsgType::kTrainForward:
    case MsgType::kTrainGradient:
      return trainer_.handle(envelope);
    case MsgType::kControl:
      if (trainer_.handles(envelope)) return trainer_.handle(envelope);
      return handle_control(envelope);
    default:
      throw Error(ErrorCode::kProtocolViolation,
                  "passive party cannot handle " + std::string(msg_type_name(envelope.msg_type)));
  }
}

std::vector<Envelope> PassiveNode::handle_control(const Envelope& envelope) {
  const std::string op = envelope.payload.value("op", "");
  if (op == "hello") {
    const std::string digest = envelope.payload.value("digest", "");
    if (!options_.scenario_digest.empty() && digest != options_.scenario_digest) {
      throw Error(ErrorCode::kAlignmentError,
                  "scenario digest " + digest + " does not match local " + options_.scenario_digest);
    }
    if (envelope.payload.value("samples", std::size_t{0}) != train_.samples()) {
      throw Error(ErrorCode::kAlignmentError, "sample count differs from the active party");
    }
    return {make_control(envelope.session_id, {{"op", "hello_ack"},
                                               {"party", train_.party_id},
                                               {"features", train_.features()},
                                               {"feature_names", train_.feature_names},
                                               {"samples", train_.samples()}})};
  }
  if (op == "shutdown") {
    shutdown_ = true;
    if (shutdown_callback_) shutdown_callback_();
    return {make_control(envelope.session_id, {{"op", "ack"}})};
  }
  throw Error(ErrorCode::kProtocolViolation, "unknown control op '" + op + "'");
}

std::vector<Envelope> PassiveNode::handle_pair_request(const Envelope& envelope) {
  const json& p = envelope.payload;
  SessionId session;
  SharedRandomness shared;
  std::size_t feature = 0;
  std::size_t peer_feature = 0;
  std::string peer_address;
  try {
    session = SessionId::from_hex(p.at("session").get<std::string>());
    shared.seed = parse_seed_hex(p.at("seed").get<std::string>());
    shared.n = p.at("n").get<std::size_t>();
    shared.m = p.at("m").get<std::size_t>();
    feature = p.at("feature").get<std::size_t>();
    peer_feature = p.at("peer_feature").get<std::size_t>();
    peer_address = p.at("peer_address").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocolViolation, std::string("malformed CorrRequest: ") + e.what());
  }
  const PreparedColumn& column = column_for({{"feature", feature}});
  auto connection = network_.connect(peer_address);
  const Correlation c =
      spcc_initiate(*connection, session, shared, column, options_.private_seed, {{"feature", peer_feature}});
  return {Envelope{envelope.session_id, 0, MsgType::kCorrResult, {{"rho", c.rho}, {"constant", c.constant_feature}}}};
}

// ---------------------------------------------------------------------------
// Active party

ActiveParty::ActiveParty(PartyDataset train, Network& network, CorrelationOptions options)
    : train_(std::move(train)),
      network_(network),
      options_(options),
      private_seed_(party_private_seed(options.protocol_seed, 0)) {
  train_.validate();
  if (!train_.labels) throw Error(ErrorCode::kInvalidConfig, "the active party must hold the labels");
  prepared_ = prepare_all(train_.columns);
  prepared_.push_back(prepare_column(*train_.labels));
}

PassivePeer ActiveParty::hello(int party_id, const std::string& address, const std::string& scenario_digest) {
  auto connection = network_.connect(address);
  const SessionId session = derive_session_id({options_.protocol_seed, kHelloTag, static_cast<std::uint64_t>(party_id)});
  connection->send(make_control(session, {{"op", "hello"}, {"digest", scenario_digest}, {"samples", train_.samples()}}));
  const Envelope reply = receive_checked(*connection);
  if (reply.payload.value("op", "") != "hello_ack") throw Error(ErrorCode::kProtocolViolation, "expected hello_ack");
  PassivePeer peer;
  peer.party_id = reply.payload.at("party").get<int>();
  if (peer.party_id != party_id) {
    throw Error(ErrorCode::kAlignmentError, "expected party " + std::to_string(party_id) + " at " + address +
                                                ", found party " + std::to_string(peer.party_id));
  }
  peer.address = address;
  peer.features = reply.payload.at("features").get<std::size_t>();
  peer.feature_names = reply.payload.at("feature_names").get<std::vector<std::string>>();
  return peer;
}

CorrelationMatrix ActiveParty::compute_correlation_matrix(const PassivePeer& peer) {
  const std::size_t n = train_.samples();
  const std::size_t d = train_.features();
  CorrelationMatrix matrix(peer.party_id, d, peer.features);
  const std::size_t m = options_.mask_width.value_or(default_mask_width(n));
  const std::size_t tasks = (d + 1) * peer.features;

  run_batched(tasks, options_.concurrency, network_, peer.address, [&](Connection& connection, std::size_t t) {
    const std::size_t row = t / peer.features;
    const std::size_t col = t % peer.features;
    const SessionId id = derive_session_id(
        {options_.protocol_seed, kMatrixSessionTag, static_cast<std::uint64_t>(peer.party_id), row, col});
    const SharedRandomness shared{mask_seed_for(id), n, m};
    const Correlation c = spcc_initiate(connection, id, shared, prepared_[row], private_seed_, {{"feature", col}});
    matrix.at(row, col) = c.rho;
    matrix.constant_flags[row * peer.features + col] = c.constant_feature ? 1 : 0;
  });
  return matrix;
}

Correlation ActiveParty::correlate_passive_pair(const PassivePeer& first, std::size_t first_feature,
                                                const PassivePeer& second, std::size_t second_feature) {
  const std::uint64_t pi = static_cast<std::uint64_t>(first.party_id);
  const std::uint64_t pj = static_cast<std::uint64_t>(second.party_id);
  const SessionId pair_session =
      derive_session_id({options_.protocol_seed, kPairSessionTag, pi, first_feature, pj, second_feature});
  const SessionId broker_session =
      derive_session_id({options_.protocol_seed, kBrokerSessionTag, pi, first_feature, pj, second_feature});
  const std::size_t n = train_.samples();
  const std::size_t m = options_.mask_width.value_or(default_mask_width(n));

  auto connection = network_.connect(first.address);
  connection->send({broker_session,
                    0,
                    MsgType::kCorrRequest,
                    {{"session", pair_session.hex()},
                     {"seed", seed_hex(mask_seed_for(pair_session))},
                     {"n", n},
                     {"m", m},
                     {"feature", first_feature},
                     {"peer_party", second.party_id},
                     {"peer_address", second.address},
                     {"peer_feature", second_feature}}});
  const Envelope reply = receive_checked(*connection);
  if (reply.msg_type != MsgType::kCorrResult) throw Error(ErrorCode::kProtocolViolation, "expected CorrResult");
  return {reply.payload.at("rho").get<double>(), reply.payload.value("constant", false)};
}

std::optional<double> ActiveParty::confirm_redundancy(const PassivePeer& first, std::size_t first_feature,
                                                      const PassivePeer& second, std::size_t second_feature,
                                                      double tau) {
  const Correlation c = correlate_passive_pair(first, first_feature, second, second_feature);
  if (c.constant_feature || !(std::abs(c.rho) > tau)) return std::nullopt;
  return c.rho;
}

RedundancyReport ActiveParty::build_redundancy_report(const std::vector<PassivePeer>& peers,
                                                      const std::vector<CorrelationMatrix>& matrices,
                                                      const Thresholds& thresholds) {
  std::map<int, const PassivePeer*> by_id;
  for (const auto& p : peers) by_id[p.party_id] = &p;
  return vflrps::build_redundancy_report(matrices, thresholds, [&](const FeatureRef& a, const FeatureRef& b) {
    return correlate_passive_pair(*by_id.at(a.party_id), a.feature, *by_id.at(b.party_id), b.feature);
  });
}

CorrelationMatrix compute_correlation_matrix(const PartyDataset& active, const PartyDataset& passive,
                                             TransportKind transport, std::uint64_t seed) {
  if (active.samples() != passive.samples()) throw Error(ErrorCode::kAlignmentError, "sample counts differ");
  PartyDataset empty_test = passive;
  for (auto& col : empty_test.columns) col.clear();

  CorrelationOptions options;
  options.protocol_seed = seed;
  if (transport == TransportKind::kInProcess) {
    InProcNetwork network;
    PassiveNode node(passive, empty_test, network, {party_private_seed(seed, passive.party_id), ""});
    network.serve("passive", node.handler());
    ActiveParty party(active, network, options);
    const PassivePeer peer = party.hello(passive.party_id, "passive", "");
    return party.compute_correlation_matrix(peer);
  }
  TcpNetwork network;
  PassiveNode node(passive, empty_test, network, {party_private_seed(seed, passive.party_id), ""});
  TcpServer server("127.0.0.1:0", node.handler());
  ActiveParty party(active, network, options);
  const PassivePeer peer = party.hello(passive.party_id, server.address(), "");
  CorrelationMatrix out = party.compute_correlation_matrix(peer);
  server.stop();
  return out;
}

}  // namespace vflrps
