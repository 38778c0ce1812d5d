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

#include "vflrps/smpc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "vflrps/random.hpp"

namespace vflrps {

std::size_t default_mask_width(std::size_t n) { return n < 2 ? 1 : (n + 1) / 2; }

std::uint64_t mask_seed_for(const SessionId& id) { return derive_seed({0x4D41534BULL, id.hi, id.lo}); }

// ---------------------------------------------------------------------------
// MaskMatrix

MaskMatrix MaskMatrix::derive(const SharedRandomness& shared) {
  if (shared.n < 2) throw Error(ErrorCode::kInvalidSession, "mask matrix needs n >= 2");
  if (shared.m == 0) throw Error(ErrorCode::kInvalidSession, "mask matrix needs m >= 1");
  MaskMatrix a;
  a.n_ = shared.n;
  a.m_ = shared.m;
  a.seed_ = shared.seed;
  return a;
}

MaskMatrix MaskMatrix::from_values(std::size_t n, std::size_t m, std::vector<double> row_major) {
  if (n == 0 || m == 0 || row_major.size() != n * m) {
    throw Error(ErrorCode::kInvalidSession, "explicit mask matrix has the wrong shape");
  }
  MaskMatrix a;
  a.n_ = n;
  a.m_ = m;
  a.dense_ = std::move(row_major);
  return a;
}

double MaskMatrix::at(std::size_t i, std::size_t j) const {
  if (!dense_.empty()) return dense_[i * m_ + j];
  return to_pm1(SplitMix64::at(seed_, static_cast<std::uint64_t>(i * m_ + j + 1)));
}

namespace {

// Row kernels over the SplitMix64 stream starting at `base`. Compiled twice:
// portable and with AVX-512 (vectorized 64-bit multiplies), picked at run
// time. This file builds with -ffp-contract=off and the dot product uses a
// fixed 8-way split, so both builds produce identical bits.
[[gnu::always_inline]] inline double row_dot_body(std::uint64_t base, const double* r, std::size_t m) {
  constexpr std::size_t kChunk = 256;
  double buf[kChunk];
  double acc[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  for (std::size_t start = 0; start < m; start += kChunk) {
    const std::size_t len = std::min(kChunk, m - start);
    for (std::size_t j = 0; j < len; ++j) buf[j] = to_pm1(mix64(base + (start + j) * kGoldenGamma));
    const double* rr = r + start;
    std::size_t j = 0;
    for (; j + 8 <= len; j += 8) {
      for (std::size_t l = 0; l < 8; ++l) acc[l] += buf[j + l] * rr[j + l];
    }
    for (std::size_t l = 0; j + l < len; ++l) acc[l] += buf[j + l] * rr[j + l];
  }
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

[[gnu::always_inline]] inline void row_axpy_body(std::uint64_t base, double y, double* out, std::size_t m) {
  for (std::size_t j = 0; j < m; ++j) out[j] += to_pm1(mix64(base + j * kGoldenGamma)) * y;
}

double row_dot_portable(std::uint64_t base, const double* r, std::size_t m) { return row_dot_body(base, r, m); }
void row_axpy_portable(std::uint64_t base, double y, double* out, std::size_t m) { row_axpy_body(base, y, out, m); }

#if defined(__x86_64__) && defined(__GNUC__)
[[gnu::target("avx512f,avx512dq,avx512vl,prefer-vector-width=512")]] double row_dot_avx512(std::uint64_t base,
                                                                                          const double* r,
                                                                                          std::size_t m) {
  return row_dot_body(base, r, m);
}
[[gnu::target("avx512f,avx512dq,avx512vl,prefer-vector-width=512")]] void row_axpy_avx512(std::uint64_t base, double y,
                                                                                         double* out, std::size_t m) {
  row_axpy_body(base, y, out, m);
}

bool has_avx512() {
  static const bool yes = __builtin_cpu_supports("avx512f") && __builtin_cpu_supports("avx512dq") &&
                          __builtin_cpu_supports("avx512vl");
  return yes;
}

double row_dot(std::uint64_t base, const double* r, std::size_t m) {
  return has_avx512() ? row_dot_avx512(base, r, m) : row_dot_portable(base, r, m);
}
void row_axpy(std::uint64_t base, double y, double* out, std::size_t m) {
  has_avx512() ? row_axpy_avx512(base, y, out, m) : row_axpy_portable(base, y, out, m);
}
#else
double row_dot(std::uint64_t base, const double* r, std::size_t m) { return row_dot_portable(base, r, m); }
void row_axpy(std::uint64_t base, double y, double* out, std::size_t m) { row_axpy_portable(base, y, out, m); }
#endif

}  // namespace

std::vector<double> MaskMatrix::multiply(std::span<const double> r) const {
  std::vector<double> out(n_, 0.0);
  if (!dense_.empty()) {
    for (std::size_t i = 0; i < n_; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < m_; ++j) acc += dense_[i * m_ + j] * r[j];
      out[i] = acc;
    }
    return out;
  }
  for (std::size_t i = 0; i < n_; ++i) {
    out[i] = row_dot(seed_ + static_cast<std::uint64_t>(i * m_ + 1) * kGoldenGamma, r.data(), m_);
  }
  return out;
}

std::vector<double> MaskMatrix::multiply_transpose(std::span<const double> y) const {
  std::vector<double> out(m_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    if (!dense_.empty()) {
      for (std::size_t j = 0; j < m_; ++j) out[j] += dense_[i * m_ + j] * y[i];
      continue;
    }
    row_axpy(seed_ + static_cast<std::uint64_t>(i * m_ + 1) * kGoldenGamma, y[i], out.data(), m_);
  }
  return out;
}

std::vector<double> MaskMatrix::materialize() const {
  std::vector<double> out(n_ * m_);
  for (std::size_t i = 0; i < n_; ++i) {
    for (std::size_t j = 0; j < m_; ++j) out[i * m_ + j] = at(i, j);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sessions

InitiatorSession::InitiatorSession(SessionId id, MaskMatrix mask, std::uint64_t private_seed)
    : id_(id), mask_(std::move(mask)), private_seed_(private_seed) {}

void InitiatorSession::fail(const char* what) {
  state_ = SessionState::kFailed;
  private_r_.clear();
  throw Error(ErrorCode::kProtocolViolation, std::string(what) + " in session " + id_.hex());
}

MaskedVector InitiatorSession::mask(const StandardizedRanks& x) {
  SplitMix64 rng(derive_seed({private_seed_, id_.hi, id_.lo}));
  std::vector<double> r(mask_.cols());
  for (double& v : r) v = rng.uniform_pm1();
  return mask_with(x, std::move(r));
}

MaskedVector InitiatorSession::mask_with(const StandardizedRanks& x, std::vector<double> r) {
  if (state_ != SessionState::kCreated) fail("mask requested outside Created");
  if (x.size() != mask_.rows() || r.size() != mask_.cols()) fail("mask input has the wrong length");
  MaskedVector out{mask_.multiply(r)};
  const auto xs = x.values();
  for (std::size_t i = 0; i < out.z.size(); ++i) out.z[i] += xs[i];
  private_r_ = std::move(r);
  state_ = SessionState::kMaskSent;
  return out;
}

double InitiatorSession::finalize(const ResponderReply& reply) {
  if (state_ != SessionState::kMaskSent) fail("finalize outside MaskSent");
  if (reply.v.size() != mask_.cols()) fail("reply vector has the wrong length");
  if (!std::isfinite(reply.s)) fail("reply scalar is not finite");
  const double s_prime = dot(reply.v, private_r_);
  const double rho = (reply.s - s_prime) / static_cast<double>(mask_.rows());
  private_r_.clear();
  state_ = SessionState::kFinalized;
  return rho;
}

ResponderSession::ResponderSession(SessionId id, MaskMatrix mask) : id_(id), mask_(std::move(mask)) {}

ResponderReply ResponderSession::reply(const MaskedVector& z, const StandardizedRanks& y) {
  if (state_ != SessionState::kCreated) {
    state_ = SessionState::kFailed;
    throw Error(ErrorCode::kProtocolViolation, "second mask in session " + id_.hex());
  }
  if (z.z.size() != mask_.rows() || y.size() != mask_.rows()) {
    state_ = SessionState::kFailed;
    throw Error(ErrorCode::kProtocolViolation, "masked vector length does not match n in session " + id_.hex());
  }
  ResponderReply out;
  out.s = dot(z.z, y.values());
  out.v = mask_.multiply_transpose(y.values());
  state_ = SessionState::kReplySent;
  return out;
}

PreparedColumn prepare_column(std::span<const double> raw) {
  PreparedColumn out;
  out.size = raw.size();
  const std::vector<double> ranks = rank_average_ties(raw);
  if (!is_constant(ranks)) out.ranks = standardize_population(ranks);
  return out;
}

// ---------------------------------------------------------------------------
// Wire payloads

namespace {

std::string seed_hex(std::uint64_t seed) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(seed));
  return buf;
}

std::uint64_t parse_seed_hex(const std::string& text) {
  if (text.empty() || text.size() > 16) throw Error(ErrorCode::kProtocolViolation, "bad seed");
  std::size_t used = 0;
  std::uint64_t v = std::stoull(text, &used, 16);
  if (used != text.size()) throw Error(ErrorCode::kProtocolViolation, "bad seed");
  return v;
}

std::vector<double> finite_array(const json& payload, const char* key, std::size_t expected) {
  const auto it = payload.find(key);
  if (it == payload.end() || !it->is_array() || it->size() != expected) {
    throw Error(ErrorCode::kProtocolViolation, std::string("payload field '") + key + "' missing or wrong length");
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : *it) {
    if (!v.is_number()) throw Error(ErrorCode::kProtocolViolation, std::string("non-numeric entry in '") + key + "'");
    const double d = v.get<double>();
    if (!std::isfinite(d)) throw Error(ErrorCode::kProtocolViolation, "non-finite entry");
    out.push_back(d);
  }
  return out;
}

SharedRandomness shared_from_json(const json& payload) {
  try {
    SharedRandomness shared;
    shared.seed = parse_seed_hex(payload.at("seed").get<std::string>());
    shared.n = payload.at("n").get<std::size_t>();
    shared.m = payload.at("m").get<std::size_t>();
    return shared;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kProtocolViolation, std::string("malformed SessionInit: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw Error(ErrorCode::kProtocolViolation, "malformed SessionInit seed");
  }
}

}  // namespace

json to_json(const SharedRandomness& shared, const json& column_ref) {
  return {{"seed", seed_hex(shared.seed)}, {"n", shared.n}, {"m", shared.m}, {"column", column_ref}};
}

json to_json(const MaskedVector& z) { return {{"z", z.z}}; }

json to_json(const ResponderReply& reply) { return {{"s", reply.s}, {"v", reply.v}}; }

MaskedVector masked_vector_from_json(const json& payload, std::size_t n) { return {finite_array(payload, "z", n)}; }

ResponderReply reply_from_json(const json& payload, std::size_t m) {
  const auto s = payload.find("s");
  if (s == payload.end() || !s->is_number()) throw Error(ErrorCode::kProtocolViolation, "reply lacks scalar 's'");
  return {s->get<double>(), finite_array(payload, "v", m)};
}

// ---------------------------------------------------------------------------
// Drivers

Correlation spcc_initiate(Connection& connection, const SessionId& id, const SharedRandomness& shared,
                          const PreparedColumn& column, std::uint64_t private_seed, const json& column_ref) {
  if (column.constant()) return {0.0, true};
  if (column.size != shared.n) throw Error(ErrorCode::kInvalidSession, "column length does not match session n");

  InitiatorSession session(id, MaskMatrix::derive(shared), private_seed);
  const MaskedVector z = session.mask(*column.ranks);
  Envelope reply;
  try {
    connection.send({id, 0, MsgType::kSessionInit, to_json(shared, column_ref)});
    connection.send({id, 0, MsgType::kMask, to_json(z)});
    reply = connection.receive();
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kConnectionLost) throw Error(ErrorCode::kSessionAborted, e.what());
    throw;
  }
  throw_if_error(reply);
  if (reply.session_id != id) throw Error(ErrorCode::kProtocolViolation, "reply for a different session");
  if (reply.msg_type == MsgType::kControl && reply.payload.value("op", "") == "constant_feature") {
    return {0.0, true};
  }
  if (reply.msg_type != MsgType::kReply) {
    throw Error(ErrorCode::kProtocolViolation, "expected Reply, got " + std::string(msg_type_name(reply.msg_type)));
  }
  return {session.finalize(reply_from_json(reply.payload, shared.m)), false};
}

std::vector<Envelope> SpccResponder::handle(const Envelope& envelope) {
  if (envelope.msg_type == MsgType::kSessionInit) {
    SharedRandomness shared = shared_from_json(envelope.payload);
    const PreparedColumn& column = lookup_(envelope.payload.value("column", json()));
    if (shared.n < 2 || shared.m == 0) throw Error(ErrorCode::kInvalidSession, "session needs n >= 2 and m >= 1");
    if (column.size != shared.n) throw Error(ErrorCode::kAlignmentError, "session n does not match local sample count");
    std::lock_guard lock(mutex_);
    if (!pending_.try_emplace(envelope.session_id, Pending{shared, &column}).second) {
      throw Error(ErrorCode::kProtocolViolation, "duplicate SessionInit for " + envelope.session_id.hex());
    }
    return {};
  }
  if (envelope.msg_type != MsgType::kMask) {
    throw Error(ErrorCode::kProtocolViolation, "responder cannot handle " + std::string(msg_type_name(envelope.msg_type)));
  }

  Pending pending;
  {
    std::lock_guard lock(mutex_);
    auto it = pending_.find(envelope.session_id);
    if (it == pending_.end()) throw Error(ErrorCode::kProtocolViolation, "Mask before SessionInit");
    pending = it->second;
    pending_.erase(it);
  }
  if (pending.column->constant()) {
    return {make_control(envelope.session_id, {{"op", "constant_feature"}})};
  }
  ResponderSession session(envelope.session_id, MaskMatrix::derive(pending.shared));
  const MaskedVector z = masked_vector_from_json(envelope.payload, pending.shared.n);
  const ResponderReply reply = session.reply(z, *pending.column->ranks);
  return {Envelope{envelope.session_id, 0, MsgType::kReply, to_json(reply)}};
}

Correlation run_spcc_spearman(std::span<const double> alice_data, std::span<const double> bob_data,
                              const SharedRandomness& shared, TransportKind transport, std::uint64_t private_seed) {
  if (alice_data.size() != bob_data.size()) throw Error(ErrorCode::kInvalidInput, "vectors differ in length");
  const PreparedColumn alice = prepare_column(alice_data);
  const PreparedColumn bob = prepare_column(bob_data);
  if (alice.constant() || bob.constant()) return {0.0, true};

  SpccResponder responder([&bob](const json&) -> const PreparedColumn& { return bob; });
  Handler handler = [&responder](const Envelope& e) { return responder.handle(e); };
  const SessionId id = derive_session_id({shared.seed, shared.n, shared.m});

  if (transport == TransportKind::kInProcess) {
    InProcNetwork network;
    network.serve("bob", handler);
    auto connection = network.connect("bob");
    return spcc_initiate(*connection, id, shared, alice, private_seed, json());
  }
  TcpServer server("127.0.0.1:0", handler);
  TcpNetwork network;
  auto connection = network.connect(server.address());
  Correlation out = spcc_initiate(*connection, id, shared, alice, private_seed, json());
  connection.reset();
  server.stop();
  return out;
}

}  // namespace vflrps
