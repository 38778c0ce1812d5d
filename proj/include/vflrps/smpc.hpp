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

// Two-party secure Spearman correlation by masked scalar product.
//
// Both parties rank and standardize their column locally. They share a
// seed from which each derives the same n x m matrix A. The initiator
// draws a private r (length m) and sends z = x + A r. The responder returns
// s = z.y and v = A^T y. The initiator recovers x.y = s - v.r and divides
// by n. Neither raw ranks nor r ever leave their owner.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <vector>

#include "vflrps/numerics.hpp"
#include "vflrps/transport.hpp"

namespace vflrps {

struct SharedRandomness {
  std::uint64_t seed = 0;
  std::size_t n = 0;
  std::size_t m = 0;
};

// ceil(n / 2), at least 1.
std::size_t default_mask_width(std::size_t n);

// Seed for A derived from a session id.
std::uint64_t mask_seed_for(const SessionId& id);

// The shared n x m mask matrix. Seed-derived matrices are never stored:
// entry (i, j) is position i*m + j + 1 of the SplitMix64 stream for the
// seed, mapped to [-1, 1), and products stream over rows.
class MaskMatrix {
 public:
  // Throws InvalidSession for n < 2 or m == 0.
  static MaskMatrix derive(const SharedRandomness& shared);
  // Explicit row-major values.
  static MaskMatrix from_values(std::size_t n, std::size_t m, std::vector<double> row_major);

  std::size_t rows() const noexcept { return n_; }
  std::size_t cols() const noexcept { return m_; }
  double at(std::size_t i, std::size_t j) const;

  std::vector<double> multiply(std::span<const double> r) const;            // A r
  std::vector<double> multiply_transpose(std::span<const double> y) const;  // A^T y
  std::vector<double> materialize() const;                                  // row-major

 private:
  std::size_t n_ = 0;
  std::size_t m_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> dense_;
};

inline MaskMatrix derive_mask_matrix(const SharedRandomness& shared) { return MaskMatrix::derive(shared); }

struct MaskedVector {
  std::vector<double> z;
};

struct ResponderReply {
  double s = 0.0;
  std::vector<double> v;
};

enum class SessionRole { kInitiator, kResponder };
enum class SessionState { kCreated, kMaskSent, kReplySent, kFinalized, kFailed };

// Initiator ("Alice") state machine: Created -> MaskSent -> Finalized.
// Any call out of order moves the session to Failed and throws ProtocolViolation.
class InitiatorSession {
 public:
  InitiatorSession(SessionId id, MaskMatrix mask, std::uint64_t private_seed);

  const SessionId& id() const noexcept { return id_; }
  SessionState state() const noexcept { return state_; }

  // Draws r (uniform_pm1 draws of SplitMix64(derive_seed({private_seed, id.hi, id.lo})))
  // and returns z = x + A r.
  MaskedVector mask(const StandardizedRanks& x);
  // Same with a caller-supplied r.
  MaskedVector mask_with(const StandardizedRanks& x, std::vector<double> r);
  // (s - v.r) / n
  double finalize(const ResponderReply& reply);

 private:
  void fail(const char* what);

  SessionId id_;
  MaskMatrix mask_;
  std::uint64_t private_seed_;
  SessionState state_ = SessionState::kCreated;
  std::vector<double> private_r_;
};

// Responder ("Bob") state machine: Created -> ReplySent.
class ResponderSession {
 public:
  ResponderSession(SessionId id, MaskMatrix mask);

  const SessionId& id() const noexcept { return id_; }
  SessionState state() const noexcept { return state_; }

  ResponderReply reply(const MaskedVector& z, const StandardizedRanks& y);

 private:
  SessionId id_;
  MaskMatrix mask_;
  SessionState state_ = SessionState::kCreated;
};

// A locally prepared column: standardized ranks, or nothing if constant.
struct PreparedColumn {
  std::optional<StandardizedRanks> ranks;
  std::size_t size = 0;

  bool constant() const noexcept { return !ranks.has_value(); }
};

PreparedColumn prepare_column(std::span<const double> raw);

// Wire payloads.
json to_json(const SharedRandomness& shared, const json& column_ref);
json to_json(const MaskedVector& z);
json to_json(const ResponderReply& reply);
MaskedVector masked_vector_from_json(const json& payload, std::size_t n);
ResponderReply reply_from_json(const json& payload, std::size_t m);

// Initiator side over a connection: sends SessionInit then Mask and waits for
// Reply (or Control{constant_feature}). A constant local column returns
// {0, true} without any message. Transport failures become SessionAborted.
Correlation spcc_initiate(Connection& connection, const SessionId& id, const SharedRandomness& shared,
                          const PreparedColumn& column, std::uint64_t private_seed, const json& column_ref);

// Responder side: serves any number of concurrent sessions. The lookup maps
// the SessionInit's column reference to the local prepared column.
class SpccResponder {
 public:
  using ColumnLookup = std::function<const PreparedColumn&(const json& column_ref)>;

  explicit SpccResponder(ColumnLookup lookup) : lookup_(std::move(lookup)) {}

  // Handles SessionInit (no reply) and Mask (Reply or Control{constant_feature}).
  std::vector<Envelope> handle(const Envelope& envelope);

 private:
  struct Pending {
    SharedRandomness shared;
    const PreparedColumn* column = nullptr;
  };

  ColumnLookup lookup_;
  std::mutex mutex_;
  std::map<SessionId, Pending> pending_;
};

enum class TransportKind { kInProcess, kTcp };

// End-to-end: ranks both vectors, serves Bob's side on the chosen transport
// and runs Alice's side against it.
Correlation run_spcc_spearman(std::span<const double> alice_data, std::span<const double> bob_data,
                              const SharedRandomness& shared, TransportKind transport,
                              std::uint64_t private_seed = 0x5EED);

}  // namespace vflrps
