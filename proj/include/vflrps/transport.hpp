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

// Message transport between parties.
//
// Wire format (see docs/protocol.md): every frame is a 4-byte big-endian
// body length followed by a UTF-8 JSON object
//   {"session_id": "<32 hex>", "seq": <uint>, "msg_type": "<name>", "payload": {...}}
// Two interchangeable transports implement the same Connection/Network
// surface: an in-process registry (every message still goes through the
// byte codec) and framed TCP.

#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <initializer_list>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "vflrps/error.hpp"

namespace vflrps {

using json = nlohmann::json;

inline constexpr std::size_t kMaxFrameBytes = 64u * 1024u * 1024u;

struct SessionId {
  std::uint64_t hi = 0;
  std::uint64_t lo = 0;

  std::string hex() const;
  static SessionId from_hex(std::string_view text);  // throws DecodeError

  auto operator<=>(const SessionId&) const = default;
};

// Deterministic 128-bit id from seed material.
SessionId derive_session_id(std::initializer_list<std::uint64_t> parts);

enum class MsgType {
  kSessionInit,
  kMask,
  kReply,
  kCorrRequest,
  kCorrResult,
  kTrainForward,
  kTrainGradient,
  kControl,
};

std::string_view msg_type_name(MsgType type);
MsgType msg_type_from_name(std::string_view name);  // throws DecodeError

struct Envelope {
  SessionId session_id;
  std::uint64_t seq = 0;
  MsgType msg_type = MsgType::kControl;
  json payload = json::object();
};

std::string encode_body(const Envelope& envelope);
Envelope decode_body(std::string_view body);

// Length-prefixed frame. Throws FrameTooLarge when the body exceeds kMaxFrameBytes.
std::string encode_frame(const Envelope& envelope);
std::uint32_t decode_frame_length(const unsigned char header[4]);

Envelope make_control(const SessionId& session, json payload);
Envelope make_error(const SessionId& session, ErrorCode code, const std::string& message);
bool is_error(const Envelope& envelope);
// Rethrows a Control{error} envelope as the Error it carries.
void throw_if_error(const Envelope& envelope);

// Receiver-side ordering check: seq must strictly increase per session.
class SequenceGuard {
 public:
  void accept(const Envelope& envelope);

 private:
  std::map<SessionId, std::uint64_t> last_;
};

// Sender-side counter: assigns 1, 2, 3, ... per session.
class SequenceStamper {
 public:
  void stamp(Envelope& envelope);

 private:
  std::map<SessionId, std::uint64_t> next_;
};

class Connection {
 public:
  virtual ~Connection() = default;

  // Stamps the next seq for the envelope's session, then delivers it.
  void send(Envelope envelope) {
    stamper_.stamp(envelope);
    send_unstamped(envelope);
  }
  // Delivers the envelope with whatever seq it already carries.
  virtual void send_unstamped(const Envelope& envelope) = 0;
  // Next envelope from the peer; ordering is checked per session.
  virtual Envelope receive() = 0;

  Envelope request(Envelope envelope) {
    send(std::move(envelope));
    return receive();
  }

 private:
  SequenceStamper stamper_;
};

// Replies to one incoming envelope; seq numbers are stamped by the server.
using Handler = std::function<std::vector<Envelope>(const Envelope&)>;

class Network {
 public:
  virtual ~Network() = default;
  virtual std::unique_ptr<Connection> connect(const std::string& address) = 0;
};

struct PartyEndpoint {
  int party_id = 0;  // 0 is the active party
  std::string address;
};

// Runs a handler on one decoded envelope, turning exceptions into Control{error}.
std::vector<Envelope> dispatch(const Handler& handler, const Envelope& envelope);

class InProcNetwork : public Network {
 public:
  // kSerialized pushes every envelope through the frame codec, so both
  // transports see identical bytes. kDirect hands envelopes over as values.
  enum class Mode { kSerialized, kDirect };

  explicit InProcNetwork(Mode mode = Mode::kSerialized) : mode_(mode) {}

  // Throws BindFailure if the address is already served.
  void serve(const std::string& address, Handler handler);
  void unserve(const std::string& address);
  std::unique_ptr<Connection> connect(const std::string& address) override;

 private:
  Mode mode_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Handler>> handlers_;
};

class TcpServer {
 public:
  // address is "host:port"; port 0 picks a free port. Binds immediately,
  // throwing BindFailure on failure, and starts accepting on a background thread.
  TcpServer(const std::string& address, Handler handler);
  ~TcpServer();

  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const;
  std::string address() const;
  void stop();
  // Callable from inside a handler: wait() returns once that handler's
  // replies have been written.
  void request_stop();
  // Blocks until stop() or a drained request_stop().
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

class TcpNetwork : public Network {
 public:
  std::unique_ptr<Connection> connect(const std::string& address) override;
};

// Writes raw bytes to a TCP peer and reads back frames; used to probe servers
// with malformed input.
class RawTcpClient {
 public:
  explicit RawTcpClient(const std::string& address);
  ~RawTcpClient();
  void write(std::string_view bytes);
  Envelope read_envelope();
  // True once the peer has closed the connection.
  bool peer_closed();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::pair<std::string, std::uint16_t> split_host_port(const std::string& address);

}  // namespace vflrps
