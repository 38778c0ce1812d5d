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

#include "vflrps/transport.hpp"

#include <array>
#include <atomic>
#include <cstdio>
#include <list>
#include <thread>

#include <boost/asio.hpp>

#include "vflrps/random.hpp"

namespace vflrps {

namespace asio = boost::asio;
using asio::ip::tcp;

// ---------------------------------------------------------------------------
// Codec

std::string SessionId::hex() const {
  char buf[33];
  std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(hi),
                static_cast<unsigned long long>(lo));
  return std::string(buf, 32);
}

SessionId SessionId::from_hex(std::string_view text) {
  if (text.size() != 32) throw Error(ErrorCode::kDecodeError, "session_id must be 32 hex digits");
  auto parse = [](std::string_view part) {
    std::uint64_t v = 0;
    for (char c : part) {
      v <<= 4;
      if (c >= '0' && c <= '9') v |= static_cast<std::uint64_t>(c - '0');
      else if (c >= 'a' && c <= 'f') v |= static_cast<std::uint64_t>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') v |= static_cast<std::uint64_t>(c - 'A' + 10);
      else throw Error(ErrorCode::kDecodeError, "session_id is not hex");
    }
    return v;
  };
  return SessionId{parse(text.substr(0, 16)), parse(text.substr(16))};
}

SessionId derive_session_id(std::initializer_list<std::uint64_t> parts) {
  const std::uint64_t hi = derive_seed(parts);
  return SessionId{hi, mix64(hi ^ 0xA5A5A5A5A5A5A5A5ULL)};
}

namespace {

constexpr std::array<std::pair<MsgType, std::string_view>, 8> kMsgNames{{
    {MsgType::kSessionInit, "SessionInit"},
    {MsgType::kMask, "Mask"},
    {MsgType::kReply, "Reply"},
    {MsgType::kCorrRequest, "CorrRequest"},
    {MsgType::kCorrResult, "CorrResult"},
    {MsgType::kTrainForward, "TrainForward"},
    {MsgType::kTrainGradient, "TrainGradient"},
    {MsgType::kControl, "Control"},
}};

}  // namespace

std::string_view msg_type_name(MsgType type) {
  for (const auto& [t, name] : kMsgNames) {
    if (t == type) return name;
  }
  return "Unknown";
}

MsgType msg_type_from_name(std::string_view name) {
  for (const auto& [t, n] : kMsgNames) {
    if (n == name) return t;
  }
  throw Error(ErrorCode::kDecodeError, "unknown msg_type '" + std::string(name) + "'");
}

std::string encode_body(const Envelope& envelope) {
  json j = {
      {"session_id", envelope.session_id.hex()},
      {"seq", envelope.seq},
      {"msg_type", msg_type_name(envelope.msg_type)},
      {"payload", envelope.payload},
  };
  return j.dump();
}

Envelope decode_body(std::string_view body) {
  json j = json::parse(body.begin(), body.end(), nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kDecodeError, "frame body is not a JSON object");
  try {
    Envelope e;
    e.session_id = SessionId::from_hex(j.at("session_id").get<std::string>());
    if (!j.at("seq").is_number_unsigned()) throw Error(ErrorCode::kDecodeError, "seq must be an unsigned integer");
    e.seq = j.at("seq").get<std::uint64_t>();
    e.msg_type = msg_type_from_name(j.at("msg_type").get<std::string>());
    e.payload = j.at("payload");
    if (!e.payload.is_object()) throw Error(ErrorCode::kDecodeError, "payload must be an object");
    return e;
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::kDecodeError, ex.what());
  }
}

std::string encode_frame(const Envelope& envelope) {
  std::string body = encode_body(envelope);
  if (body.size() > kMaxFrameBytes) {
    throw Error(ErrorCode::kFrameTooLarge, std::to_string(body.size()) + " byte body exceeds 64 MiB");
  }
  const auto len = static_cast<std::uint32_t>(body.size());
  std::string frame(4, '\0');
  frame[0] = static_cast<char>((len >> 24) & 0xFF);
  frame[1] = static_cast<char>((len >> 16) & 0xFF);
  frame[2] = static_cast<char>((len >> 8) & 0xFF);
  frame[3] = static_cast<char>(len & 0xFF);
  frame += body;
  return frame;
}

std::uint32_t decode_frame_length(const unsigned char header[4]) {
  return (static_cast<std::uint32_t>(header[0]) << 24) | (static_cast<std::uint32_t>(header[1]) << 16) |
         (static_cast<std::uint32_t>(header[2]) << 8) | static_cast<std::uint32_t>(header[3]);
}

Envelope make_control(const SessionId& session, json payload) {
  return Envelope{session, 0, MsgType::kControl, std::move(payload)};
}

Envelope make_error(const SessionId& session, ErrorCode code, const std::string& message) {
  return make_control(session, {{"op", "error"}, {"code", error_code_name(code)}, {"message", message}});
}

bool is_error(const Envelope& envelope) {
  return envelope.msg_type == MsgType::kControl && envelope.payload.value("op", "") == "error";
}

void throw_if_error(const Envelope& envelope) {
  if (!is_error(envelope)) return;
  throw Error(error_code_from_name(envelope.payload.value("code", "")),
              "peer reported: " + envelope.payload.value("message", ""));
}

void SequenceGuard::accept(const Envelope& envelope) {
  auto [it, inserted] = last_.try_emplace(envelope.session_id, envelope.seq);
  if (inserted) return;
  if (envelope.seq <= it->second) {
    throw Error(ErrorCode::kProtocolViolation, "seq " + std::to_string(envelope.seq) + " after " +
                                                   std::to_string(it->second) + " in session " +
                                                   envelope.session_id.hex());
  }
  it->second = envelope.seq;
}

void SequenceStamper::stamp(Envelope& envelope) { envelope.seq = ++next_[envelope.session_id]; }

std::vector<Envelope> dispatch(const Handler& handler, const Envelope& envelope) {
  try {
    return handler(envelope);
  } catch (const Error& e) {
    return {make_error(envelope.session_id, e.code(), e.what())};
  } catch (const std::exception& e) {
    return {make_error(envelope.session_id, ErrorCode::kProtocolViolation, e.what())};
  }
}

std::pair<std::string, std::uint16_t> split_host_port(const std::string& address) {
  const auto colon = address.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kInvalidConfig, "address '" + address + "' lacks a port");
  const std::string port_text = address.substr(colon + 1);
  unsigned long port = 0;
  try {
    std::size_t used = 0;
    port = std::stoul(port_text, &used);
    if (used != port_text.size() || port > 65535) throw std::out_of_range("port");
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidConfig, "bad port in address '" + address + "'");
  }
  return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

// ---------------------------------------------------------------------------
// In-process transport

namespace {

// Server side of one in-process connection: the handler plus its own
// ordering guard and reply stamper, as a TCP connection would have.
class InProcConnection : public Connection {
 public:
  InProcConnection(std::shared_ptr<Handler> handler, InProcNetwork::Mode mode)
      : handler_(std::move(handler)), serialized_(mode == InProcNetwork::Mode::kSerialized) {}

  void send_unstamped(const Envelope& envelope) override {
    Envelope delivered = serialized_ ? round_trip(envelope) : envelope;

    std::vector<Envelope> replies;
    try {
      server_guard_.accept(delivered);
      replies = dispatch(*handler_, delivered);
    } catch (const Error& e) {
      replies = {make_error(delivered.session_id, e.code(), e.what())};
    }
    for (Envelope& reply : replies) {
      server_stamper_.stamp(reply);
      inbox_.push_back(serialized_ ? round_trip(reply) : std::move(reply));
    }
  }

  Envelope receive() override {
    if (inbox_.empty()) throw Error(ErrorCode::kConnectionLost, "no pending message on in-process connection");
    Envelope e = std::move(inbox_.front());
    inbox_.pop_front();
    client_guard_.accept(e);
    return e;
  }

 private:
  static Envelope round_trip(const Envelope& e) {
    const std::string frame = encode_frame(e);
    return decode_body(std::string_view(frame).substr(4));
  }

  std::shared_ptr<Handler> handler_;
  bool serialized_;
  SequenceGuard server_guard_;
  SequenceStamper server_stamper_;
  SequenceGuard client_guard_;
  std::deque<Envelope> inbox_;
};

}  // namespace

void InProcNetwork::serve(const std::string& address, Handler handler) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = handlers_.try_emplace(address, std::make_shared<Handler>(std::move(handler)));
  if (!inserted) throw Error(ErrorCode::kBindFailure, "address '" + address + "' already served");
}

void InProcNetwork::unserve(const std::string& address) {
  std::lock_guard lock(mutex_);
  handlers_.erase(address);
}

std::unique_ptr<Connection> InProcNetwork::connect(const std::string& address) {
  std::lock_guard lock(mutex_);
  auto it = handlers_.find(address);
  if (it == handlers_.end()) throw Error(ErrorCode::kConnectionLost, "nothing served at '" + address + "'");
  return std::make_unique<InProcConnection>(it->second, mode_);
}

// ---------------------------------------------------------------------------
// TCP transport

namespace {

tcp::endpoint resolve(asio::io_context& io, const std::string& address) {
  auto [host, port] = split_host_port(address);
  boost::system::error_code ec;
  tcp::resolver resolver(io);
  auto results = resolver.resolve(host, std::to_string(port), ec);
  if (ec || results.empty()) throw Error(ErrorCode::kConnectionLost, "cannot resolve '" + address + "'");
  return *results.begin();
}

void write_all(tcp::socket& socket, std::string_view bytes) {
  boost::system::error_code ec;
  asio::write(socket, asio::buffer(bytes.data(), bytes.size()), ec);
  if (ec) throw Error(ErrorCode::kConnectionLost, ec.message());
}

// Reads one frame body; returns false on clean EOF before a header.
bool read_frame(tcp::socket& socket, std::string& body) {
  unsigned char header[4];
  boost::system::error_code ec;
  asio::read(socket, asio::buffer(header, 4), ec);
  if (ec == asio::error::eof) return false;
  if (ec) throw Error(ErrorCode::kConnectionLost, ec.message());
  const std::uint32_t len = decode_frame_length(header);
  if (len > kMaxFrameBytes) throw Error(ErrorCode::kFrameTooLarge, std::to_string(len) + " byte frame");
  body.resize(len);
  asio::read(socket, asio::buffer(body.data(), body.size()), ec);
  if (ec) throw Error(ErrorCode::kConnectionLost, ec.message());
  return true;
}

class TcpConnection : public Connection {
 public:
  explicit TcpConnection(const std::string& address) : socket_(io_) {
    boost::system::error_code ec;
    socket_.connect(resolve(io_, address), ec);
    if (ec) throw Error(ErrorCode::kConnectionLost, "connect to '" + address + "': " + ec.message());
    socket_.set_option(tcp::no_delay(true));
  }

  void send_unstamped(const Envelope& envelope) override { write_all(socket_, encode_frame(envelope)); }

  Envelope receive() override {
    std::string body;
    if (!read_frame(socket_, body)) throw Error(ErrorCode::kConnectionLost, "peer closed the connection");
    Envelope e = decode_body(body);
    guard_.accept(e);
    return e;
  }

 private:
  asio::io_context io_;
  tcp::socket socket_;
  SequenceGuard guard_;
};

}  // namespace

struct TcpServer::Impl {
  asio::io_context io;
  tcp::acceptor acceptor{io};
  Handler handler;
  std::thread accept_thread;
  std::mutex mutex;
  std::condition_variable stopped_cv;
  bool stopped = false;
  bool drained = false;
  std::atomic<bool> stop_requested{false};
  std::list<std::shared_ptr<tcp::socket>> sockets;
  std::list<std::thread> workers;

  void serve_connection(std::shared_ptr<tcp::socket> socket) {
    SequenceGuard guard;
    SequenceStamper stamper;
    try {
      std::string body;
      while (read_frame(*socket, body)) {
        std::vector<Envelope> replies;
        Envelope incoming;
        try {
          incoming = decode_body(body);
        } catch (const Error& e) {
          Envelope err = make_error(SessionId{}, e.code(), e.what());
          stamper.stamp(err);
          write_all(*socket, encode_frame(err));
          break;
        }
        try {
          guard.accept(incoming);
          replies = dispatch(handler, incoming);
        } catch (const Error& e) {
          replies = {make_error(incoming.session_id, e.code(), e.what())};
        }
        for (Envelope& reply : replies) {
          stamper.stamp(reply);
          write_all(*socket, encode_frame(reply));
        }
        if (stop_requested.load()) {
          std::lock_guard lock(mutex);
          drained = true;
          stopped_cv.notify_all();
        }
      }
    } catch (const Error& e) {
      if (e.code() == ErrorCode::kFrameTooLarge) {
        Envelope err = make_error(SessionId{}, e.code(), e.what());
        stamper.stamp(err);
        try {
          write_all(*socket, encode_frame(err));
        } catch (const Error&) {
        }
      }
    }
    boost::system::error_code ec;
    socket->shutdown(tcp::socket::shutdown_both, ec);
    socket->close(ec);
  }

  void accept_loop() {
    for (;;) {
      auto socket = std::make_shared<tcp::socket>(io);
      boost::system::error_code ec;
      acceptor.accept(*socket, ec);
      {
        std::lock_guard lock(mutex);
        if (stopped) break;
        if (ec) continue;
        socket->set_option(tcp::no_delay(true), ec);
        sockets.push_back(socket);
        workers.emplace_back([this, socket] { serve_connection(socket); });
      }
    }
  }
};

TcpServer::TcpServer(const std::string& address, Handler handler) : impl_(std::make_unique<Impl>()) {
  impl_->handler = std::move(handler);
  auto [host, port] = split_host_port(address);
  boost::system::error_code ec;
  auto ip = asio::ip::make_address(host == "localhost" ? "127.0.0.1" : host, ec);
  if (ec) throw Error(ErrorCode::kBindFailure, "bad host '" + host + "'");
  tcp::endpoint endpoint(ip, port);
  impl_->acceptor.open(endpoint.protocol(), ec);
  if (!ec) impl_->acceptor.bind(endpoint, ec);
  if (!ec) impl_->acceptor.listen(asio::socket_base::max_listen_connections, ec);
  if (ec) throw Error(ErrorCode::kBindFailure, "bind " + address + ": " + ec.message());
  impl_->accept_thread = std::thread([impl = impl_.get()] { impl->accept_loop(); });
}

TcpServer::~TcpServer() {
  stop();
  if (impl_->accept_thread.joinable()) impl_->accept_thread.join();
  std::list<std::thread> workers;
  {
    std::lock_guard lock(impl_->mutex);
    workers.swap(impl_->workers);
  }
  for (auto& w : workers) w.join();
}

std::uint16_t TcpServer::port() const { return impl_->acceptor.local_endpoint().port(); }

std::string TcpServer::address() const {
  return impl_->acceptor.local_endpoint().address().to_string() + ":" + std::to_string(port());
}

void TcpServer::stop() {
  std::lock_guard lock(impl_->mutex);
  if (impl_->stopped) return;
  impl_->stopped = true;
  // Unblocks the acceptor and every connection reader.
  ::shutdown(impl_->acceptor.native_handle(), SHUT_RDWR);
  for (auto& s : impl_->sockets) ::shutdown(s->native_handle(), SHUT_RDWR);
  impl_->stopped_cv.notify_all();
}

void TcpServer::request_stop() { impl_->stop_requested.store(true); }

void TcpServer::wait() {
  std::unique_lock lock(impl_->mutex);
  impl_->stopped_cv.wait(lock, [&] { return impl_->stopped || impl_->drained; });
}

std::unique_ptr<Connection> TcpNetwork::connect(const std::string& address) {
  return std::make_unique<TcpConnection>(address);
}

struct RawTcpClient::Impl {
  asio::io_context io;
  tcp::socket socket{io};
};

RawTcpClient::RawTcpClient(const std::string& address) : impl_(std::make_unique<Impl>()) {
  boost::system::error_code ec;
  impl_->socket.connect(resolve(impl_->io, address), ec);
  if (ec) throw Error(ErrorCode::kConnectionLost, ec.message());
}

RawTcpClient::~RawTcpClient() = default;

void RawTcpClient::write(std::string_view bytes) { write_all(impl_->socket, bytes); }

Envelope RawTcpClient::read_envelope() {
  std::string body;
  if (!read_frame(impl_->socket, body)) throw Error(ErrorCode::kConnectionLost, "peer closed the connection");
  return decode_body(body);
}

bool RawTcpClient::peer_closed() {
  char byte;
  boost::system::error_code ec;
  impl_->socket.read_some(asio::buffer(&byte, 1), ec);
  return ec == asio::error::eof || ec == asio::error::connection_reset;
}

}  // namespace vflrps
