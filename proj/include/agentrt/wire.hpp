#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstdint>
#include <cstring>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "agentrt/action.hpp"
#include "agentrt/base64.hpp"
#include "agentrt/image.hpp"
#include "agentrt/specdecode.hpp"

namespace agentrt {

// ---------------------------------------------------------------------------
// Errors

class WireError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class ConnectRefused : public WireError {
 public:
  using WireError::WireError;
};
class HandshakeTimeout : public WireError {
 public:
  using WireError::WireError;
};
class SessionClosed : public WireError {
 public:
  using WireError::WireError;
};
class EncodeError : public WireError {
 public:
  using WireError::WireError;
};
class StreamTruncated : public WireError {
 public:
  using WireError::WireError;
};
class SeqMismatch : public WireError {
 public:
  using WireError::WireError;
};

// ---------------------------------------------------------------------------
// Message framing: 4-byte big-endian length prefix + JSON body.

enum class MessageType { Hello, Obs, Reasoning, Chunk, Err };

inline const char* message_type_name(MessageType t) {
  switch (t) {
    case MessageType::Hello: return "HELLO";
    case MessageType::Obs: return "OBS";
    case MessageType::Reasoning: return "REASONING";
    case MessageType::Chunk: return "CHUNK";
    case MessageType::Err: return "ERR";
  }
  return "?";
}

inline MessageType message_type_from_name(const std::string& s) {
  if (s == "HELLO") return MessageType::Hello;
  if (s == "OBS") return MessageType::Obs;
  if (s == "REASONING") return MessageType::Reasoning;
  if (s == "CHUNK") return MessageType::Chunk;
  if (s == "ERR") return MessageType::Err;
  throw EncodeError("unknown message type: " + s);
}

struct WireMessage {
  MessageType type = MessageType::Hello;
  nlohmann::json body;  // payload fields, excluding "type"

  friend bool operator==(const WireMessage& a, const WireMessage& b) {
    return a.type == b.type && a.body == b.body;
  }
};

/// Deterministic byte encoding: identical message => identical bytes.
inline std::vector<std::uint8_t> encode_message(const WireMessage& m) {
  nlohmann::json j = m.body;
  j["type"] = message_type_name(m.type);
  std::string text = j.dump();  // keys emitted in sorted order
  if (text.size() > 0x7FFFFFFF) throw EncodeError("message too large");
  std::vector<std::uint8_t> out(4 + text.size());
  std::uint32_t len = static_cast<std::uint32_t>(text.size());
  out[0] = static_cast<std::uint8_t>(len >> 24);
  out[1] = static_cast<std::uint8_t>(len >> 16);
  out[2] = static_cast<std::uint8_t>(len >> 8);
  out[3] = static_cast<std::uint8_t>(len);
  std::memcpy(out.data() + 4, text.data(), text.size());
  return out;
}

inline WireMessage decode_message(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) throw EncodeError("short frame");
  std::uint32_t len = (static_cast<std::uint32_t>(bytes[0]) << 24) |
                      (static_cast<std::uint32_t>(bytes[1]) << 16) |
                      (static_cast<std::uint32_t>(bytes[2]) << 8) |
                      static_cast<std::uint32_t>(bytes[3]);
  if (bytes.size() != 4 + len) throw EncodeError("frame length mismatch");
  nlohmann::json j = nlohmann::json::parse(bytes.begin() + 4, bytes.end());
  WireMessage m;
  m.type = message_type_from_name(j.at("type").get<std::string>());
  j.erase("type");
  m.body = std::move(j);
  return m;
}

// ---------------------------------------------------------------------------
// Frames and requests

struct ObservationFrame {
  std::uint64_t seq = 0;
  std::int64_t captured_at_ms = 0;  // host monotonic time
  std::vector<std::uint8_t> jpeg;   // 1280x720 JPEG bytes
};

struct InferenceRequest {
  std::uint64_t seq = 0;
  std::string image_b64;
  std::string context_hint;  // optional cache-plan digest
};

inline WireMessage to_message(const InferenceRequest& req) {
  WireMessage m;
  m.type = MessageType::Obs;
  m.body["seq"] = req.seq;
  m.body["image_b64"] = req.image_b64;
  if (!req.context_hint.empty()) m.body["context_hint"] = req.context_hint;
  return m;
}

inline InferenceRequest request_from_message(const WireMessage& m) {
  if (m.type != MessageType::Obs) throw EncodeError("expected OBS message");
  InferenceRequest req;
  req.seq = m.body.at("seq").get<std::uint64_t>();
  req.image_b64 = m.body.at("image_b64").get<std::string>();
  if (m.body.contains("context_hint")) {
    req.context_hint = m.body.at("context_hint").get<std::string>();
  }
  return req;
}

// ---------------------------------------------------------------------------
// Chunk streaming

struct ChunkMessage {
  std::uint64_t seq = 0;
  int index = 0;  // 0 = mouse component, 1..6 = key chunks
  std::string payload;
  bool terminal = false;

  friend bool operator==(const ChunkMessage&, const ChunkMessage&) = default;
};

inline WireMessage to_message(const ChunkMessage& c) {
  WireMessage m;
  m.type = MessageType::Chunk;
  m.body["seq"] = c.seq;
  m.body["index"] = c.index;
  m.body["payload"] = c.payload;
  m.body["terminal"] = c.terminal;
  return m;
}

inline ChunkMessage chunk_from_message(const WireMessage& m) {
  if (m.type != MessageType::Chunk) throw EncodeError("expected CHUNK message");
  ChunkMessage c;
  c.seq = m.body.at("seq").get<std::uint64_t>();
  c.index = m.body.at("index").get<int>();
  c.payload = m.body.at("payload").get<std::string>();
  c.terminal = m.body.at("terminal").get<bool>();
  return c;
}

/// True when this token completes an executable chunk: the semicolon ending
/// DZ or K1-K5, or the action-end token after K6. `stage` is the stage the
/// token is emitted into (before advancing).
inline bool detect_chunk_boundary(const DecodeStage& stage,
                                  const ActionToken& token) {
  if (token.kind == TokenKind::Semicolon) {
    return stage.phase == DecodePhase::DZ ||
           (stage.phase >= DecodePhase::K1 && stage.phase <= DecodePhase::K5);
  }
  return token.kind == TokenKind::ActionEnd && stage.phase == DecodePhase::K6;
}

using TokenSource = std::function<std::optional<ActionToken>()>;
using ChunkSink = std::function<void(const ChunkMessage&)>;

/// Walks the action token stream and emits a ChunkMessage the moment each
/// chunk's terminating delimiter is produced. Payload fragments concatenate
/// in index order to the canonical serialized action string.
inline void stream_chunks(std::uint64_t seq, const TokenSource& source,
                          const ChunkSink& sink) {
  DecodeStage stage;
  ChunkMessage current;
  current.seq = seq;
  current.index = 0;
  while (true) {
    std::optional<ActionToken> tok = source();
    if (!tok) {
      if (stage.phase == DecodePhase::Done) return;
      throw StreamTruncated("token source ended mid-chunk");
    }
    bool boundary = detect_chunk_boundary(stage, *tok);
    switch (tok->kind) {
      case TokenKind::Number:
        current.payload += tok->text;
        break;
      case TokenKind::Space:
        current.payload += " ";
        break;
      case TokenKind::Semicolon:
        current.payload += " ;";
        break;
      case TokenKind::Key:
        current.payload += " " + tok->text;
        break;
      case TokenKind::ActionEnd:
        break;  // the marker itself is not part of the action string
    }
    stage = advance_stage(stage, *tok);
    if (boundary || stage.phase == DecodePhase::Done) {
      current.terminal = stage.phase == DecodePhase::Done;
      sink(current);
      if (current.terminal) return;
      int next_index = current.index + 1;
      current = ChunkMessage{};
      current.seq = seq;
      current.index = next_index;
    }
  }
}

/// Mouse payloads start with the integer triple; key chunk payloads begin
/// with a space. The first chunk of an action has no leading space to strip.
class ChunkAssembler {
 public:
  explicit ChunkAssembler(std::uint64_t seq) : seq_(seq) {}

  void accept(const ChunkMessage& c) {
    if (c.seq != seq_) {
      throw SeqMismatch("chunk for seq " + std::to_string(c.seq) +
                        ", expected " + std::to_string(seq_));
    }
    if (c.index != next_index_) {
      throw SeqMismatch("chunk index " + std::to_string(c.index) +
                        ", expected " + std::to_string(next_index_));
    }
    text_ += c.payload;
    ++next_index_;
    if (c.terminal) complete_ = true;
  }

  bool complete() const { return complete_; }
  const std::string& text() const { return text_; }

  ActionSequence action() const {
    if (!complete_) throw StreamTruncated("action not fully received");
    return parse_action(text_);
  }

 private:
  std::uint64_t seq_;
  int next_index_ = 0;
  std::string text_;
  bool complete_ = false;
};

// ---------------------------------------------------------------------------
// Sockets

namespace detail {

class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept {
    if (this != &o) {
      close_fd();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Socket() { close_fd(); }

  bool open() const { return fd_ >= 0; }
  int fd() const { return fd_; }

  void send_all(const std::uint8_t* data, std::size_t n) {
    std::size_t sent = 0;
    while (sent < n) {
      ssize_t r = ::send(fd_, data + sent, n - sent, MSG_NOSIGNAL);
      if (r <= 0) throw SessionClosed("send failed");
      sent += static_cast<std::size_t>(r);
    }
  }

  void recv_all(std::uint8_t* data, std::size_t n) {
    std::size_t got = 0;
    while (got < n) {
      ssize_t r = ::recv(fd_, data + got, n - got, 0);
      if (r <= 0) throw SessionClosed("connection closed by peer");
      got += static_cast<std::size_t>(r);
    }
  }

  void close_fd() {
    if (fd_ >= 0) {
      ::close(fd_);
      fd_ = -1;
    }
  }

 private:
  int fd_ = -1;
};

inline void send_message(Socket& sock, const WireMessage& m) {
  auto bytes = encode_message(m);
  sock.send_all(bytes.data(), bytes.size());
}

inline WireMessage recv_message(Socket& sock) {
  std::uint8_t hdr[4];
  sock.recv_all(hdr, 4);
  std::uint32_t len = (static_cast<std::uint32_t>(hdr[0]) << 24) |
                      (static_cast<std::uint32_t>(hdr[1]) << 16) |
                      (static_cast<std::uint32_t>(hdr[2]) << 8) |
                      static_cast<std::uint32_t>(hdr[3]);
  std::vector<std::uint8_t> frame(4 + len);
  std::memcpy(frame.data(), hdr, 4);
  if (len > 0) sock.recv_all(frame.data() + 4, len);
  return decode_message(frame);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Host-side session

struct TurnResult {
  std::optional<std::string> reasoning;
  std::vector<ChunkMessage> chunks;  // in arrival (index) order
  std::string action_text;
};

/// One persistent TCP session to the inference server: a single long-lived
/// byte stream, one in-flight request in lockstep mode.
class Session {
 public:
  static Session open(const std::string& host, std::uint16_t port,
                      int timeout_ms = 5000) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw ConnectRefused("socket() failed");
    detail::Socket sock(fd);

    timeval tv{timeout_ms / 1000, (timeout_ms % 1000) * 1000};
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
      throw ConnectRefused("bad address: " + host);
    }
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw ConnectRefused("connect to " + host + ":" + std::to_string(port) +
                           " refused");
    }

    Session s(std::move(sock));
    WireMessage hello;
    hello.type = MessageType::Hello;
    hello.body["proto"] = 1;
    detail::send_message(s.sock_, hello);
    WireMessage reply;
    try {
      reply = detail::recv_message(s.sock_);
    } catch (const SessionClosed&) {
      throw HandshakeTimeout("no HELLO reply within timeout");
    }
    if (reply.type != MessageType::Hello) {
      throw HandshakeTimeout("unexpected handshake reply");
    }
    ++s.connect_count_;
    return s;
  }

  /// Encodes and sends one observation. The image must be a 1280x720 JPEG.
  void send_request(const ObservationFrame& frame,
                    const std::string& context_hint = {}) {
    auto dims = jpeg_dimensions(frame.jpeg);
    if (!dims || dims->width != kFrameWidth || dims->height != kFrameHeight) {
      throw EncodeError("frame is not a 1280x720 JPEG");
    }
    if (frame.seq <= last_sent_seq_ && sent_any_) {
      throw SeqMismatch("request seq must strictly increase");
    }
    InferenceRequest req;
    req.seq = frame.seq;
    req.image_b64 = base64_encode(frame.jpeg);
    req.context_hint = context_hint;
    detail::send_message(sock_, to_message(req));
    last_sent_seq_ = frame.seq;
    sent_any_ = true;
  }

  /// Blocks until the full turn for `seq` arrives. `on_chunk`, when set, is
  /// invoked per chunk as it is received (streamed execution path).
  TurnResult receive_turn(std::uint64_t seq, const ChunkSink& on_chunk = {}) {
    TurnResult result;
    ChunkAssembler assembler(seq);
    while (!assembler.complete()) {
      WireMessage m = detail::recv_message(sock_);
      switch (m.type) {
        case MessageType::Reasoning:
          if (m.body.at("seq").get<std::uint64_t>() != seq) {
            throw SeqMismatch("reasoning for wrong seq");
          }
          result.reasoning = m.body.at("text").get<std::string>();
          break;
        case MessageType::Chunk: {
          ChunkMessage c = chunk_from_message(m);
          assembler.accept(c);
          result.chunks.push_back(c);
          if (on_chunk) on_chunk(c);
          break;
        }
        case MessageType::Err:
          throw WireError("server error: " +
                          m.body.value("message", std::string("unknown")));
        default:
          throw EncodeError("unexpected message type mid-turn");
      }
    }
    result.action_text = assembler.text();
    return result;
  }

  int connect_count() const { return connect_count_; }

 private:
  explicit Session(detail::Socket sock) : sock_(std::move(sock)) {}
  detail::Socket sock_;
  int connect_count_ = 0;
  std::uint64_t last_sent_seq_ = 0;
  bool sent_any_ = false;
};

// ---------------------------------------------------------------------------
// Server side

/// Accepts one client and serves requests until the peer disconnects.
class WireServer {
 public:
  explicit WireServer(std::uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw WireError("socket() failed");
    listen_ = detail::Socket(fd);
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
      throw WireError("bind to port " + std::to_string(port) + " failed");
    }
    if (::listen(fd, 1) != 0) throw WireError("listen failed");
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
  }

  std::uint16_t port() const { return port_; }

  void accept_client() {
    int fd = ::accept(listen_.fd(), nullptr, nullptr);
    if (fd < 0) throw WireError("accept failed");
    client_ = detail::Socket(fd);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    WireMessage hello = detail::recv_message(client_);
    if (hello.type != MessageType::Hello) {
      throw EncodeError("client did not send HELLO");
    }
    detail::send_message(client_, hello);
  }

  InferenceRequest read_request() {
    WireMessage m = detail::recv_message(client_);
    return request_from_message(m);
  }

  void send_reasoning(std::uint64_t seq, const std::string& text) {
    WireMessage m;
    m.type = MessageType::Reasoning;
    m.body["seq"] = seq;
    m.body["text"] = text;
    detail::send_message(client_, m);
  }

  void send_chunk(const ChunkMessage& c) {
    detail::send_message(client_, to_message(c));
  }

  void send_error(std::uint64_t seq, const std::string& message) {
    WireMessage m;
    m.type = MessageType::Err;
    m.body["seq"] = seq;
    m.body["message"] = message;
    detail::send_message(client_, m);
  }

  /// Streams one full turn: optional reasoning first, then the action as
  /// delimiter-bounded chunks.
  void send_turn(std::uint64_t seq, const ModelTurn& turn) {
    if (turn.thinking()) send_reasoning(seq, turn.reasoning);
    std::vector<ActionToken> tokens = tokenize_action(turn.action);
    std::size_t i = 0;
    stream_chunks(
        seq,
        [&]() -> std::optional<ActionToken> {
          if (i >= tokens.size()) return std::nullopt;
          return tokens[i++];
        },
        [&](const ChunkMessage& c) { send_chunk(c); });
  }

 private:
  detail::Socket listen_;
  detail::Socket client_;
  std::uint16_t port_ = 0;
};

}  // namespace agentrt
