#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "qpay/bytes.hpp"
#include "qpay/protocol.hpp"

namespace qpay {

constexpr std::uint8_t kWireVersion = 1;
/// Largest number of token positions carried by one TOKEN_CHUNK frame.
constexpr std::size_t kMaxChunkPositions = 1u << 16;
constexpr std::size_t kMaxFrameBytes = 64u << 20;

enum class MessageType : std::uint8_t {
  Issue = 1,
  TokenChunk = 2,
  Cryptogram = 3,
  VerifyReq = 4,
  Decision = 5,
};

const char* to_string(MessageType t);

/// Frame: u32 length of everything after it, u8 version, u8 type, payload.
struct Frame {
  MessageType type = MessageType::Issue;
  Bytes payload;
};

Bytes encode_frame(const Frame& f);
/// Decodes exactly one frame occupying all of `data`.
Frame decode_frame(std::span<const std::uint8_t> data);

struct IssueMsg {
  std::uint64_t token_id = 0;
  std::string client_id;
  std::uint64_t length = 0;
  std::uint32_t per_bit_group = 0;
  std::uint8_t tag_bits = 0;

  friend bool operator==(const IssueMsg&, const IssueMsg&) = default;
};

struct TokenChunkMsg {
  std::uint64_t token_id = 0;
  std::uint64_t offset = 0;
  std::vector<TransmittedPhoton> photons;

  friend bool operator==(const TokenChunkMsg&, const TokenChunkMsg&) = default;
};

struct DecisionMsg {
  std::uint64_t token_id = 0;
  std::string merchant;
  Decision decision;

  friend bool operator==(const DecisionMsg&, const DecisionMsg&) = default;
};

Frame encode(const IssueMsg& m);
Frame encode(const TokenChunkMsg& m);
Frame encode(const Cryptogram& m);
Frame encode(const VerifyRequest& m);
Frame encode(const DecisionMsg& m);

IssueMsg decode_issue(const Frame& f);
TokenChunkMsg decode_chunk(const Frame& f);
Cryptogram decode_cryptogram(const Frame& f);
VerifyRequest decode_verify(const Frame& f);
DecisionMsg decode_decision(const Frame& f);

/// Splits a token into TOKEN_CHUNK messages of at most kMaxChunkPositions.
std::vector<TokenChunkMsg> chunk_token(std::uint64_t token_id, const QuantumToken& token,
                                       std::size_t chunk = kMaxChunkPositions);

// ---- transports ----------------------------------------------------------

class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One end of a bidirectional, ordered frame channel.
class Endpoint {
 public:
  virtual ~Endpoint() = default;
  virtual void send(const Frame& f) = 0;
  /// Blocks until a frame arrives. Throws TransportError when the peer has
  /// gone away or the stream is malformed.
  virtual Frame receive() = 0;
  virtual void close() = 0;
};

/// Two connected in-memory endpoints. Frames are serialized to bytes and
/// parsed back, the same as on a socket.
std::pair<std::unique_ptr<Endpoint>, std::unique_ptr<Endpoint>> memory_pipe();

/// TCP listener bound to 127.0.0.1 on an ephemeral port.
class LoopbackListener {
 public:
  LoopbackListener();
  ~LoopbackListener();
  LoopbackListener(const LoopbackListener&) = delete;
  LoopbackListener& operator=(const LoopbackListener&) = delete;

  std::uint16_t port() const { return port_; }
  std::unique_ptr<Endpoint> accept(int timeout_ms = 30000);

 private:
  int fd_ = -1;
  std::uint16_t port_ = 0;
};

std::unique_ptr<Endpoint> connect_loopback(std::uint16_t port, int timeout_ms = 30000);

}  // namespace qpay
