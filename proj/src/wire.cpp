#include "qpay/wire.hpp"

#include <algorithm>

namespace qpay {

const char* to_string(MessageType t) {
  switch (t) {
    case MessageType::Issue: return "ISSUE";
    case MessageType::TokenChunk: return "TOKEN_CHUNK";
    case MessageType::Cryptogram: return "CRYPTOGRAM";
    case MessageType::VerifyReq: return "VERIFY_REQ";
    case MessageType::Decision: return "DECISION";
  }
  return "UNKNOWN";
}

Bytes encode_frame(const Frame& f) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(f.payload.size() + 2));
  w.u8(kWireVersion);
  w.u8(static_cast<std::uint8_t>(f.type));
  w.bytes(f.payload);
  return w.take();
}

Frame decode_frame(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  const std::uint32_t len = r.u32();
  if (len < 2 || len != r.remaining()) throw FormatError("frame length mismatch");
  if (r.u8() != kWireVersion) throw FormatError("unsupported wire version");
  const std::uint8_t type = r.u8();
  if (type < 1 || type > 5) throw FormatError("unknown message type " + std::to_string(type));
  Frame f;
  f.type = static_cast<MessageType>(type);
  auto body = r.bytes(r.remaining());
  f.payload.assign(body.begin(), body.end());
  return f;
}

namespace {

void expect_type(const Frame& f, MessageType t) {
  if (f.type != t)
    throw FormatError(std::string("expected ") + to_string(t) + ", got " + to_string(f.type));
}

void write_merchant(ByteWriter& w, const MerchantId& m) {
  w.u8(static_cast<std::uint8_t>(m.bytes().size()));
  w.bytes(m.bytes());
}

MerchantId read_merchant(ByteReader& r) {
  const std::size_t n = r.u8();
  try {
    return MerchantId(r.bytes(n));
  } catch (const std::invalid_argument& e) {
    throw FormatError(e.what());
  }
}

// token_id, client, merchant, slot, count, packed outcomes
template <class T>
Frame encode_outcomes(MessageType type, const T& m) {
  ByteWriter w;
  w.u64(m.token_id);
  w.str16(m.client_id);
  write_merchant(w, m.merchant);
  w.u32(m.slot);
  w.u64(m.outcomes.size());
  std::vector<std::uint8_t> raw(m.outcomes.size());
  std::transform(m.outcomes.begin(), m.outcomes.end(), raw.begin(),
                 [](Outcome o) { return static_cast<std::uint8_t>(o); });
  w.bytes(pack2(raw));
  return Frame{type, w.take()};
}

template <class T>
T decode_outcomes(const Frame& f, MessageType type) {
  expect_type(f, type);
  ByteReader r(f.payload);
  T m;
  m.token_id = r.u64();
  m.client_id = r.str16();
  m.merchant = read_merchant(r);
  m.slot = r.u32();
  const std::uint64_t n = r.u64();
  if (n > r.remaining() * 4) throw FormatError("outcome count exceeds payload");
  auto raw = unpack2(r.bytes((n + 3) / 4), n);
  r.expect_end();
  m.outcomes.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (raw[j] > 2) throw FormatError("invalid outcome code");
    m.outcomes[j] = static_cast<Outcome>(raw[j]);
  }
  return m;
}

}  // namespace

Frame encode(const IssueMsg& m) {
  ByteWriter w;
  w.u64(m.token_id);
  w.str16(m.client_id);
  w.u64(m.length);
  w.u32(m.per_bit_group);
  w.u8(m.tag_bits);
  return Frame{MessageType::Issue, w.take()};
}

IssueMsg decode_issue(const Frame& f) {
  expect_type(f, MessageType::Issue);
  ByteReader r(f.payload);
  IssueMsg m;
  m.token_id = r.u64();
  m.client_id = r.str16();
  m.length = r.u64();
  m.per_bit_group = r.u32();
  m.tag_bits = r.u8();
  r.expect_end();
  return m;
}

Frame encode(const TokenChunkMsg& m) {
  if (m.photons.size() > kMaxChunkPositions) throw std::invalid_argument("chunk too large");
  ByteWriter w;
  w.u64(m.token_id);
  w.u64(m.offset);
  w.u32(static_cast<std::uint32_t>(m.photons.size()));
  write_photons(w, m.photons);
  return Frame{MessageType::TokenChunk, w.take()};
}

TokenChunkMsg decode_chunk(const Frame& f) {
  expect_type(f, MessageType::TokenChunk);
  ByteReader r(f.payload);
  TokenChunkMsg m;
  m.token_id = r.u64();
  m.offset = r.u64();
  const std::uint32_t n = r.u32();
  if (n > kMaxChunkPositions) throw FormatError("chunk too large");
  m.photons = read_photons(r, n);
  r.expect_end();
  return m;
}

Frame encode(const Cryptogram& m) { return encode_outcomes(MessageType::Cryptogram, m); }
Frame encode(const VerifyRequest& m) { return encode_outcomes(MessageType::VerifyReq, m); }
Cryptogram decode_cryptogram(const Frame& f) {
  return decode_outcomes<Cryptogram>(f, MessageType::Cryptogram);
}
VerifyRequest decode_verify(const Frame& f) {
  return decode_outcomes<VerifyRequest>(f, MessageType::VerifyReq);
}

Frame encode(const DecisionMsg& m) {
  ByteWriter w;
  w.u64(m.token_id);
  w.str16(m.merchant);
  w.u8(m.decision.accepted ? 1 : 0);
  w.u8(static_cast<std::uint8_t>(m.decision.reason));
  w.f64(m.decision.measured_error);
  w.f64(m.decision.measured_loss);
  w.u64(m.decision.checked_count);
  return Frame{MessageType::Decision, w.take()};
}

DecisionMsg decode_decision(const Frame& f) {
  expect_type(f, MessageType::Decision);
  ByteReader r(f.payload);
  DecisionMsg m;
  m.token_id = r.u64();
  m.merchant = r.str16();
  m.decision.accepted = r.u8() != 0;
  const std::uint8_t reason = r.u8();
  if (reason > 6) throw FormatError("invalid reject reason");
  m.decision.reason = static_cast<RejectReason>(reason);
  m.decision.measured_error = r.f64();
  m.decision.measured_loss = r.f64();
  m.decision.checked_count = r.u64();
  r.expect_end();
  return m;
}

std::vector<TokenChunkMsg> chunk_token(std::uint64_t token_id, const QuantumToken& token,
                                       std::size_t chunk) {
  if (chunk == 0 || chunk > kMaxChunkPositions) throw std::invalid_argument("bad chunk size");
  std::vector<TokenChunkMsg> out;
  for (std::size_t off = 0; off < token.size(); off += chunk) {
    const std::size_t end = std::min(token.size(), off + chunk);
    out.push_back({token_id, off, {token.photons.begin() + off, token.photons.begin() + end}});
  }
  return out;
}

}  // namespace qpay
