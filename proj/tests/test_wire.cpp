#include <doctest.h>

#include <thread>

#include "qpay/wire.hpp"

using namespace qpay;

TEST_CASE("frame layout: length, version, type, payload") {
  const Frame f{MessageType::Decision, {1, 2, 3}};
  const Bytes b = encode_frame(f);
  REQUIRE(b.size() == 9);
  CHECK(b[0] == 5);
  CHECK(b[1] == 0);
  CHECK(b[4] == kWireVersion);
  CHECK(b[5] == 5);
  const Frame back = decode_frame(b);
  CHECK(back.type == f.type);
  CHECK(back.payload == f.payload);

  Bytes bad = b;
  bad[4] = 9;
  CHECK_THROWS_AS(decode_frame(bad), FormatError);
  bad = b;
  bad[5] = 0;
  CHECK_THROWS_AS(decode_frame(bad), FormatError);
  bad = b;
  bad.pop_back();
  CHECK_THROWS_AS(decode_frame(bad), FormatError);
}

TEST_CASE("messages round trip") {
  const IssueMsg issue{7, "alice", 3200, 100, 32};
  CHECK(decode_issue(encode(issue)) == issue);

  auto [states, token] = generate_token(70'000, Rng(1));
  const QuantumToken noisy = transmit(token, {0.2, 0.01, 0.03, 0.07, 3}, Rng(2));
  const auto chunks = chunk_token(7, noisy);
  REQUIRE(chunks.size() == 2);
  CHECK(chunks[0].photons.size() == kMaxChunkPositions);
  CHECK(chunks[1].offset == kMaxChunkPositions);
  for (const auto& c : chunks) CHECK(decode_chunk(encode(c)) == c);

  Cryptogram c{7, "alice", MerchantId("shop"), 3, {Outcome::Zero, Outcome::NoClick, Outcome::One}};
  const Cryptogram cb = decode_cryptogram(encode(c));
  CHECK(cb.outcomes == c.outcomes);
  CHECK(cb.merchant == c.merchant);
  CHECK(cb.slot == 3);
  const VerifyRequest vr{7, "alice", MerchantId("shop"), 3, c.outcomes};
  const VerifyRequest vb = decode_verify(encode(vr));
  CHECK(vb.outcomes == vr.outcomes);
  CHECK(vb.token_id == 7);

  const DecisionMsg d{7, "shop", Decision{true, RejectReason::None, 0.02, 0.22, 12345}};
  CHECK(decode_decision(encode(d)) == d);
  CHECK_THROWS_AS(decode_issue(encode(d)), FormatError);
}

TEST_CASE("cryptograms carry outcomes only, no basis information") {
  const std::size_t n = 1001;
  Cryptogram c{1, "alice", MerchantId("shop"), 0, std::vector<Outcome>(n, Outcome::One)};
  const Frame f = encode(c);
  // token id, client, merchant, slot, count, two bits per outcome
  CHECK(f.payload.size() == 8 + 2 + 5 + 1 + 4 + 4 + 8 + (n + 3) / 4);
}

TEST_CASE("in-memory pipe delivers frames in order and reports a closed peer") {
  auto [a, b] = memory_pipe();
  a->send(Frame{MessageType::Issue, {1}});
  a->send(Frame{MessageType::Decision, {2}});
  CHECK(b->receive().payload == Bytes{1});
  CHECK(b->receive().type == MessageType::Decision);
  b->send(Frame{MessageType::Cryptogram, {}});
  CHECK(a->receive().type == MessageType::Cryptogram);
  a.reset();
  CHECK_THROWS_AS(b->receive(), TransportError);
  CHECK_THROWS_AS(b->send(Frame{}), TransportError);
}

TEST_CASE("loopback sockets carry the same frames") {
  LoopbackListener l;
  CHECK(l.port() != 0);
  std::unique_ptr<Endpoint> server;
  std::thread t([&] { server = l.accept(); });
  auto client = connect_loopback(l.port());
  t.join();
  auto [states, token] = generate_token(100'000, Rng(3));
  for (const auto& c : chunk_token(1, token)) client->send(encode(c));
  QuantumToken got;
  for (int i = 0; i < 2; ++i) {
    auto c = decode_chunk(server->receive());
    got.photons.insert(got.photons.end(), c.photons.begin(), c.photons.end());
  }
  CHECK(got == token);
  client->close();
  CHECK_THROWS_AS(server->receive(), TransportError);
}
