#include "qpay/quantum.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace qpay {

namespace {

constexpr std::uint8_t kFormatVersion = 1;

void write_magic(ByteWriter& w, const char (&magic)[5]) {
  for (int i = 0; i < 4; ++i) w.u8(static_cast<std::uint8_t>(magic[i]));
}

void read_magic(ByteReader& r, const char (&magic)[5]) {
  for (int i = 0; i < 4; ++i)
    if (r.u8() != static_cast<std::uint8_t>(magic[i]))
      throw FormatError(std::string("bad magic, expected ") + magic);
  if (auto v = r.u8(); v != kFormatVersion) throw FormatError("unsupported format version");
}

bool valid_prob(double p) { return p >= 0.0 && p <= 1.0; }

}  // namespace

void ChannelModel::validate() const {
  if (!valid_prob(loss_prob) || !valid_prob(flip_prob_hv) || !valid_prob(flip_prob_da) ||
      !valid_prob(multi_prob))
    throw std::invalid_argument("channel probabilities must lie in [0,1]");
  if (loss_prob + multi_prob > 1.0) throw std::invalid_argument("loss_prob + multi_prob exceeds 1");
  if (max_multi < 2 || max_multi > 255) throw std::invalid_argument("max_multi must be in [2,255]");
}

std::pair<StateString, QuantumToken> generate_token(std::size_t length, const Rng& rng) {
  if (length == 0) throw std::invalid_argument("token length must be positive");
  StateString states;
  states.bits.resize(length);
  states.bases.resize(length);
  QuantumToken token;
  token.photons.resize(length);
  for (std::size_t j = 0; j < length; ++j) {
    const std::uint64_t draw = rng.child(j).next();
    states.bits[j] = static_cast<std::uint8_t>(draw & 1u);
    states.bases[j] = basis_from_bit((draw >> 1) & 1u);
    token.photons[j] = TransmittedPhoton{PhotonKind::Single, states.at(j), 1, 0.0};
  }
  return {std::move(states), std::move(token)};
}

QuantumToken prepare(const StateString& states) {
  if (states.bits.size() != states.bases.size())
    throw std::invalid_argument("bit and basis strings differ in length");
  QuantumToken token;
  token.photons.reserve(states.size());
  for (std::size_t j = 0; j < states.size(); ++j)
    token.photons.push_back({PhotonKind::Single, states.at(j), 1, 0.0});
  return token;
}

void transmit_range(std::span<TransmittedPhoton> photons, std::size_t first_index,
                    const ChannelModel& channel, const Rng& rng) {
  for (std::size_t k = 0; k < photons.size(); ++k) {
    auto& p = photons[k];
    if (p.kind == PhotonKind::Vacuum) continue;
    Rng local = rng.child(first_index + k);
    const double u = local.uniform();
    if (u < channel.loss_prob) {
      p.kind = PhotonKind::Vacuum;
      p.count = 0;
      p.flip_prob = 0.0;
      continue;
    }
    if (u < channel.loss_prob + channel.multi_prob) {
      // Photon number beyond two follows a geometric tail with ratio multi_prob.
      unsigned n = 2;
      while (n < channel.max_multi && local.bernoulli(channel.multi_prob)) ++n;
      p.kind = PhotonKind::Multi;
      p.count = static_cast<std::uint8_t>(std::max<unsigned>(n, p.count));
    }
    const double f = channel.flip_for(p.state.basis);
    p.flip_prob = p.flip_prob + f - 2.0 * p.flip_prob * f;
  }
}

QuantumToken transmit(const QuantumToken& token, const ChannelModel& channel, const Rng& rng) {
  channel.validate();
  QuantumToken out = token;
  transmit_range(out.photons, 0, channel, rng);
  return out;
}

double probability_zero(const Bb84State& state, double flip, double angle_deg) {
  const double d = (angle_deg - state.polarization()) * std::numbers::pi / 180.0;
  const double c2 = std::cos(d) * std::cos(d);
  return (1.0 - flip) * c2 + flip * (1.0 - c2);
}

Outcome measure_copy_at_angle(const Bb84State& state, double flip, double angle_deg, Rng& rng) {
  return rng.uniform() < probability_zero(state, flip, angle_deg) ? Outcome::Zero : Outcome::One;
}

Outcome measure(const TransmittedPhoton& photon, Basis basis, Rng& rng) {
  if (photon.kind == PhotonKind::Vacuum) return Outcome::NoClick;
  const bool flipped = rng.bernoulli(photon.flip_prob);
  const bool coin = rng.coin();
  if (basis != photon.state.basis) return outcome_from_bit(coin);
  return outcome_from_bit(photon.state.bit ^ static_cast<unsigned>(flipped));
}

Outcome measure_at_angle(const TransmittedPhoton& photon, double angle_deg, Rng& rng) {
  if (!(angle_deg >= 0.0 && angle_deg < 180.0))
    throw std::invalid_argument("measurement angle must lie in [0,180)");
  if (photon.kind == PhotonKind::Vacuum) return Outcome::NoClick;
  return measure_copy_at_angle(photon.state, photon.flip_prob, angle_deg, rng);
}

Bytes encode_states(const StateString& states) {
  ByteWriter w;
  write_magic(w, "QPDS");
  w.u8(kFormatVersion);
  w.u64(states.size());
  std::vector<std::uint8_t> pairs(states.size());
  for (std::size_t j = 0; j < states.size(); ++j)
    pairs[j] = static_cast<std::uint8_t>(states.bits[j] | (basis_bit(states.bases[j]) << 1));
  w.bytes(pack2(pairs));
  return w.take();
}

StateString decode_states(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  read_magic(r, "QPDS");
  const auto n = r.u64();
  if (n > r.remaining() * 4) throw FormatError("state string length exceeds payload");
  auto pairs = unpack2(r.bytes((n + 3) / 4), n);
  r.expect_end();
  StateString s;
  s.bits.resize(n);
  s.bases.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    s.bits[j] = pairs[j] & 1u;
    s.bases[j] = basis_from_bit(pairs[j] >> 1);
  }
  return s;
}

void write_photons(ByteWriter& w, std::span<const TransmittedPhoton> photons) {
  // Flip noise depends only on the preparation basis, so one value per basis
  // is stored; every non-vacuum photon must agree with it.
  double flip[2] = {-1.0, -1.0};
  std::vector<std::uint8_t> kinds(photons.size()), pairs(photons.size());
  std::vector<std::uint8_t> counts;
  for (std::size_t j = 0; j < photons.size(); ++j) {
    const auto& p = photons[j];
    kinds[j] = static_cast<std::uint8_t>(p.kind);
    pairs[j] = static_cast<std::uint8_t>(p.state.bit | (basis_bit(p.state.basis) << 1));
    if (p.kind == PhotonKind::Vacuum) continue;
    double& f = flip[basis_bit(p.state.basis)];
    if (f < 0.0) f = p.flip_prob;
    else if (f != p.flip_prob) throw FormatError("photons of one basis carry different flip noise");
    if (p.kind == PhotonKind::Multi) counts.push_back(p.count);
  }
  w.f64(flip[basis_bit(Basis::HV)] < 0 ? 0.0 : flip[basis_bit(Basis::HV)]);
  w.f64(flip[basis_bit(Basis::DA)] < 0 ? 0.0 : flip[basis_bit(Basis::DA)]);
  w.bytes(pack2(kinds));
  w.bytes(pack2(pairs));
  w.bytes(counts);
}

std::vector<TransmittedPhoton> read_photons(ByteReader& r, std::size_t count) {
  const double flip_hv = r.f64();
  const double flip_da = r.f64();
  const std::size_t packed = (count + 3) / 4;
  auto kinds = unpack2(r.bytes(packed), count);
  auto pairs = unpack2(r.bytes(packed), count);
  std::vector<TransmittedPhoton> out(count);
  for (std::size_t j = 0; j < count; ++j) {
    auto& p = out[j];
    if (kinds[j] > 2) throw FormatError("invalid photon kind");
    p.kind = static_cast<PhotonKind>(kinds[j]);
    p.state = {static_cast<std::uint8_t>(pairs[j] & 1u), basis_from_bit(pairs[j] >> 1)};
    if (p.kind == PhotonKind::Vacuum) {
      p.count = 0;
      p.flip_prob = 0.0;
      continue;
    }
    p.flip_prob = p.state.basis == Basis::HV ? flip_hv : flip_da;
    p.count = 1;
  }
  for (auto& p : out) {
    if (p.kind != PhotonKind::Multi) continue;
    p.count = r.u8();
    if (p.count < 2) throw FormatError("multi-photon count below two");
  }
  return out;
}

Bytes encode_token(const QuantumToken& token) {
  ByteWriter w;
  write_magic(w, "QPTK");
  w.u8(kFormatVersion);
  w.u64(token.size());
  write_photons(w, token.photons);
  return w.take();
}

QuantumToken decode_token(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  read_magic(r, "QPTK");
  const auto n = r.u64();
  if (n > r.remaining() * 4) throw FormatError("token length exceeds payload");
  QuantumToken t{read_photons(r, n)};
  r.expect_end();
  return t;
}

}  // namespace qpay
