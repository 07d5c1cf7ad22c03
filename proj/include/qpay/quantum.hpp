#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qpay/bytes.hpp"
#include "qpay/rng.hpp"

namespace qpay {

/// Polarization basis. The underlying value is the basis bit used in basis
/// strings: 0 selects diagonal/antidiagonal, 1 selects horizontal/vertical.
enum class Basis : std::uint8_t { DA = 0, HV = 1 };

inline Basis basis_from_bit(unsigned bit) { return bit ? Basis::HV : Basis::DA; }
inline unsigned basis_bit(Basis b) { return static_cast<unsigned>(b); }
inline Basis other(Basis b) { return b == Basis::HV ? Basis::DA : Basis::HV; }
/// Angle of the bit-0 polarization of a basis: 0 deg for HV, 45 deg for DA.
inline double basis_angle(Basis b) { return b == Basis::HV ? 0.0 : 45.0; }

struct Bb84State {
  std::uint8_t bit = 0;
  Basis basis = Basis::HV;

  /// (0,HV)->0, (1,HV)->90, (0,DA)->45, (1,DA)->135 degrees.
  double polarization() const { return basis_angle(basis) + 90.0 * bit; }
  friend bool operator==(const Bb84State&, const Bb84State&) = default;
};

enum class PhotonKind : std::uint8_t { Vacuum = 0, Single = 1, Multi = 2 };

/// One token position after (or before) the channel. Multi positions carry
/// `count` copies of the same polarization. `flip_prob` is the bit-flip noise
/// accumulated on the way; it is realized when a copy is measured, never
/// written into the state.
struct TransmittedPhoton {
  PhotonKind kind = PhotonKind::Single;
  Bb84State state;
  std::uint8_t count = 1;
  double flip_prob = 0.0;

  friend bool operator==(const TransmittedPhoton&, const TransmittedPhoton&) = default;
};

struct QuantumToken {
  std::vector<TransmittedPhoton> photons;

  std::size_t size() const { return photons.size(); }
  friend bool operator==(const QuantumToken&, const QuantumToken&) = default;
};

/// Bits and bases of a prepared token, position by position.
struct StateString {
  std::vector<std::uint8_t> bits;
  std::vector<Basis> bases;

  std::size_t size() const { return bits.size(); }
  Bb84State at(std::size_t j) const { return {bits[j], bases[j]}; }
  friend bool operator==(const StateString&, const StateString&) = default;
};

struct ChannelModel {
  double loss_prob = 0.0;
  double flip_prob_hv = 0.0;
  double flip_prob_da = 0.0;
  double multi_prob = 0.0;
  /// Largest photon number emitted on a Multi position.
  unsigned max_multi = 2;

  double flip_for(Basis b) const { return b == Basis::HV ? flip_prob_hv : flip_prob_da; }
  /// Throws std::invalid_argument on out-of-range parameters.
  void validate() const;
};

enum class Outcome : std::uint8_t { Zero = 0, One = 1, NoClick = 2 };

inline Outcome outcome_from_bit(unsigned b) { return b ? Outcome::One : Outcome::Zero; }

/// Prepares `length` uniformly random BB84 states. Position j draws from
/// `rng.child(j)`. Statistically identical to the TTP measuring half of a
/// singlet pair; the singlet anticorrelation is absorbed by recording the
/// partner's (flipped) outcome as the bit.
std::pair<StateString, QuantumToken> generate_token(std::size_t length, const Rng& rng);

/// Token carrying exactly the given states, noiseless single photons.
QuantumToken prepare(const StateString& states);

/// Applies loss, multiphoton emission and per-basis flip noise. Vacuum stays
/// vacuum; flip probabilities compose as independent flips.
QuantumToken transmit(const QuantumToken& token, const ChannelModel& channel, const Rng& rng);
void transmit_range(std::span<TransmittedPhoton> photons, std::size_t first_index,
                    const ChannelModel& channel, const Rng& rng);

/// P(outcome Zero) when a copy of `state` with flip noise `flip` is projected
/// on the polarization at `angle_deg`.
double probability_zero(const Bb84State& state, double flip, double angle_deg);

Outcome measure_copy_at_angle(const Bb84State& state, double flip, double angle_deg, Rng& rng);
Outcome measure(const TransmittedPhoton& photon, Basis basis, Rng& rng);
/// angle_deg must lie in [0, 180).
Outcome measure_at_angle(const TransmittedPhoton& photon, double angle_deg, Rng& rng);

// Binary formats. Header: 4-byte magic, u8 version, u64 length (little-endian).
Bytes encode_states(const StateString& states);
StateString decode_states(std::span<const std::uint8_t> data);
Bytes encode_token(const QuantumToken& token);
QuantumToken decode_token(std::span<const std::uint8_t> data);

/// Headerless photon block used by both the token file and TOKEN_CHUNK frames.
void write_photons(ByteWriter& w, std::span<const TransmittedPhoton> photons);
std::vector<TransmittedPhoton> read_photons(ByteReader& r, std::size_t count);

}  // namespace qpay
