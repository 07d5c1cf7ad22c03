#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "qpay/bytes.hpp"
#include "qpay/quantum.hpp"
#include "qpay/rng.hpp"

namespace qpay {

class MacError : public std::runtime_error {
 public:
  enum class Code { UnsupportedTagBits, SlotOutOfRange, SlotInUse, InsufficientPad };
  MacError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
  Code code() const { return code_; }

 private:
  Code code_;
};

/// A t-bit MAC output read as a basis string. Bit s (s = 0 is the most
/// significant bit of the big-endian serialization) selects the basis for
/// segment s: 0 -> DA, 1 -> HV.
struct BasisString {
  unsigned bits = 0;
  std::uint64_t value = 0;

  Basis at(std::size_t s) const { return basis_from_bit((value >> (bits - 1 - s)) & 1u); }
  Bytes to_bytes() const;
  static BasisString from_bytes(std::span<const std::uint8_t> data);
  friend bool operator==(const BasisString&, const BasisString&) = default;
};

/// Public merchant identifier, 1..kMaxBytes octets.
class MerchantId {
 public:
  static constexpr std::size_t kMaxBytes = 31;
  /// Width of the canonical encoding fed to the MAC.
  static constexpr std::size_t kBlockBytes = kMaxBytes + 1;

  explicit MerchantId(std::string_view name);
  explicit MerchantId(std::span<const std::uint8_t> bytes);

  const Bytes& bytes() const { return bytes_; }
  std::string str() const { return std::string(bytes_.begin(), bytes_.end()); }
  /// Length byte, the identifier, zero padding up to kBlockBytes. Injective
  /// and fixed-width, so every merchant tag uses the same coefficient count.
  Bytes encoded() const;

  friend bool operator==(const MerchantId&, const MerchantId&) = default;

 private:
  Bytes bytes_;
};

struct MacSlot {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  bool used = false;
  Bytes message;  // message bound to the slot once used

  friend bool operator==(const MacSlot&, const MacSlot&) = default;
};

/// n-time key: independent (a, b) pairs over GF(2^t), one per tagging, plus
/// one-time-pad material reserved for key refresh.
class MacKey {
 public:
  MacKey() = default;
  MacKey(unsigned tag_bits, std::vector<MacSlot> slots, Bytes pad, std::size_t pad_offset = 0);

  unsigned tag_bits() const { return tag_bits_; }
  std::size_t slot_count() const { return slots_.size(); }
  const MacSlot& slot(std::size_t i) const;
  MacSlot& slot(std::size_t i);
  std::size_t unused_slots() const;

  const Bytes& pad() const { return pad_; }
  std::size_t pad_offset() const { return pad_offset_; }
  std::size_t pad_remaining() const { return pad_.size() - pad_offset_; }

  /// Bytes of (a, b) material for all slots.
  std::size_t material_bytes() const { return slots_.size() * 2 * (tag_bits_ / 8); }

  friend bool operator==(const MacKey&, const MacKey&) = default;

 private:
  unsigned tag_bits_ = 0;
  std::vector<MacSlot> slots_;
  Bytes pad_;
  std::size_t pad_offset_ = 0;
};

/// Fresh uniform key with `slots` unused slots and pad for `refreshes`
/// later key refreshes.
MacKey keygen(unsigned tag_bits, std::size_t slots, Rng& rng, std::size_t refreshes = 0);

/// Polynomial-evaluation tag sum_{i=1..d} M_i a^i + b over GF(2^t), where
/// M_1..M_d are the message split into t-bit big-endian coefficients (last
/// one zero-padded). Pure: does not touch slot state.
BasisString evaluate(const MacKey& key, std::size_t slot, std::span<const std::uint8_t> message);

/// As `evaluate`, and binds the slot to `message`. Re-tagging the same
/// message returns the same tag; a different message throws SlotInUse.
BasisString tag(MacKey& key, std::size_t slot, std::span<const std::uint8_t> message);
BasisString tag(MacKey& key, std::size_t slot, const MerchantId& merchant);

std::size_t coefficient_count(unsigned tag_bits, std::size_t message_len);
/// d / 2^t. For one coefficient and one slot this is 1/sqrt(|C|) with
/// |C| = 2^(2t) the key space.
double forgery_bound(unsigned tag_bits, std::size_t message_len);
double forgery_bound(const MacKey& key, std::size_t message_len);

struct KeyRefresh {
  MacKey key;
  Bytes ciphertext;
};

/// Draws a new key with the same shape and encrypts its slot material with
/// the next unused pad bytes of `old`. The new key inherits the remaining pad.
KeyRefresh refresh_key(const MacKey& old, Rng& rng);
/// Receiver side of refresh_key, given the same `old` key.
MacKey decrypt_refresh(const MacKey& old, std::span<const std::uint8_t> ciphertext);

/// Key file: "QPMK", u8 version, u8 t, u32 n, u32 pad size, u32 pad offset,
/// then per slot a and b (big-endian, t/8 bytes each), then per slot a used
/// flag and bound message (u8 length + bytes), then the pad.
Bytes encode_key(const MacKey& key);
MacKey decode_key(std::span<const std::uint8_t> data);

}  // namespace qpay
