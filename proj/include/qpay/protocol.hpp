#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpay/itmac.hpp"
#include "qpay/quantum.hpp"
#include "qpay/rng.hpp"

namespace qpay {

class ProtocolError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The TTP's secret record of one issued token.
struct ClassicalDescription {
  std::uint64_t token_id = 0;
  std::string client_id;
  StateString states;

  std::size_t size() const { return states.size(); }
};

/// Verification thresholds and token layout. A token has
/// `per_bit_group * tag_bits` positions; segment s = j / per_bit_group is
/// measured in the basis given by bit s of the tag.
struct VerificationPolicy {
  double error_threshold = 0.035;
  double loss_threshold = 0.30;
  std::size_t per_bit_group = 31250;
  unsigned tag_bits = 32;

  std::size_t token_length() const { return per_bit_group * tag_bits; }
  /// Structural checks only. The e_T < e_d(l_T) check needs the attack
  /// frontier and lives with the run configuration.
  void validate() const;
};

inline std::size_t segment_of(std::size_t position, std::size_t per_bit_group) {
  return position / per_bit_group;
}

struct Cryptogram {
  std::uint64_t token_id = 0;
  std::string client_id;
  MerchantId merchant{"unset"};
  std::uint32_t slot = 0;
  std::vector<Outcome> outcomes;
};

/// What a merchant sends the TTP: the cryptogram fields, unmodified.
struct VerifyRequest {
  std::uint64_t token_id = 0;
  std::string client_id;
  MerchantId merchant{"unset"};
  std::uint32_t slot = 0;
  std::vector<Outcome> outcomes;
};

enum class RejectReason : std::uint8_t {
  None = 0,
  Thresholds = 1,
  UnknownToken = 2,
  AlreadySpent = 3,
  SlotMisuse = 4,
  LengthMismatch = 5,
  UnknownClient = 6,
};

const char* to_string(RejectReason r);

struct Decision {
  bool accepted = false;
  RejectReason reason = RejectReason::None;
  double measured_error = 0.0;
  double measured_loss = 0.0;
  std::uint64_t checked_count = 0;

  friend bool operator==(const Decision&, const Decision&) = default;
};

/// Counts over the checked set: positions whose preparation basis equals the
/// basis the tag assigns to their segment.
struct CheckStats {
  std::uint64_t checked = 0;
  std::uint64_t no_click = 0;
  std::uint64_t errors = 0;

  double loss() const { return checked ? double(no_click) / double(checked) : 1.0; }
  double error() const {
    const auto clicked = checked - no_click;
    return clicked ? double(errors) / double(clicked) : 0.0;
  }
};

CheckStats check_outcomes(const StateString& states, std::span<const Outcome> outcomes,
                          const BasisString& tag, std::size_t per_bit_group);

struct TokenEntry {
  ClassicalDescription description;
  std::atomic<bool> spent{false};
};

struct ClientRecord {
  std::string client_id;
  MacKey mac_key;
  std::mutex key_mutex;  // guards slot marking in mac_key
  std::map<std::uint64_t, std::unique_ptr<TokenEntry>> issued;
};

/// Verification rule on one client record. Marks the token spent whether or
/// not it is accepted.
Decision ttp_verify(ClientRecord& record, const VerifyRequest& req, const VerificationPolicy& policy);

struct IssuedToken {
  ClassicalDescription description;
  QuantumToken token;
};

/// Token issuer and verifier. Issue and verify may run concurrently; the
/// spent flag is a compare-and-set, so of two racing verifies of one token at
/// most one is evaluated.
class TrustedTokenProvider {
 public:
  TrustedTokenProvider() = default;
  TrustedTokenProvider(const TrustedTokenProvider&) = delete;
  TrustedTokenProvider& operator=(const TrustedTokenProvider&) = delete;

  /// Out-of-band enrollment: installs the client's MAC key.
  void enroll(const std::string& client_id, MacKey key);
  bool enrolled(const std::string& client_id) const;

  /// Generates, stores, then returns a fresh token. Throws ProtocolError for
  /// unknown clients.
  IssuedToken issue(const std::string& client_id, std::size_t length, const Rng& rng);
  Decision verify(const VerifyRequest& req, const VerificationPolicy& policy);

  bool spent(std::uint64_t token_id) const;
  const ClassicalDescription* find(std::uint64_t token_id) const;

  /// Independent verifier branch: a deep copy of keys, records and spent
  /// flags that shares nothing with this instance afterwards.
  std::unique_ptr<TrustedTokenProvider> branch() const;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::unique_ptr<ClientRecord>> clients_;
  std::map<std::uint64_t, ClientRecord*> owner_;
  std::uint64_t next_token_id_ = 1;
};

/// Honest client step: tags the merchant in `slot` (binding the slot), then
/// measures position j in the tag's basis for its segment, using stream
/// rng.child(j).
Cryptogram client_cryptogram(MacKey& key, std::uint32_t slot, const MerchantId& merchant,
                             const QuantumToken& token, const VerificationPolicy& policy,
                             const Rng& rng, std::uint64_t token_id, const std::string& client_id);

VerifyRequest merchant_forward(const Cryptogram& crypt, const MerchantId& merchant);

}  // namespace qpay
