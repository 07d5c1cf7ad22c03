#include "qpay/protocol.hpp"

#include "qpay/gf2n.hpp"

namespace qpay {

const char* to_string(RejectReason r) {
  switch (r) {
    case RejectReason::None: return "none";
    case RejectReason::Thresholds: return "thresholds";
    case RejectReason::UnknownToken: return "unknown-token";
    case RejectReason::AlreadySpent: return "already-spent";
    case RejectReason::SlotMisuse: return "slot-misuse";
    case RejectReason::LengthMismatch: return "length-mismatch";
    case RejectReason::UnknownClient: return "unknown-client";
  }
  return "invalid";
}

void VerificationPolicy::validate() const {
  if (!(error_threshold >= 0.0 && error_threshold < 0.5))
    throw std::invalid_argument("error threshold must lie in [0, 0.5)");
  if (!(loss_threshold >= 0.0 && loss_threshold <= 1.0))
    throw std::invalid_argument("loss threshold must lie in [0, 1]");
  if (per_bit_group == 0) throw std::invalid_argument("per_bit_group must be positive");
  if (!GaloisField::supported(tag_bits)) throw std::invalid_argument("tag bits must be 8, 16, 32 or 64");
}

CheckStats check_outcomes(const StateString& states, std::span<const Outcome> outcomes,
                          const BasisString& tag, std::size_t per_bit_group) {
  if (outcomes.size() != states.size()) throw ProtocolError("cryptogram length does not match token");
  CheckStats stats;
  for (std::size_t j = 0; j < outcomes.size(); ++j) {
    if (states.bases[j] != tag.at(segment_of(j, per_bit_group))) continue;
    ++stats.checked;
    if (outcomes[j] == Outcome::NoClick) ++stats.no_click;
    else if (outcomes[j] != outcome_from_bit(states.bits[j])) ++stats.errors;
  }
  return stats;
}

namespace {
Decision reject(RejectReason r) {
  Decision d;
  d.reason = r;
  return d;
}
}  // namespace

Decision ttp_verify(ClientRecord& record, const VerifyRequest& req, const VerificationPolicy& policy) {
  auto it = record.issued.find(req.token_id);
  if (it == record.issued.end()) return reject(RejectReason::UnknownToken);
  TokenEntry& entry = *it->second;
  if (entry.spent.exchange(true)) return reject(RejectReason::AlreadySpent);

  const auto& states = entry.description.states;
  if (req.outcomes.size() != states.size() || states.size() != policy.token_length())
    return reject(RejectReason::LengthMismatch);

  BasisString m;
  try {
    std::lock_guard lock(record.key_mutex);
    m = tag(record.mac_key, req.slot, req.merchant);
  } catch (const MacError&) {
    return reject(RejectReason::SlotMisuse);
  }
  if (m.bits != policy.tag_bits) return reject(RejectReason::LengthMismatch);

  const auto stats = check_outcomes(states, req.outcomes, m, policy.per_bit_group);
  Decision d;
  d.checked_count = stats.checked;
  d.measured_loss = stats.loss();
  d.measured_error = stats.error();
  d.accepted = d.measured_error <= policy.error_threshold && d.measured_loss <= policy.loss_threshold;
  d.reason = d.accepted ? RejectReason::None : RejectReason::Thresholds;
  return d;
}

void TrustedTokenProvider::enroll(const std::string& client_id, MacKey key) {
  std::unique_lock lock(mutex_);
  auto rec = std::make_unique<ClientRecord>();
  rec->client_id = client_id;
  rec->mac_key = std::move(key);
  clients_[client_id] = std::move(rec);
}

bool TrustedTokenProvider::enrolled(const std::string& client_id) const {
  std::shared_lock lock(mutex_);
  return clients_.count(client_id) != 0;
}

IssuedToken TrustedTokenProvider::issue(const std::string& client_id, std::size_t length,
                                        const Rng& rng) {
  std::unique_lock lock(mutex_);
  auto it = clients_.find(client_id);
  if (it == clients_.end()) throw ProtocolError("unknown client '" + client_id + "'");
  const std::uint64_t id = next_token_id_++;
  auto [states, token] = generate_token(length, rng);
  auto entry = std::make_unique<TokenEntry>();
  entry->description = ClassicalDescription{id, client_id, std::move(states)};
  IssuedToken out{entry->description, std::move(token)};
  it->second->issued.emplace(id, std::move(entry));
  owner_[id] = it->second.get();
  return out;
}

Decision TrustedTokenProvider::verify(const VerifyRequest& req, const VerificationPolicy& policy) {
  ClientRecord* rec = nullptr;
  {
    std::shared_lock lock(mutex_);
    auto c = clients_.find(req.client_id);
    if (c == clients_.end()) return reject(RejectReason::UnknownClient);
    rec = c->second.get();
    if (!rec->issued.count(req.token_id)) return reject(RejectReason::UnknownToken);
  }
  // Records and entries are never erased, so the pointer stays valid.
  return ttp_verify(*rec, req, policy);
}

bool TrustedTokenProvider::spent(std::uint64_t token_id) const {
  std::shared_lock lock(mutex_);
  auto it = owner_.find(token_id);
  return it != owner_.end() && it->second->issued.at(token_id)->spent.load();
}

const ClassicalDescription* TrustedTokenProvider::find(std::uint64_t token_id) const {
  std::shared_lock lock(mutex_);
  auto it = owner_.find(token_id);
  return it == owner_.end() ? nullptr : &it->second->issued.at(token_id)->description;
}

std::unique_ptr<TrustedTokenProvider> TrustedTokenProvider::branch() const {
  std::shared_lock lock(mutex_);
  auto copy = std::make_unique<TrustedTokenProvider>();
  copy->next_token_id_ = next_token_id_;
  for (const auto& [id, rec] : clients_) {
    auto r = std::make_unique<ClientRecord>();
    r->client_id = rec->client_id;
    {
      std::lock_guard key_lock(rec->key_mutex);
      r->mac_key = rec->mac_key;
    }
    for (const auto& [tid, entry] : rec->issued) {
      auto e = std::make_unique<TokenEntry>();
      e->description = entry->description;
      e->spent.store(entry->spent.load());
      copy->owner_[tid] = r.get();
      r->issued.emplace(tid, std::move(e));
    }
    copy->clients_.emplace(id, std::move(r));
  }
  return copy;
}

Cryptogram client_cryptogram(MacKey& key, std::uint32_t slot, const MerchantId& merchant,
                             const QuantumToken& token, const VerificationPolicy& policy,
                             const Rng& rng, std::uint64_t token_id, const std::string& client_id) {
  if (token.size() != policy.token_length())
    throw ProtocolError("token length " + std::to_string(token.size()) + " does not match N*T = " +
                        std::to_string(policy.token_length()));
  const BasisString m = tag(key, slot, merchant);
  if (m.bits != policy.tag_bits) throw ProtocolError("MAC width does not match policy tag bits");
  Cryptogram c;
  c.token_id = token_id;
  c.client_id = client_id;
  c.merchant = merchant;
  c.slot = slot;
  c.outcomes.resize(token.size());
  for (std::size_t j = 0; j < token.size(); ++j) {
    Rng local = rng.child(j);
    c.outcomes[j] = measure(token.photons[j], m.at(segment_of(j, policy.per_bit_group)), local);
  }
  return c;
}

VerifyRequest merchant_forward(const Cryptogram& crypt, const MerchantId& merchant) {
  if (!(crypt.merchant == merchant))
    throw ProtocolError("cryptogram was made for merchant '" + crypt.merchant.str() + "', not '" +
                        merchant.str() + "'");
  return VerifyRequest{crypt.token_id, crypt.client_id, crypt.merchant, crypt.slot, crypt.outcomes};
}

}  // namespace qpay
