#include "qpay/itmac.hpp"

#include <algorithm>
#include <cmath>

#include "qpay/gf2n.hpp"

namespace qpay {

Bytes BasisString::to_bytes() const {
  ByteWriter w;
  w.be(value, static_cast<int>(bits / 8));
  return w.take();
}

BasisString BasisString::from_bytes(std::span<const std::uint8_t> data) {
  if (!GaloisField::supported(static_cast<unsigned>(data.size() * 8)))
    throw FormatError("basis string must be 1, 2, 4 or 8 bytes");
  ByteReader r(data);
  BasisString s;
  s.bits = static_cast<unsigned>(data.size() * 8);
  s.value = r.be(static_cast<int>(data.size()));
  return s;
}

MerchantId::MerchantId(std::string_view name)
    : MerchantId(std::span(reinterpret_cast<const std::uint8_t*>(name.data()), name.size())) {}

MerchantId::MerchantId(std::span<const std::uint8_t> bytes) : bytes_(bytes.begin(), bytes.end()) {
  if (bytes_.empty() || bytes_.size() > kMaxBytes)
    throw std::invalid_argument("merchant id must have 1.." + std::to_string(kMaxBytes) + " bytes");
}

Bytes MerchantId::encoded() const {
  Bytes out(kBlockBytes, 0);
  out[0] = static_cast<std::uint8_t>(bytes_.size());
  std::copy(bytes_.begin(), bytes_.end(), out.begin() + 1);
  return out;
}

MacKey::MacKey(unsigned tag_bits, std::vector<MacSlot> slots, Bytes pad, std::size_t pad_offset)
    : tag_bits_(tag_bits), slots_(std::move(slots)), pad_(std::move(pad)), pad_offset_(pad_offset) {
  if (!GaloisField::supported(tag_bits))
    throw MacError(MacError::Code::UnsupportedTagBits, "tag bits must be 8, 16, 32 or 64");
  if (pad_offset_ > pad_.size()) throw std::invalid_argument("pad offset beyond pad");
}

const MacSlot& MacKey::slot(std::size_t i) const {
  if (i >= slots_.size()) throw MacError(MacError::Code::SlotOutOfRange, "MAC slot out of range");
  return slots_[i];
}

MacSlot& MacKey::slot(std::size_t i) {
  if (i >= slots_.size()) throw MacError(MacError::Code::SlotOutOfRange, "MAC slot out of range");
  return slots_[i];
}

std::size_t MacKey::unused_slots() const {
  return static_cast<std::size_t>(
      std::count_if(slots_.begin(), slots_.end(), [](const MacSlot& s) { return !s.used; }));
}

namespace {

std::vector<MacSlot> draw_slots(unsigned tag_bits, std::size_t n, Rng& rng) {
  const auto& field = GaloisField::of(tag_bits);
  std::vector<MacSlot> slots(n);
  for (auto& s : slots) {
    s.a = rng.next() & field.mask();
    s.b = rng.next() & field.mask();
  }
  return slots;
}

Bytes slot_material(const std::vector<MacSlot>& slots, unsigned tag_bits) {
  ByteWriter w;
  for (const auto& s : slots) {
    w.be(s.a, static_cast<int>(tag_bits / 8));
    w.be(s.b, static_cast<int>(tag_bits / 8));
  }
  return w.take();
}

}  // namespace

MacKey keygen(unsigned tag_bits, std::size_t slots, Rng& rng, std::size_t refreshes) {
  if (!GaloisField::supported(tag_bits))
    throw MacError(MacError::Code::UnsupportedTagBits, "tag bits must be 8, 16, 32 or 64");
  if (slots == 0) throw std::invalid_argument("a MAC key needs at least one slot");
  auto s = draw_slots(tag_bits, slots, rng);
  Bytes pad(refreshes * slots * 2 * (tag_bits / 8));
  for (auto& byte : pad) byte = static_cast<std::uint8_t>(rng.next());
  return MacKey(tag_bits, std::move(s), std::move(pad));
}

std::size_t coefficient_count(unsigned tag_bits, std::size_t message_len) {
  return (message_len * 8 + tag_bits - 1) / tag_bits;
}

BasisString evaluate(const MacKey& key, std::size_t slot, std::span<const std::uint8_t> message) {
  const auto& s = key.slot(slot);
  const auto& field = GaloisField::of(key.tag_bits());
  const std::size_t width = key.tag_bits() / 8;
  const std::size_t d = coefficient_count(key.tag_bits(), message.size());
  // Horner from the highest power down: acc = (...((M_d) a + M_{d-1}) a ...) a.
  std::uint64_t acc = 0;
  for (std::size_t i = d; i >= 1; --i) {
    std::uint64_t coeff = 0;
    for (std::size_t k = 0; k < width; ++k) {
      const std::size_t idx = (i - 1) * width + k;
      coeff = (coeff << 8) | (idx < message.size() ? message[idx] : 0u);
    }
    acc = field.mul(acc ^ coeff, s.a);
  }
  return BasisString{key.tag_bits(), acc ^ s.b};
}

BasisString tag(MacKey& key, std::size_t slot, std::span<const std::uint8_t> message) {
  auto& s = key.slot(slot);
  if (s.used && !std::equal(s.message.begin(), s.message.end(), message.begin(), message.end()))
    throw MacError(MacError::Code::SlotInUse, "MAC slot already bound to a different message");
  auto result = evaluate(key, slot, message);
  s.used = true;
  s.message.assign(message.begin(), message.end());
  return result;
}

BasisString tag(MacKey& key, std::size_t slot, const MerchantId& merchant) {
  return tag(key, slot, merchant.encoded());
}

double forgery_bound(unsigned tag_bits, std::size_t message_len) {
  const double d = static_cast<double>(std::max<std::size_t>(1, coefficient_count(tag_bits, message_len)));
  return std::ldexp(d, -static_cast<int>(tag_bits));
}

double forgery_bound(const MacKey& key, std::size_t message_len) {
  return forgery_bound(key.tag_bits(), message_len);
}

KeyRefresh refresh_key(const MacKey& old, Rng& rng) {
  const std::size_t need = old.material_bytes();
  if (old.pad_remaining() < need)
    throw MacError(MacError::Code::InsufficientPad, "not enough pad material for a key refresh");
  auto slots = draw_slots(old.tag_bits(), old.slot_count(), rng);
  Bytes ct = slot_material(slots, old.tag_bits());
  for (std::size_t i = 0; i < ct.size(); ++i) ct[i] ^= old.pad()[old.pad_offset() + i];
  return {MacKey(old.tag_bits(), std::move(slots), old.pad(), old.pad_offset() + need), std::move(ct)};
}

MacKey decrypt_refresh(const MacKey& old, std::span<const std::uint8_t> ciphertext) {
  const std::size_t need = old.material_bytes();
  if (ciphertext.size() != need) throw FormatError("refresh ciphertext has wrong length");
  if (old.pad_remaining() < need)
    throw MacError(MacError::Code::InsufficientPad, "not enough pad material for a key refresh");
  Bytes plain(ciphertext.begin(), ciphertext.end());
  for (std::size_t i = 0; i < plain.size(); ++i) plain[i] ^= old.pad()[old.pad_offset() + i];
  ByteReader r(plain);
  std::vector<MacSlot> slots(old.slot_count());
  const int width = static_cast<int>(old.tag_bits() / 8);
  for (auto& s : slots) {
    s.a = r.be(width);
    s.b = r.be(width);
  }
  return MacKey(old.tag_bits(), std::move(slots), old.pad(), old.pad_offset() + need);
}

Bytes encode_key(const MacKey& key) {
  ByteWriter w;
  for (char c : std::string_view("QPMK")) w.u8(static_cast<std::uint8_t>(c));
  w.u8(1);
  w.u8(static_cast<std::uint8_t>(key.tag_bits()));
  w.u32(static_cast<std::uint32_t>(key.slot_count()));
  w.u32(static_cast<std::uint32_t>(key.pad().size()));
  w.u32(static_cast<std::uint32_t>(key.pad_offset()));
  const int width = static_cast<int>(key.tag_bits() / 8);
  for (std::size_t i = 0; i < key.slot_count(); ++i) {
    w.be(key.slot(i).a, width);
    w.be(key.slot(i).b, width);
  }
  for (std::size_t i = 0; i < key.slot_count(); ++i) {
    const auto& s = key.slot(i);
    w.u8(s.used ? 1 : 0);
    if (!s.used) continue;
    if (s.message.size() > 255) throw FormatError("bound message too long for key file");
    w.u8(static_cast<std::uint8_t>(s.message.size()));
    w.bytes(s.message);
  }
  w.bytes(key.pad());
  return w.take();
}

MacKey decode_key(std::span<const std::uint8_t> data) {
  ByteReader r(data);
  for (char c : std::string_view("QPMK"))
    if (r.u8() != static_cast<std::uint8_t>(c)) throw FormatError("bad magic, expected QPMK");
  if (r.u8() != 1) throw FormatError("unsupported key file version");
  const unsigned t = r.u8();
  if (!GaloisField::supported(t)) throw FormatError("unsupported tag width in key file");
  const auto n = r.u32();
  const auto pad_size = r.u32();
  const auto pad_offset = r.u32();
  if (static_cast<std::size_t>(n) * 2 * (t / 8) > r.remaining()) throw FormatError("truncated key file");
  std::vector<MacSlot> slots(n);
  const int width = static_cast<int>(t / 8);
  for (auto& s : slots) {
    s.a = r.be(width);
    s.b = r.be(width);
  }
  for (auto& s : slots) {
    s.used = r.u8() != 0;
    if (!s.used) continue;
    auto len = r.u8();
    auto m = r.bytes(len);
    s.message.assign(m.begin(), m.end());
  }
  auto pad = r.bytes(pad_size);
  r.expect_end();
  if (pad_offset > pad_size) throw FormatError("pad offset beyond pad");
  return MacKey(t, std::move(slots), Bytes(pad.begin(), pad.end()), pad_offset);
}

}  // namespace qpay
