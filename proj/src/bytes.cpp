#include "qpay/bytes.hpp"

#include <bit>
#include <cstdio>

namespace qpay {

std::uint64_t fnv1a64(std::span<const std::uint8_t> data, std::uint64_t h) {
  for (auto c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a64(std::string_view text, std::uint64_t h) {
  return fnv1a64(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()), h);
}

std::string to_hex(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void ByteWriter::le(std::uint64_t v, int nbytes) {
  for (int i = 0; i < nbytes; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::be(std::uint64_t v, int nbytes) {
  for (int i = nbytes - 1; i >= 0; --i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str16(std::string_view s) {
  if (s.size() > 0xFFFF) throw FormatError("string too long for u16 length prefix");
  u16(static_cast<std::uint16_t>(s.size()));
  out_.insert(out_.end(), s.begin(), s.end());
}

void ByteReader::need(std::size_t n) const {
  if (remaining() < n) throw FormatError("truncated input");
}

std::uint64_t ByteReader::le(int nbytes) {
  need(nbytes);
  std::uint64_t v = 0;
  for (int i = 0; i < nbytes; ++i) v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
  pos_ += nbytes;
  return v;
}

std::uint64_t ByteReader::be(int nbytes) {
  need(nbytes);
  std::uint64_t v = 0;
  for (int i = 0; i < nbytes; ++i) v = (v << 8) | in_[pos_ + i];
  pos_ += nbytes;
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::span<const std::uint8_t> ByteReader::bytes(std::size_t n) {
  need(n);
  auto s = in_.subspan(pos_, n);
  pos_ += n;
  return s;
}

std::string ByteReader::str16() {
  auto n = u16();
  auto b = bytes(n);
  return std::string(b.begin(), b.end());
}

void ByteReader::expect_end() const {
  if (remaining() != 0) throw FormatError("trailing bytes after record");
}

Bytes pack2(std::span<const std::uint8_t> values) {
  Bytes out((values.size() + 3) / 4, 0);
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (values[j] > 3) throw FormatError("value does not fit in two bits");
    out[j / 4] |= static_cast<std::uint8_t>(values[j] << (2 * (j % 4)));
  }
  return out;
}

std::vector<std::uint8_t> unpack2(std::span<const std::uint8_t> packed, std::size_t count) {
  if (packed.size() != (count + 3) / 4) throw FormatError("packed array has wrong size");
  std::vector<std::uint8_t> out(count);
  for (std::size_t j = 0; j < count; ++j) out[j] = (packed[j / 4] >> (2 * (j % 4))) & 3u;
  return out;
}

}  // namespace qpay
