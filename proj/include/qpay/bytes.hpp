#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace qpay {

using Bytes = std::vector<std::uint8_t>;

/// Raised when a binary record or frame cannot be decoded.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t fnv1a64(std::span<const std::uint8_t> data,
                      std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t fnv1a64(std::string_view text, std::uint64_t h = 0xcbf29ce484222325ULL);
std::string to_hex(std::uint64_t v);

class ByteWriter {
 public:
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { le(v, 2); }
  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v);
  void be(std::uint64_t v, int nbytes);
  void bytes(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  void str16(std::string_view s);

  Bytes& data() { return out_; }
  Bytes take() { return std::move(out_); }

 private:
  void le(std::uint64_t v, int nbytes);
  Bytes out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> in) : in_(in) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(le(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(le(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64();
  std::uint64_t be(int nbytes);
  std::span<const std::uint8_t> bytes(std::size_t n);
  std::string str16();

  std::size_t remaining() const { return in_.size() - pos_; }
  void expect_end() const;

 private:
  std::uint64_t le(int nbytes);
  void need(std::size_t n) const;
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

/// Packs values < 4 at two bits each, position j in bits [2j, 2j+2) of the
/// little-endian bit stream (byte j/4, shift 2*(j%4)).
Bytes pack2(std::span<const std::uint8_t> values);
std::vector<std::uint8_t> unpack2(std::span<const std::uint8_t> packed, std::size_t count);

}  // namespace qpay
