#include "qpay/gf2n.hpp"

#include <stdexcept>
#include <string>

namespace qpay {

GaloisField::GaloisField(unsigned bits, std::uint64_t low)
    : bits_(bits), low_(low), mask_(bits == 64 ? ~0ULL : ((1ULL << bits) - 1)) {}

const GaloisField& GaloisField::of(unsigned bits) {
  static const GaloisField f8(8, 0x1B), f16(16, 0x2B), f32(32, 0x8D), f64(64, 0x1B);
  switch (bits) {
    case 8: return f8;
    case 16: return f16;
    case 32: return f32;
    case 64: return f64;
    default: throw std::invalid_argument("unsupported field width " + std::to_string(bits));
  }
}

std::uint64_t GaloisField::mul(std::uint64_t a, std::uint64_t b) const {
  a &= mask_;
  b &= mask_;
  const std::uint64_t top = 1ULL << (bits_ - 1);
  std::uint64_t r = 0;
  while (b) {
    if (b & 1u) r ^= a;
    b >>= 1;
    const bool carry = (a & top) != 0;
    a = (a << 1) & mask_;
    if (carry) a ^= low_;
  }
  return r;
}

std::uint64_t GaloisField::pow(std::uint64_t a, std::uint64_t e) const {
  std::uint64_t result = 1;
  a &= mask_;
  while (e) {
    if (e & 1u) result = mul(result, a);
    a = mul(a, a);
    e >>= 1;
  }
  return result;
}

}  // namespace qpay
