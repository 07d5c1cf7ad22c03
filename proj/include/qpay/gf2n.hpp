#pragma once

#include <cstdint>

namespace qpay {

/// Binary extension field GF(2^t) for t in {8, 16, 32, 64}, elements held in
/// the low t bits of a uint64_t. Reduction polynomials (fixed for
/// interoperability):
///
///   t=8   x^8  + x^4 + x^3 + x + 1        (0x11B)
///   t=16  x^16 + x^5 + x^3 + x + 1        (0x1002B)
///   t=32  x^32 + x^7 + x^3 + x^2 + 1      (0x1_0000_008D)
///   t=64  x^64 + x^4 + x^3 + x + 1        (0x1_0000_0000_0000_001B)
class GaloisField {
 public:
  /// Throws std::invalid_argument for unsupported widths.
  static const GaloisField& of(unsigned bits);
  static bool supported(unsigned bits) { return bits == 8 || bits == 16 || bits == 32 || bits == 64; }

  unsigned bits() const { return bits_; }
  /// Reduction polynomial without its leading x^t term.
  std::uint64_t reduction_low() const { return low_; }
  std::uint64_t mask() const { return mask_; }

  std::uint64_t mul(std::uint64_t a, std::uint64_t b) const;
  std::uint64_t pow(std::uint64_t a, std::uint64_t e) const;

 private:
  GaloisField(unsigned bits, std::uint64_t low);
  unsigned bits_;
  std::uint64_t low_;
  std::uint64_t mask_;
};

}  // namespace qpay
