#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "qpay/bytes.hpp"
#include "qpay/rng.hpp"

namespace qpay {

using Picoseconds = std::int64_t;

struct TimeTagStream {
  std::uint8_t channel = 0;
  std::vector<Picoseconds> tags;  // nondecreasing

  std::size_t size() const { return tags.size(); }
  /// Throws std::invalid_argument if tags decrease.
  void validate() const;
};

/// Clock of stream b relative to a: a tag at t on a's clock shows up at
/// t + offset + drift_rate * (t - anchor) on b's.
struct ClockModel {
  double offset_ps = 0.0;
  double drift_rate = 0.0;
  Picoseconds anchor = 0;
};

class NoLockError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Peak of the histogram of differences b - a within +-search_range, bins
/// centred on multiples of `bin`. Ties go to the smaller |offset|. Throws
/// NoLockError unless the peak stands more than 5 sigma above the mean bin.
ClockModel estimate_offset(const TimeTagStream& a, const TimeTagStream& b, Picoseconds search_range,
                           Picoseconds bin);

/// Estimates the offset on consecutive segments of a's time span and fits a
/// line through them. Each segment is searched around the offset predicted
/// by the segments before it, and the residual is refitted on the corrected
/// stream while drift within one segment exceeds a bin. Segments without a lock are skipped; fewer than two
/// locked segments throws NoLockError.
ClockModel fit_drift(const TimeTagStream& a, const TimeTagStream& b, Picoseconds segment_length,
                     Picoseconds search_range, Picoseconds bin);

/// t' = t - offset - drift_rate * (t - anchor), rounded; output sorted.
TimeTagStream correct_drift(const TimeTagStream& s, const ClockModel& m);
/// Inverse of correct_drift: maps a-clock tags onto the b clock.
TimeTagStream apply_clock(const TimeTagStream& s, const ClockModel& m);

/// Greedy: each tag of pattern[0] is matched with the earliest unused tag of
/// every other channel within +-window/2 (after subtracting that channel's
/// delay); matched tags are consumed. AllPairs: every combination counts.
enum class CoincidenceMode { Greedy, AllPairs };

std::uint64_t count_coincidences(std::span<const TimeTagStream> streams,
                                 std::span<const std::uint8_t> pattern, Picoseconds window,
                                 std::span<const Picoseconds> delays = {},
                                 CoincidenceMode mode = CoincidenceMode::Greedy);

struct G2Point {
  Picoseconds tau = 0;
  double g2 = 0.0;
  double sigma = 0.0;
  bool valid = false;
  std::uint64_t n_i12 = 0;
  std::uint64_t n_i2 = 0;
};

struct G2Estimate {
  Picoseconds window = 0;
  std::uint64_t n_i = 0;
  std::uint64_t n_i1 = 0;  // at zero delay
  std::vector<G2Point> points;
};

/// g2(tau) = N_i * N_i12(tau) / (N_i1(0) * N_i2(tau)), with D2 delayed by
/// tau. sigma propagates Poisson errors of the four counts. Points with a
/// zero denominator are marked invalid.
G2Estimate g2_heralded(const TimeTagStream& idler, const TimeTagStream& d1, const TimeTagStream& d2,
                       Picoseconds window, std::span<const Picoseconds> tau_axis,
                       CoincidenceMode mode = CoincidenceMode::Greedy);

// ---- tag files -----------------------------------------------------------

/// Records of (u8 channel, u64 picoseconds), little-endian, sorted by time.
Bytes encode_tags(std::span<const TimeTagStream> streams);
/// Splits records back into one stream per channel, ordered by channel id.
std::vector<TimeTagStream> decode_tags(std::span<const std::uint8_t> data);

// ---- synthetic sources ---------------------------------------------------

TimeTagStream poisson_stream(std::uint8_t channel, double rate_hz, Picoseconds duration, Rng& rng);

/// Heralded pair source. Pairs arrive as a Poisson process; each arrival
/// carries a second pair with probability `double_pair_prob`. Every idler
/// photon is detected with `idler_eff`; every signal photon goes to D1 or D2
/// with equal probability and is detected with `signal_eff`. Detector
/// jitter is Gaussian.
struct SpdcSource {
  double pair_rate_hz = 1e5;
  double double_pair_prob = 0.0;
  double idler_eff = 1.0;
  double signal_eff = 1.0;
  double jitter_ps = 0.0;
  Picoseconds duration = 1'000'000'000'000;  // 1 s
};

/// Streams on channels 0 (idler), 1 (D1), 2 (D2).
std::vector<TimeTagStream> generate_spdc(const SpdcSource& src, Rng& rng);

/// Expected g2(0) for generate_spdc with a window wide enough to hold the
/// jitter and narrow against the pair spacing.
double spdc_expected_g2(const SpdcSource& src);

}  // namespace qpay
