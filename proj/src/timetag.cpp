#include "qpay/timetag.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>

namespace qpay {

void TimeTagStream::validate() const {
  if (!std::is_sorted(tags.begin(), tags.end()))
    throw std::invalid_argument("time tags on channel " + std::to_string(channel) + " are not sorted");
}

namespace {

Picoseconds floor_div(Picoseconds a, Picoseconds b) {
  Picoseconds q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

// P(X >= k) for X ~ Poisson(mu), summed in log space.
double poisson_upper_tail(std::uint64_t k, double mu) {
  if (k == 0) return 1.0;
  if (mu <= 0.0) return 0.0;
  double total = 0.0;
  for (std::uint64_t i = k;; ++i) {
    const double term = std::exp(double(i) * std::log(mu) - mu - std::lgamma(double(i) + 1.0));
    total += term;
    if (double(i) > mu && term <= total * 1e-15) break;
  }
  return std::min(1.0, total);
}

// Offset between the a-tags and all of b, searched within center +- range.
ClockModel offset_on(std::span<const Picoseconds> a, std::span<const Picoseconds> b,
                     Picoseconds range, Picoseconds bin, Picoseconds center = 0) {
  if (range <= 0 || bin <= 0) throw std::invalid_argument("search range and bin must be positive");
  const Picoseconds kmax = range / bin;
  std::vector<Picoseconds> keys;
  std::size_t lo = 0;
  for (Picoseconds t : a) {
    while (lo < b.size() && b[lo] < t + center - range - bin) ++lo;
    for (std::size_t k = lo; k < b.size() && b[k] <= t + center + range + bin; ++k) {
      const Picoseconds idx = floor_div(b[k] - t - center + bin / 2, bin);
      if (idx >= -kmax && idx <= kmax) keys.push_back(idx);
    }
  }
  std::sort(keys.begin(), keys.end());
  Picoseconds best_key = 0;
  std::uint64_t best = 0;
  double sum = 0.0, sum2 = 0.0;
  for (std::size_t i = 0; i < keys.size();) {
    std::size_t j = i;
    while (j < keys.size() && keys[j] == keys[i]) ++j;
    const std::uint64_t c = j - i;
    sum += double(c);
    sum2 += double(c) * double(c);
    const bool closer = std::llabs(keys[i]) < std::llabs(best_key) ||
                        (std::llabs(keys[i]) == std::llabs(best_key) && keys[i] < best_key);
    if (c > best || (c == best && closer)) {
      best = c;
      best_key = keys[i];
    }
    i = j;
  }
  // Background statistics over all other bins, empty ones included.
  const double nbins = double(2 * kmax + 1) - 1.0;
  const double mean = nbins > 0 ? (sum - double(best)) / nbins : 0.0;
  const double var = nbins > 0 ? std::max(0.0, (sum2 - double(best) * double(best)) / nbins - mean * mean) : 0.0;
  const double noise = std::max(std::sqrt(var), std::sqrt(mean));
  // 5 sigma, both locally and after accounting for the number of bins searched.
  constexpr double kFiveSigmaTail = 2.866515718791939e-7;
  if (best < 5 || double(best) - mean <= 5.0 * noise ||
      double(2 * kmax + 1) * poisson_upper_tail(best, mean) >= kFiveSigmaTail)
    throw NoLockError("no correlation peak above the histogram noise");
  ClockModel m;
  m.offset_ps = double(center + best_key * bin);
  return m;
}

}  // namespace

ClockModel estimate_offset(const TimeTagStream& a, const TimeTagStream& b, Picoseconds search_range,
                           Picoseconds bin) {
  a.validate();
  b.validate();
  ClockModel m = offset_on(a.tags, b.tags, search_range, bin);
  m.anchor = a.tags.empty() ? 0 : a.tags.front();
  return m;
}

namespace {

ClockModel fit_once(const TimeTagStream& a, const TimeTagStream& b, Picoseconds segment_length,
                    Picoseconds search_range, Picoseconds bin) {
  const Picoseconds anchor = a.tags.front();
  std::vector<double> xs, ys;
  std::size_t first = 0;
  while (first < a.tags.size()) {
    const Picoseconds seg_start = anchor + floor_div(a.tags[first] - anchor, segment_length) * segment_length;
    std::size_t last = first;
    while (last < a.tags.size() && a.tags[last] < seg_start + segment_length) ++last;
    // Search around the offset extrapolated from the segments locked so far,
    // so accumulated drift may exceed the search range.
    double predicted = ys.empty() ? 0.0 : ys.back();
    const double x = double(seg_start - anchor) + 0.5 * double(segment_length);
    if (xs.size() >= 2) predicted += (ys.back() - ys.front()) / (xs.back() - xs.front()) * (x - xs.back());
    try {
      const auto m = offset_on(std::span(a.tags).subspan(first, last - first), b.tags, search_range, bin,
                               static_cast<Picoseconds>(std::llround(predicted)));
      xs.push_back(x);
      ys.push_back(m.offset_ps);
    } catch (const NoLockError&) {
    }
    first = last;
  }
  if (xs.size() < 2) throw NoLockError("fewer than two segments locked");
  const double n = double(xs.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += (xs[i] - mx) * (xs[i] - mx);
    sxy += (xs[i] - mx) * (ys[i] - my);
  }
  ClockModel m;
  m.anchor = anchor;
  m.drift_rate = sxy / sxx;
  m.offset_ps = my - m.drift_rate * mx;
  return m;
}

}  // namespace

ClockModel fit_drift(const TimeTagStream& a, const TimeTagStream& b, Picoseconds segment_length,
                     Picoseconds search_range, Picoseconds bin) {
  a.validate();
  b.validate();
  if (segment_length <= 0) throw std::invalid_argument("segment length must be positive");
  if (a.tags.empty()) throw NoLockError("empty reference stream");
  ClockModel m = fit_once(a, b, segment_length, search_range, bin);
  // Drift inside a segment smears its peak; refit the residual until the
  // smear is below one bin.
  for (int pass = 0; pass < 4 && std::abs(m.drift_rate) * double(segment_length) > double(bin); ++pass) {
    const ClockModel r = fit_once(a, correct_drift(b, m), segment_length, search_range, bin);
    m.offset_ps += r.offset_ps;
    m.drift_rate += r.drift_rate;
    if (std::abs(r.drift_rate) * double(segment_length) <= double(bin)) break;
  }
  return m;
}

TimeTagStream correct_drift(const TimeTagStream& s, const ClockModel& m) {
  TimeTagStream out{s.channel, {}};
  out.tags.reserve(s.size());
  for (Picoseconds t : s.tags)
    out.tags.push_back(t - std::llround(m.offset_ps + m.drift_rate * double(t - m.anchor)));
  std::sort(out.tags.begin(), out.tags.end());
  return out;
}

TimeTagStream apply_clock(const TimeTagStream& s, const ClockModel& m) {
  TimeTagStream out{s.channel, {}};
  out.tags.reserve(s.size());
  for (Picoseconds t : s.tags)
    out.tags.push_back(t + std::llround(m.offset_ps + m.drift_rate * double(t - m.anchor)));
  std::sort(out.tags.begin(), out.tags.end());
  return out;
}

std::uint64_t count_coincidences(std::span<const TimeTagStream> streams,
                                 std::span<const std::uint8_t> pattern, Picoseconds window,
                                 std::span<const Picoseconds> delays, CoincidenceMode mode) {
  if (pattern.empty()) throw std::invalid_argument("empty coincidence pattern");
  if (window < 0) throw std::invalid_argument("negative coincidence window");
  if (!delays.empty() && delays.size() != pattern.size())
    throw std::invalid_argument("one delay per pattern channel expected");
  std::vector<const TimeTagStream*> sel;
  for (std::uint8_t ch : pattern) {
    const TimeTagStream* found = nullptr;
    for (const auto& s : streams)
      if (s.channel == ch) found = &s;
    if (!found) throw std::invalid_argument("no stream for channel " + std::to_string(ch));
    if (std::find(sel.begin(), sel.end(), found) != sel.end())
      throw std::invalid_argument("channel repeated in pattern");
    found->validate();
    sel.push_back(found);
  }
  auto delay = [&](std::size_t c) { return delays.empty() ? Picoseconds{0} : delays[c]; };
  const std::size_t k = sel.size();
  std::uint64_t count = 0;
  std::vector<std::size_t> lo(k, 0), hi(k, 0);
  for (Picoseconds t0 : sel[0]->tags) {
    const Picoseconds ref = t0 - delay(0);
    if (mode == CoincidenceMode::Greedy) {
      bool all = true;
      for (std::size_t c = 1; c < k; ++c) {
        const auto& tags = sel[c]->tags;
        while (lo[c] < tags.size() && 2 * (tags[lo[c]] - delay(c) - ref) < -window) ++lo[c];
        if (lo[c] >= tags.size() || 2 * (tags[lo[c]] - delay(c) - ref) > window) all = false;
      }
      if (all) {
        ++count;
        for (std::size_t c = 1; c < k; ++c) ++lo[c];
      }
    } else {
      std::uint64_t prod = 1;
      for (std::size_t c = 1; c < k; ++c) {
        const auto& tags = sel[c]->tags;
        while (lo[c] < tags.size() && 2 * (tags[lo[c]] - delay(c) - ref) < -window) ++lo[c];
        hi[c] = std::max(hi[c], lo[c]);
        while (hi[c] < tags.size() && 2 * (tags[hi[c]] - delay(c) - ref) <= window) ++hi[c];
        prod *= hi[c] - lo[c];
      }
      count += prod;
    }
  }
  return count;
}

G2Estimate g2_heralded(const TimeTagStream& idler, const TimeTagStream& d1, const TimeTagStream& d2,
                       Picoseconds window, std::span<const Picoseconds> tau_axis, CoincidenceMode mode) {
  if (idler.channel == d1.channel || idler.channel == d2.channel || d1.channel == d2.channel)
    throw std::invalid_argument("idler, D1 and D2 need distinct channels");
  const std::vector<TimeTagStream> streams{idler, d1, d2};
  const std::uint8_t i1[] = {idler.channel, d1.channel};
  const std::uint8_t i2[] = {idler.channel, d2.channel};
  const std::uint8_t i12[] = {idler.channel, d1.channel, d2.channel};
  G2Estimate est;
  est.window = window;
  est.n_i = idler.size();
  est.n_i1 = count_coincidences(streams, i1, window, {}, mode);
  for (Picoseconds tau : tau_axis) {
    G2Point p;
    p.tau = tau;
    const Picoseconds d_i2[] = {0, tau};
    const Picoseconds d_i12[] = {0, 0, tau};
    p.n_i2 = count_coincidences(streams, i2, window, d_i2, mode);
    p.n_i12 = count_coincidences(streams, i12, window, d_i12, mode);
    const double den = double(est.n_i1) * double(p.n_i2);
    p.valid = den > 0.0;
    if (p.valid) {
      const double scale = double(est.n_i) / den;
      p.g2 = scale * double(p.n_i12);
      // With no triple events, quote the one-count level instead of zero.
      p.sigma = p.n_i12 ? p.g2 * std::sqrt(1.0 / double(est.n_i) + 1.0 / double(p.n_i12) +
                                           1.0 / double(est.n_i1) + 1.0 / double(p.n_i2))
                        : scale;
    } else {
      p.g2 = std::numeric_limits<double>::quiet_NaN();
      p.sigma = std::numeric_limits<double>::quiet_NaN();
    }
    est.points.push_back(p);
  }
  return est;
}

Bytes encode_tags(std::span<const TimeTagStream> streams) {
  std::vector<std::pair<Picoseconds, std::uint8_t>> all;
  for (const auto& s : streams) {
    s.validate();
    for (Picoseconds t : s.tags) all.emplace_back(t, s.channel);
  }
  std::sort(all.begin(), all.end());
  ByteWriter w;
  for (const auto& [t, ch] : all) {
    w.u8(ch);
    w.u64(static_cast<std::uint64_t>(t));
  }
  return w.take();
}

std::vector<TimeTagStream> decode_tags(std::span<const std::uint8_t> data) {
  if (data.size() % 9 != 0) throw FormatError("tag file size is not a multiple of 9 bytes");
  ByteReader r(data);
  std::map<std::uint8_t, TimeTagStream> by_channel;
  Picoseconds prev = std::numeric_limits<Picoseconds>::min();
  while (r.remaining()) {
    const std::uint8_t ch = r.u8();
    const auto t = static_cast<Picoseconds>(r.u64());
    if (t < prev) throw FormatError("tag file is not sorted by time");
    prev = t;
    auto& s = by_channel[ch];
    s.channel = ch;
    s.tags.push_back(t);
  }
  std::vector<TimeTagStream> out;
  for (auto& [ch, s] : by_channel) out.push_back(std::move(s));
  return out;
}

TimeTagStream poisson_stream(std::uint8_t channel, double rate_hz, Picoseconds duration, Rng& rng) {
  if (!(rate_hz > 0.0)) throw std::invalid_argument("rate must be positive");
  TimeTagStream s{channel, {}};
  const double mean_gap = 1e12 / rate_hz;
  double t = 0.0;
  for (;;) {
    t += -std::log1p(-rng.uniform()) * mean_gap;
    if (t >= double(duration)) break;
    s.tags.push_back(std::llround(t));
  }
  return s;
}

namespace {

double gaussian(Rng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

std::vector<TimeTagStream> generate_spdc(const SpdcSource& src, Rng& rng) {
  std::vector<TimeTagStream> out{{0, {}}, {1, {}}, {2, {}}};
  const double mean_gap = 1e12 / src.pair_rate_hz;
  auto jitter = [&] { return src.jitter_ps > 0 ? std::llround(src.jitter_ps * gaussian(rng)) : 0; };
  double t = 0.0;
  for (;;) {
    t += -std::log1p(-rng.uniform()) * mean_gap;
    if (t >= double(src.duration)) break;
    const Picoseconds at = std::llround(t);
    const int pairs = rng.bernoulli(src.double_pair_prob) ? 2 : 1;
    // Threshold detectors: at most one click per detector per emission.
    bool idler = false, s1 = false, s2 = false;
    for (int p = 0; p < pairs; ++p) {
      idler |= rng.bernoulli(src.idler_eff);
      const bool to_d1 = rng.coin();
      const bool seen = rng.bernoulli(src.signal_eff);
      (to_d1 ? s1 : s2) |= seen;
    }
    if (idler) out[0].tags.push_back(at + jitter());
    if (s1) out[1].tags.push_back(at + jitter());
    if (s2) out[2].tags.push_back(at + jitter());
  }
  for (auto& s : out) std::sort(s.tags.begin(), s.tags.end());
  return out;
}

double spdc_expected_g2(const SpdcSource& src) {
  const double p2 = src.double_pair_prob, p1 = 1.0 - p2;
  const double ei = src.idler_eff, h = src.signal_eff / 2;
  const double pi1 = ei, pi2 = 1.0 - (1.0 - ei) * (1.0 - ei);
  const double n_i = p1 * pi1 + p2 * pi2;
  const double n_i1 = p1 * pi1 * h + p2 * pi2 * (1.0 - (1.0 - h) * (1.0 - h));
  const double n_i12 = p2 * pi2 * 2.0 * h * h;
  return n_i * n_i12 / (n_i1 * n_i1);
}

}  // namespace qpay
