#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "qpay/timetag.hpp"

using namespace qpay;

namespace {

constexpr Picoseconds kSecond = 1'000'000'000'000;

TimeTagStream shifted(const TimeTagStream& s, std::uint8_t ch, Picoseconds by) {
  TimeTagStream out{ch, s.tags};
  for (auto& t : out.tags) t += by;
  return out;
}

TimeTagStream merged(std::uint8_t ch, const TimeTagStream& x, const TimeTagStream& y) {
  TimeTagStream out{ch, x.tags};
  out.tags.insert(out.tags.end(), y.tags.begin(), y.tags.end());
  std::sort(out.tags.begin(), out.tags.end());
  return out;
}

std::uint64_t brute_all_pairs(const std::vector<TimeTagStream>& s, Picoseconds w) {
  std::uint64_t n = 0;
  for (auto a : s[0].tags)
    for (auto b : s[1].tags) {
      if (std::abs(2 * (b - a)) > w) continue;
      for (auto c : s[2].tags)
        if (std::abs(2 * (c - a)) <= w) ++n;
    }
  return n;
}

std::uint64_t brute_greedy(const TimeTagStream& a, const TimeTagStream& b, Picoseconds w, Picoseconds d) {
  std::vector<bool> used(b.size(), false);
  std::uint64_t n = 0;
  for (auto t : a.tags) {
    for (std::size_t j = 0; j < b.size(); ++j) {
      if (used[j] || 2 * (b.tags[j] - d - t) < -w) continue;
      if (2 * (b.tags[j] - d - t) <= w) {
        used[j] = true;
        ++n;
      }
      break;
    }
  }
  return n;
}

}  // namespace

TEST_CASE("offset estimation locks onto a fixed shift") {
  Rng rng(1);
  const auto a = poisson_stream(0, 1e5, kSecond, rng);
  const auto noise = poisson_stream(1, 2e4, kSecond, rng);
  const auto b = merged(1, shifted(a, 1, 3'205'000), noise);
  const auto m = estimate_offset(a, b, 10'000'000, 100);
  CHECK(std::abs(m.offset_ps - 3'205'000) <= 50);
  CHECK(m.drift_rate == 0.0);
  const auto z = estimate_offset(a, merged(1, a, noise), 10'000'000, 100);
  CHECK(z.offset_ps == 0.0);
  const auto neg = estimate_offset(a, shifted(a, 1, -777'700), 1'000'000, 100);
  CHECK(neg.offset_ps == doctest::Approx(-777'700));
}

TEST_CASE("independent streams do not lock") {
  Rng rng(2);
  const auto a = poisson_stream(0, 1e5, kSecond, rng);
  const auto b = poisson_stream(1, 1e5, kSecond, rng);
  CHECK_THROWS_AS(estimate_offset(a, b, 10'000'000, 100), NoLockError);
}

TEST_CASE("drift fit recovers offset and rate") {
  Rng rng(3);
  const auto a = poisson_stream(0, 1e4, 60 * kSecond, rng);
  const ClockModel truth{2'500'000.0, 1e-6, a.tags.front()};
  TimeTagStream b = apply_clock(a, truth);
  b.channel = 1;
  const auto fit = fit_drift(a, b, kSecond / 10, 5'000'000, 100);
  CHECK(fit.drift_rate == doctest::Approx(1e-6).epsilon(0.05));
  CHECK(std::abs(fit.offset_ps - truth.offset_ps) <= 100);

  // Round trip through the fitted model lands within half a bin.
  const auto back = correct_drift(b, fit);
  REQUIRE(back.size() == a.size());
  Picoseconds worst = 0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(back.tags[i] - a.tags[i]));
  CHECK(worst <= 50);
}

TEST_CASE("correct_drift inverts apply_clock") {
  Rng rng(4);
  const auto a = poisson_stream(0, 1e4, kSecond, rng);
  const ClockModel m{-1234.0, 3e-7, 500};
  const auto back = correct_drift(apply_clock(a, m), m);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(std::abs(back.tags[i] - a.tags[i]) <= 1);
}

TEST_CASE("coincidences: identical, disjoint and delayed streams") {
  Rng rng(5);
  const auto a = poisson_stream(0, 1e5, kSecond, rng);
  const std::vector<TimeTagStream> same{a, shifted(a, 1, 0)};
  const std::uint8_t pat[] = {0, 1};
  CHECK(count_coincidences(same, pat, 1000) == a.size());
  const std::vector<TimeTagStream> far{a, shifted(a, 1, 2 * kSecond)};
  CHECK(count_coincidences(far, pat, 1000) == 0);
  const std::vector<TimeTagStream> late{a, shifted(a, 1, 40'000)};
  const Picoseconds delays[] = {0, 40'000};
  CHECK(count_coincidences(late, pat, 1000, delays) == a.size());
}

TEST_CASE("accidental coincidence rate of independent streams") {
  Rng rng(6);
  const double r = 1e6;
  const Picoseconds w = 10'000;
  const std::vector<TimeTagStream> s{poisson_stream(0, r, kSecond, rng), poisson_stream(1, r, kSecond, rng)};
  const std::uint8_t pat[] = {0, 1};
  const double expect = double(s[0].size()) * double(s[1].size()) * double(w) / double(kSecond);
  const auto all = count_coincidences(s, pat, w, {}, CoincidenceMode::AllPairs);
  const auto greedy = count_coincidences(s, pat, w);
  CHECK(double(all) == doctest::Approx(expect).epsilon(0.05));
  CHECK(double(greedy) == doctest::Approx(expect).epsilon(0.05));
  CHECK(greedy <= all);
}

TEST_CASE("coincidence counting against brute force") {
  Rng rng(7);
  for (int round = 0; round < 5; ++round) {
    const Picoseconds dur = 1'000'000'000;  // 1 ms
    std::vector<TimeTagStream> s{poisson_stream(0, 3e5, dur, rng), poisson_stream(1, 3e5, dur, rng),
                                 poisson_stream(2, 3e5, dur, rng)};
    const std::uint8_t pat[] = {0, 1, 2};
    for (Picoseconds w : {1'000, 100'000, 1'000'000}) {
      CHECK(count_coincidences(s, pat, w, {}, CoincidenceMode::AllPairs) == brute_all_pairs(s, w));
      const std::uint8_t two[] = {0, 1};
      const Picoseconds d[] = {0, 250};
      CHECK(count_coincidences(s, two, w, d) == brute_greedy(s[0], s[1], w, 250));
    }
  }
}

TEST_CASE("window monotonicity and translation invariance") {
  Rng rng(8);
  std::vector<TimeTagStream> s{poisson_stream(0, 1e6, kSecond / 10, rng),
                               poisson_stream(1, 1e6, kSecond / 10, rng)};
  const std::uint8_t pat[] = {0, 1};
  std::uint64_t prev = 0;
  for (Picoseconds w : {0, 100, 1000, 5000, 20000, 100000}) {
    const auto c = count_coincidences(s, pat, w, {}, CoincidenceMode::AllPairs);
    CHECK(c >= prev);
    prev = c;
  }
  const auto base = count_coincidences(s, pat, 5000);
  const std::vector<TimeTagStream> moved{shifted(s[0], 0, 123'456'789), shifted(s[1], 1, 123'456'789)};
  CHECK(count_coincidences(moved, pat, 5000) == base);
}

TEST_CASE("g2 of uncorrelated light is one") {
  Rng rng(9);
  const auto i = poisson_stream(0, 1e6, kSecond, rng);
  const auto d1 = poisson_stream(1, 1e6, kSecond, rng);
  const auto d2 = poisson_stream(2, 1e6, kSecond, rng);
  const Picoseconds taus[] = {0};
  const auto est = g2_heralded(i, d1, d2, 100'000, taus, CoincidenceMode::AllPairs);
  REQUIRE(est.points.size() == 1);
  CHECK(est.points[0].valid);
  CHECK(est.points[0].g2 == doctest::Approx(1.0).epsilon(0.05));
  CHECK(est.points[0].sigma > 0.0);
  CHECK(est.points[0].sigma < 0.05);
}

TEST_CASE("g2 of an ideal heralded single photon is zero") {
  Rng rng(10);
  SpdcSource src;
  src.pair_rate_hz = 1e4;  // keeps accidental triples far below one
  src.jitter_ps = 100;
  const auto s = generate_spdc(src, rng);
  const Picoseconds taus[] = {0};
  const auto est = g2_heralded(s[0], s[1], s[2], 1000, taus);
  CHECK(est.n_i == s[0].size());
  CHECK(est.points[0].valid);
  CHECK(est.points[0].n_i12 == 0);
  CHECK(est.points[0].g2 == 0.0);
  CHECK(est.points[0].sigma > 0.0);
  CHECK(spdc_expected_g2(src) == 0.0);
}

TEST_CASE("g2 with multi-pair emission matches the source model") {
  Rng rng(11);
  SpdcSource src;
  src.double_pair_prob = 0.015;
  src.jitter_ps = 300;
  src.duration = 4 * kSecond;
  const auto s = generate_spdc(src, rng);
  const Picoseconds taus[] = {0, 50'000'000};
  const auto est = g2_heralded(s[0], s[1], s[2], 3000, taus);
  const double want = spdc_expected_g2(src);
  CHECK(want == doctest::Approx(0.03).epsilon(0.05));
  CHECK(est.points[0].g2 == doctest::Approx(want).epsilon(0.10));
  // Far from zero delay only accidentals remain, which normalize to one.
  CHECK(est.points[1].g2 > 10 * est.points[0].g2);
}

TEST_CASE("points without a denominator are invalid") {
  Rng rng(12);
  const auto i = poisson_stream(0, 1e4, kSecond / 10, rng);
  const TimeTagStream d1{1, {}};
  const auto d2 = poisson_stream(2, 1e4, kSecond / 10, rng);
  const Picoseconds taus[] = {0, 1000};
  const auto est = g2_heralded(i, d1, d2, 1000, taus);
  for (const auto& p : est.points) {
    CHECK_FALSE(p.valid);
    CHECK(std::isnan(p.g2));
  }
  CHECK_THROWS_AS(g2_heralded(i, d2, d2, 1000, taus), std::invalid_argument);
}

TEST_CASE("tag files round trip") {
  Rng rng(13);
  std::vector<TimeTagStream> s{poisson_stream(0, 1e5, kSecond / 100, rng),
                               poisson_stream(3, 1e5, kSecond / 100, rng)};
  const Bytes b = encode_tags(s);
  CHECK(b.size() == 9 * (s[0].size() + s[1].size()));
  const auto back = decode_tags(b);
  REQUIRE(back.size() == 2);
  CHECK(back[0].channel == 0);
  CHECK(back[1].channel == 3);
  CHECK(back[0].tags == s[0].tags);
  CHECK(back[1].tags == s[1].tags);
  Bytes bad = b;
  bad.pop_back();
  CHECK_THROWS(decode_tags(bad));
  CHECK_THROWS_AS((TimeTagStream{0, {5, 3}}.validate()), std::invalid_argument);
}
