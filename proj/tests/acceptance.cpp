// Acceptance run: one [PASS]/[FAIL] line per criterion, exit 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <thread>

#include "qpay/gf2n.hpp"
#include "qpay/harness.hpp"

using namespace qpay;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("[%s] %s %s\n", ok ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double r_squared(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = double(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i], sy += y[i], sxx += x[i] * x[i], sxy += x[i] * y[i], syy += y[i] * y[i];
  }
  const double cov = sxy - sx * sy / n;
  return cov * cov / ((sxx - sx * sx / n) * (syy - sy * sy / n));
}

// One client with a fresh key, a TTP, and a small token policy.
struct Bench {
  TrustedTokenProvider ttp;
  MacKey key;
  VerificationPolicy policy;

  Bench(std::size_t n, unsigned t, std::size_t slots, Rng& rng) {
    policy.per_bit_group = n;
    policy.tag_bits = t;
    key = keygen(t, slots, rng);
    ttp.enroll("client-0", key);
  }

  VerifyRequest pay(const IssuedToken& it, std::uint32_t slot, const std::string& merchant,
                    const ChannelModel& ch, const Rng& rng) {
    const QuantumToken rx = transmit(it.token, ch, rng.named("channel"));
    const MerchantId m(merchant);
    return merchant_forward(
        client_cryptogram(key, slot, m, rx, policy, rng.named("client"), it.description.token_id, "client-0"), m);
  }
};

ChannelModel default_channel() { return parse_config("").channel; }

// ---------------------------------------------------------------------------

void ac1() {
  const auto t0 = Clock::now();
  int accepted = 0;
  for (int seed = 1; seed <= 100; ++seed)
    accepted += cmd_run(parse_config("", {{"seed", std::to_string(seed)}})).all_accepted();
  const double secs = seconds_since(t0);
  report("AC1", accepted >= 99 && secs < 60.0,
         fmt("honest runs at lambda=1e6: %d/100 accepted in %.1f s (need >=99, <60 s)", accepted, secs));
}

void ac2() {
  const std::map<std::string, std::string> clean{
      {"loss", "0"}, {"flip_hv", "0"}, {"flip_da", "0"}, {"multi", "0"}};
  auto worst = [&](const char* attack) {
    auto over = clean;
    over["attack"] = attack;
    const auto rep = cmd_attack(parse_config("", over));
    double lo = 1, hi = 0, emax = 0, lmax = 0, emin = 1;
    for (const auto& m : rep.merchants) {
      lo = std::min(lo, m.decision.measured_loss);
      hi = std::max(hi, m.decision.measured_loss);
      emax = std::max(emax, m.decision.measured_error);
      emin = std::min(emin, m.decision.measured_error);
      lmax = std::max(lmax, m.decision.measured_loss);
    }
    return std::array<double, 5>{lo, hi, emin, emax, lmax};
  };
  const auto s = worst("split(q=1)");
  const auto i = worst("intermediate(theta=22.5)");
  const bool split_ok = std::abs(s[0] - 0.5) <= 0.005 && std::abs(s[1] - 0.5) <= 0.005 && s[3] <= 0.005;
  const bool inter_ok = std::abs(i[2] - 0.1464) <= 0.003 && std::abs(i[3] - 0.1464) <= 0.003 && i[4] <= 0.005;
  report("AC2", split_ok && inter_ok,
         fmt("split(1): loss %.4f..%.4f error<=%.4f; intermediate(22.5): error %.4f..%.4f loss<=%.4f", s[0], s[1],
             s[3], i[2], i[3], i[4]));
}

void ac3() {
  const auto cfg = parse_config("");
  const AttackFrontier insider({Knowledge::Insider, cfg.region_multi_prob, cfg.tag_agreement}, cfg.resolution);
  const double e0 = insider.e_d(0.0), e5 = insider.e_d(0.5);
  bool monotone = true;
  double prev = 1.0;
  for (double l : loss_grid(11, 0.5)) {
    monotone = monotone && insider.e_d(l) <= prev + 1e-12;
    prev = insider.e_d(l);
  }
  const std::string csv = cmd_region(cfg);
  const bool has_ref = csv.find("\nreference,0.224,") != std::string::npos;
  const AttackFrontier outsider({Knowledge::Outsider, cfg.channel.multi_prob, cfg.tag_agreement}, cfg.resolution);
  const bool honest_secure = outsider.is_secure(0.0328, 0.224);
  const AttackFrontier ins_ref(cfg.validation_game(), cfg.resolution);
  report("AC3", std::abs(e0 - 0.14645) <= 1e-3 && e5 <= 1e-3 && monotone && has_ref && honest_secure,
         fmt("e_d(0)=%.5f e_d(0.5)=%.2g monotone=%d reference_row=%d; at l=0.224 outsider e_d=%.4f insider "
             "e_d=%.4f (reference 0.0379), honest point secure under outsider=%d",
             e0, e5, int(monotone), int(has_ref), outsider.e_d(0.224), ins_ref.e_d(0.224), int(honest_secure)));
}

void ac4() {
  Rng rng(404);
  int second_accepts = 0, first_accepts = 0;
  for (int i = 0; i < 1000; ++i) {
    Bench b(50, 8, 4, rng);
    const Rng trial = rng.child(i);
    const auto it = b.ttp.issue("client-0", b.policy.token_length(), trial.named("token"));
    const auto first = b.pay(it, 0, "merchant-0", {}, trial.child(0));
    first_accepts += b.ttp.verify(first, b.policy).accepted;
    VerifyRequest second;
    switch (trial.child(1).below(4)) {
      case 0:  // replay
        second = first;
        break;
      case 1:  // fresh slot, other merchant
        second = b.pay(it, 1, "merchant-1", {}, trial.child(2));
        break;
      case 2:  // same merchant again on a fresh slot
        second = b.pay(it, 2, "merchant-0", {}, trial.child(3));
        break;
      default:  // reuse slot 0 for another merchant
        second = first;
        second.merchant = MerchantId("merchant-1");
        break;
    }
    second_accepts += b.ttp.verify(second, b.policy).accepted;
  }
  int race_violations = 0, race_accepts = 0;
  for (int i = 0; i < 200; ++i) {
    Bench b(50, 8, 2, rng);
    const auto it = b.ttp.issue("client-0", b.policy.token_length(), rng.child(5000 + i));
    const auto r0 = b.pay(it, 0, "merchant-0", {}, rng.child(6000 + i));
    const auto r1 = b.pay(it, 1, "merchant-1", {}, rng.child(7000 + i));
    Decision d0, d1;
    std::thread t0([&] { d0 = b.ttp.verify(r0, b.policy); });
    std::thread t1([&] { d1 = b.ttp.verify(r1, b.policy); });
    t0.join();
    t1.join();
    race_accepts += int(d0.accepted) + int(d1.accepted);
    race_violations += (int(d0.accepted) + int(d1.accepted)) > 1;
  }
  report("AC4", second_accepts == 0 && race_violations == 0,
         fmt("1000 double verifies: %d first accepted, %d second accepted; 200 races: %d accepts, %d with two", first_accepts,
             second_accepts, race_accepts, race_violations));
}

void ac5() {
  Rng rng(505);
  const ChannelModel ch = default_channel();
  int changed = 0, accepted = 0;
  for (int i = 0; i < 1000; ++i) {
    Bench b(200, 8, 1, rng);
    const Rng trial = rng.child(i);
    const auto it = b.ttp.issue("client-0", b.policy.token_length(), trial.named("token"));
    const auto req = b.pay(it, 0, "merchant-0", ch, trial);
    const BasisString tag = evaluate(b.key, 0, MerchantId("merchant-0").encoded());
    VerifyRequest fuzzed = req;
    Rng f = trial.named("fuzz");
    for (std::size_t j = 0; j < fuzzed.outcomes.size(); ++j)
      if (it.description.states.bases[j] != tag.at(segment_of(j, b.policy.per_bit_group)))
        fuzzed.outcomes[j] = static_cast<Outcome>(f.below(3));
    auto plain = b.ttp.branch();
    auto fuzz = b.ttp.branch();
    const Decision d1 = plain->verify(req, b.policy);
    const Decision d2 = fuzz->verify(fuzzed, b.policy);
    changed += !(d1 == d2);
    accepted += d1.accepted;
  }
  report("AC5", changed == 0,
         fmt("1000 runs re-randomizing every unchecked outcome: %d decisions changed (%d accepted, %d rejected)",
             changed, accepted, 1000 - accepted));
}

void ac6() {
  std::string detail;
  bool ok = true;
  for (unsigned t : {8u, 16u}) {
    const Bytes m = MerchantId("merchant-0").encoded(), m2 = MerchantId("merchant-1").encoded();
    const auto& field = GaloisField::of(t);
    const std::size_t w = t / 8, d = coefficient_count(t, m.size());
    // Best guess for tag(m2) - tag(m): the most likely value of the keyed difference polynomial.
    std::vector<std::uint32_t> freq(std::size_t{1} << t, 0);
    for (std::uint64_t a = 0; a < (std::uint64_t{1} << t); ++a) {
      std::uint64_t diff = 0, apow = 1;
      for (std::size_t i = 1; i <= d; ++i) {
        std::uint64_t c = 0;
        for (std::size_t k = 0; k < w; ++k) c = c << 8 | (m[(i - 1) * w + k] ^ m2[(i - 1) * w + k]);
        apow = field.mul(apow, a);
        diff ^= field.mul(c, apow);
      }
      ++freq[diff];
    }
    const std::uint64_t guess = std::max_element(freq.begin(), freq.end()) - freq.begin();
    Rng rng(600 + t);
    const int trials = 1'000'000;
    int wins = 0;
    for (int i = 0; i < trials; ++i) {
      MacKey key = keygen(t, 1, rng);
      const auto seen = tag(key, 0, m);
      wins += evaluate(key, 0, m2).value == (seen.value ^ guess);
    }
    const double p = forgery_bound(t, m.size());
    const double limit = p + 3 * std::sqrt(p * (1 - p) / trials);
    const double rate = wins / double(trials);
    ok = ok && rate <= limit;
    detail += fmt("t=%u: %.3g vs bound %.3g (+3sigma %.3g); ", t, rate, p, limit);
  }
  Rng rng(606);
  int reuse_rejected = 0;
  for (int i = 0; i < 1000; ++i) {
    MacKey key = keygen(16, 2, rng);
    tag(key, 1, MerchantId("merchant-0"));
    try {
      tag(key, 1, MerchantId("merchant-" + std::to_string(1 + i)));
    } catch (const MacError& e) {
      reuse_rejected += e.code() == MacError::Code::SlotInUse;
    }
  }
  ok = ok && reuse_rejected == 1000;
  report("AC6", ok, detail + fmt("slot reuse rejected %d/1000", reuse_rejected));
}

void ac7() {
  const auto cfg = parse_config("");
  const std::size_t N = 625;
  const unsigned T = 16;  // N*T = 1e4
  const double e_T = cfg.policy.error_threshold, l_T = cfg.policy.loss_threshold;
  const PerQubitGame game = cfg.validation_game();
  const SecureRegionPoint argmin = AttackFrontier(game, cfg.resolution).at(l_T);

  ChernoffParams cp;
  cp.samples = checked_positions(double(token_length(N, T)));
  cp.e_h = cfg.honest_error;
  cp.l_h = cfg.honest_loss;
  cp.e_T = e_T;
  cp.l_T = l_T;
  cp.e_d = argmin.min_dishonest_error;
  const double p_h = chernoff_honest(cp), p_d = chernoff_dishonest(cp);

  Rng rng(707);
  const ChannelModel ch = cfg.channel;
  int honest_pass = 0;
  for (int i = 0; i < 1000; ++i) {
    Bench b(N, T, 1, rng);
    b.policy.error_threshold = e_T;
    b.policy.loss_threshold = l_T;
    const Rng trial = rng.child(i);
    const auto it = b.ttp.issue("client-0", b.policy.token_length(), trial.named("token"));
    honest_pass += b.ttp.verify(b.pay(it, 0, "merchant-0", ch, trial), b.policy).accepted;
  }

  // The adversary holds the token at the source: no loss or noise, only
  // multiphoton emission. The two tags disagree everywhere.
  ChannelModel source;
  source.multi_prob = ch.multi_prob;
  source.max_multi = ch.max_multi;
  int attack_pass = 0;
  for (int i = 0; i < 1000; ++i) {
    const Rng trial = rng.child(10'000 + i);
    auto [states, token] = generate_token(N * T, trial.named("token"));
    const QuantumToken rx = transmit(token, source, trial.named("channel"));
    const BasisString m0{T, trial.named("tag").next() & 0xFFFF};
    const BasisString m1{T, ~m0.value & 0xFFFF};
    auto res = run_double_spend(argmin.argmin, Knowledge::Insider, rx, m0, m1, N, trial.named("attack"));
    score_double_spend(res, states, m0, m1, N);
    for (const auto& s : res.stats) attack_pass += s.error() <= e_T && s.loss() <= l_T;
  }
  const double honest_rate = honest_pass / 1000.0, attack_rate = attack_pass / 2000.0;

  std::vector<double> xs, ys;
  for (double n : cfg.chernoff_n) {
    ChernoffParams q = cp;
    q.samples = checked_positions(double(token_length(std::size_t(n), cfg.policy.tag_bits)));
    xs.push_back(n);
    ys.push_back(log_chernoff_dishonest(q));
  }
  const double r2 = r_squared(xs, ys);
  ChernoffParams big = cp;
  big.samples = checked_positions(double(token_length(4'200'000, 1)));  // lambda = N, T = 1
  big.e_d = AttackFrontier(game, cfg.resolution).e_d(l_T);
  const double log10_big = log_chernoff_dishonest(big) / std::log(10.0);

  report("AC7", honest_rate >= p_h && attack_rate <= p_d && r2 > 0.999 && log10_big <= -20.0,
         fmt("lambda=1e4: honest pass %.3f >= bound %.4f; argmin attack (e_d=%.4f, loss %.3f) pass %.4f <= bound "
             "%.3g; R^2=%.6f; log10 p_d at N=4.2e6: %.1f",
             honest_rate, p_h, argmin.min_dishonest_error, argmin.achieved_loss, attack_rate, p_d, r2, log10_big));
}

void ac8() {
  constexpr Picoseconds kSecond = 1'000'000'000'000;
  Rng rng(808);
  const Picoseconds zero[] = {0};

  const auto pi = poisson_stream(0, 1e6, kSecond, rng);
  const auto p1 = poisson_stream(1, 1e6, kSecond, rng);
  const auto p2 = poisson_stream(2, 1e6, kSecond, rng);
  const double g_poisson = g2_heralded(pi, p1, p2, 100'000, zero, CoincidenceMode::AllPairs).points[0].g2;

  SpdcSource ideal;
  ideal.pair_rate_hz = 1e4;
  ideal.jitter_ps = 100;
  const auto si = generate_spdc(ideal, rng);
  const auto gi = g2_heralded(si[0], si[1], si[2], 1000, zero).points[0];

  SpdcSource tuned;
  tuned.double_pair_prob = 0.015;
  tuned.idler_eff = 0.8;
  tuned.signal_eff = 0.9;
  tuned.jitter_ps = 300;
  tuned.duration = 5 * kSecond;
  const auto st = generate_spdc(tuned, rng);
  const double g_spdc = g2_heralded(st[0], st[1], st[2], 3000, zero).points[0].g2;
  const double g_want = spdc_expected_g2(tuned);

  const auto a = poisson_stream(0, 1e4, 60 * kSecond, rng);
  TimeTagStream b = apply_clock(a, {2'500'000.0, 1e-6, a.tags.front()});
  b.channel = 1;
  const double rate = fit_drift(a, b, kSecond / 10, 5'000'000, 100).drift_rate;

  const bool ok = std::abs(g_poisson - 1.0) <= 0.05 && gi.valid && gi.g2 == 0.0 &&
                  std::abs(g_spdc / g_want - 1.0) <= 0.10 && std::abs(rate / 1e-6 - 1.0) <= 0.05;
  report("AC8", ok,
         fmt("poisson g2=%.4f; ideal heralded g2(0)=%g; SPDC g2=%.4f vs analytic %.4f; drift %.4g vs 1e-6", g_poisson,
             gi.g2, g_spdc, g_want, rate));
}

void ac9() {
  int mismatches = 0, runs = 0;
  for (const char* extra : {"", "attack = split(q=0.5)\n", "loss = 0.5\n"})
    for (int seed : {1, 2, 3}) {
      const std::string base = std::string("N = 5000\nseed = ") + std::to_string(seed) + "\n" + extra;
      const auto a = cmd_run(parse_config(base));
      const auto b = cmd_run(parse_config(base + "transport = socket\n"));
      bool same = a.report_hash() == b.report_hash() && a.merchants.size() == b.merchants.size();
      for (std::size_t i = 0; same && i < a.merchants.size(); ++i)
        same = a.merchants[i].decision == b.merchants[i].decision;
      mismatches += !same;
      ++runs;
    }
  report("AC9", mismatches == 0, fmt("socket vs in-process: %d/%d configurations identical", runs - mismatches, runs));
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  for (auto* ac : {ac1, ac2, ac3, ac4, ac5, ac6, ac7, ac8, ac9}) {
    try {
      ac();
    } catch (const std::exception& e) {
      report("AC?", false, std::string("unexpected exception: ") + e.what());
    }
  }
  std::printf("%d criteria failed, %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
