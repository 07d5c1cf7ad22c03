#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qpay/adversary.hpp"

using namespace qpay;

namespace {

const double kSin2 = std::pow(std::sin(std::numbers::pi / 8), 2);  // 0.1464466

// 16 of 32 segments agree; each tag is half HV.
const BasisString kM0{32, 0x00FF00FFu};
const BasisString kM1{32, 0x00FFFF00u};

AttackStrategy S(const char* text) { return parse_strategy(text); }

double sigma(double p, double n) { return std::sqrt(std::max(p * (1 - p), 1e-12) / n); }

}  // namespace

TEST_CASE("closed forms for the named strategies") {
  const ChannelModel clean;
  for (auto k : {Knowledge::Insider, Knowledge::Outsider}) {
    auto r = expected_rates(S("split(q=1)"), k, clean);
    for (int t = 0; t < 2; ++t) {
      CHECK(r[t].loss == doctest::Approx(0.5));
      // The outsider answers in its fixed frame: half the checked states are in the other basis.
      CHECK(r[t].error() == doctest::Approx(k == Knowledge::Insider ? 0.0 : 0.25));
    }
    r = expected_rates(S("intermediate(theta=22.5)"), k, clean);
    for (int t = 0; t < 2; ++t) {
      CHECK(r[t].loss == doctest::Approx(0.0));
      CHECK(r[t].error() == doctest::Approx(kSin2));
    }
  }
  const auto mix = expected_rates(S("mixture(0.448*split(q=1),0.552*intermediate(theta=22.5))"),
                                  Knowledge::Insider, clean);
  CHECK(mix[0].loss == doctest::Approx(0.224));
  CHECK(mix[1].error() == doctest::Approx(0.552 * kSin2 / 0.776));

  const auto ca = expected_rates(S("conflict_aware(alpha=0,fill=drop)"), Knowledge::Insider, clean, 0.5);
  CHECK(ca[0].loss == doctest::Approx(0.25));
  CHECK(ca[0].error() == doctest::Approx(0.0));
  // Every position contested: same as a full split.
  const auto ca0 = expected_rates(S("conflict_aware(alpha=0,fill=drop)"), Knowledge::Insider, clean, 0.0);
  CHECK(ca0[1].loss == doctest::Approx(0.5));
  // alpha=1 measures halfway on conflicts only.
  const auto ca1 = expected_rates(S("conflict_aware(alpha=1)"), Knowledge::Insider, clean, 0.5);
  CHECK(ca1[0].error() == doctest::Approx(0.5 * kSin2));

  // Guess-fill answers the other token at random: half wrong.
  const auto guess = expected_rates(S("conflict_aware(alpha=0,fill=guess)"), Knowledge::Insider, clean, 0.0);
  CHECK(guess[0].loss == doctest::Approx(0.0));
  CHECK(guess[0].error() == doctest::Approx(0.25));
}

TEST_CASE("intermediate angle: 22.5 degrees balances the two tokens") {
  double best = 1.0, best_theta = -1;
  for (double th = 0; th <= 45.0001; th += 0.5) {
    const auto r = expected_rates(AttackStrategy{Intermediate{th}}, Knowledge::Outsider, {});
    const double worst = std::max(r[0].error(), r[1].error());
    if (worst < best) best = worst, best_theta = th;
  }
  CHECK(best_theta == doctest::Approx(22.5));
  CHECK(best == doctest::Approx(kSin2));
}

TEST_CASE("multi-photon positions are answered on both axes without loss") {
  for (double p : {0.0, 0.0676, 0.3}) {
    ChannelModel ch;
    ch.multi_prob = p;
    const auto r = expected_rates(S("split(q=1)"), Knowledge::Insider, ch, 0.0);
    CHECK(r[0].loss == doctest::Approx(0.5 * (1 - p)));
    CHECK(r[1].error() == doctest::Approx(0.0));
  }
}

TEST_CASE("channel loss and noise enter the rates") {
  ChannelModel ch;
  ch.loss_prob = 0.2;
  ch.flip_prob_hv = 0.02;
  ch.flip_prob_da = 0.04;
  const auto r = expected_rates(S("intermediate(theta=0)"), Knowledge::Insider, ch, 1.0);
  CHECK(r[0].loss == doctest::Approx(0.2));
  // Half the checked states are HV (error = flip), half DA (error 1/2).
  CHECK(r[0].error() == doctest::Approx(0.5 * 0.02 + 0.25));
}

TEST_CASE("simulation agrees with the closed forms") {
  const std::size_t N = 31250;
  auto [states, token] = generate_token(N * 32, Rng(11));
  for (const char* text : {"split(q=1)", "split(q=0.4)", "intermediate(theta=22.5)", "intermediate(theta=10)",
                           "conflict_aware(alpha=0.3,fill=drop)", "conflict_aware(alpha=0,fill=guess)",
                           "mixture(0.448*split(q=1),0.552*intermediate(theta=22.5))"}) {
    CAPTURE(text);
    const auto s = S(text);
    auto res = run_double_spend(s, Knowledge::Insider, token, kM0, kM1, N, Rng(5));
    score_double_spend(res, states, kM0, kM1, N);
    const auto want = expected_rates(s, Knowledge::Insider, {}, 0.5);
    for (int t = 0; t < 2; ++t) {
      const auto& st = res.stats[t];
      const double n = double(st.checked);
      CHECK(std::abs(st.loss() - want[t].loss) <= 3 * sigma(want[t].loss, n));
      const double clicked = n - double(st.no_click);
      CHECK(std::abs(st.error() - want[t].error()) <= 3 * sigma(want[t].error(), clicked) + 1e-12);
    }
  }
}

TEST_CASE("outsider simulation uses the fixed frame") {
  const std::size_t N = 10000;
  auto [states, token] = generate_token(N * 32, Rng(12));
  const auto s = S("split(q=1)");
  auto res = run_double_spend(s, Knowledge::Outsider, token, kM0, kM1, N, Rng(6));
  score_double_spend(res, states, kM0, kM1, N);
  const auto want = expected_rates(s, Knowledge::Outsider, {});
  for (int t = 0; t < 2; ++t) {
    CHECK(std::abs(res.stats[t].loss() - want[t].loss) <= 3 * sigma(want[t].loss, res.stats[t].checked));
    CHECK(std::abs(res.stats[t].error() - want[t].error()) <=
          3 * sigma(want[t].error(), res.stats[t].checked - res.stats[t].no_click));
  }
}

TEST_CASE("pure action rates against direct cos^2 evaluation") {
  // Measure at 30 degrees, report literally to token 0, drop token 1.
  PureAction a;
  a.angle = {30.0, 0.0};
  a.response[0] = literal(0);
  a.response[1] = constant(Response::Drop);
  const auto r = action_rates(a, Knowledge::Insider, Basis::HV, Basis::DA, 0.0, 0.0);
  const double c30 = std::pow(std::sin(30.0 * std::numbers::pi / 180), 2);
  CHECK(r[0].wrong == doctest::Approx(c30));
  CHECK(r[0].loss == doctest::Approx(0.0));
  CHECK(r[1].loss == doctest::Approx(1.0));
  // DA states at 45/135: distance 15 degrees.
  const auto r2 = action_rates(a, Knowledge::Insider, Basis::DA, Basis::HV, 0.0, 0.0);
  CHECK(r2[0].wrong == doctest::Approx(std::pow(std::sin(15.0 * std::numbers::pi / 180), 2)));
  const auto sw = a.swapped();
  const auto r3 = action_rates(sw, Knowledge::Insider, Basis::DA, Basis::HV, 0.0, 0.0);
  CHECK(r3[1].wrong == doctest::Approx(r[0].wrong));
}

TEST_CASE("parsing, description and validation") {
  for (const char* text : {"split(q=0.25)", "intermediate(theta=12.5)", "conflict_aware(alpha=0.5,fill=guess)",
                           "mixture(0.5*split(q=1),0.5*intermediate(theta=22.5))"}) {
    const auto s = S(text);
    CHECK(describe(parse_strategy(describe(s))) == describe(s));
  }
  CHECK_THROWS_AS(validate(S("split(q=2)"), Knowledge::Insider), std::invalid_argument);
  CHECK_THROWS(S("teleport()"));
  CHECK_THROWS(S("split(q=1"));
  CHECK_THROWS_AS(validate(S("mixture(0.5*split(q=1),0.2*split(q=0))"), Knowledge::Insider), std::invalid_argument);
  CHECK_THROWS_AS(validate(S("conflict_aware(alpha=0)"), Knowledge::Outsider), std::invalid_argument);
  CHECK_NOTHROW(validate(S("conflict_aware(alpha=0)"), Knowledge::Insider));
}

TEST_CASE("double spending needs two different merchants") {
  auto [states, token] = generate_token(64, Rng(1));
  CHECK_THROWS_AS(run_double_spend(S("split(q=1)"), Knowledge::Insider, token, kM0, kM0, 2, Rng(1)),
                  std::invalid_argument);
}

TEST_CASE("class index layout") {
  CHECK(class_index(PhotonKind::Single, Basis::DA, Basis::DA) == 0);
  CHECK(class_index(PhotonKind::Single, Basis::HV, Basis::DA) == 2);
  CHECK(class_index(PhotonKind::Multi, Basis::HV, Basis::HV) == 7);
}
