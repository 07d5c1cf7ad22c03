#include "qpay/adversary.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace qpay {

const char* to_string(Knowledge k) { return k == Knowledge::Insider ? "insider" : "outsider"; }

std::array<Response, 4> literal(int copy) {
  if (copy == 0) return {Response::Zero, Response::One, Response::Zero, Response::One};
  return {Response::Zero, Response::Zero, Response::One, Response::One};
}

std::array<Response, 4> constant(Response r) { return {r, r, r, r}; }

PureAction PureAction::swapped() const {
  PureAction s = *this;
  std::swap(s.response[0], s.response[1]);
  return s;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

char response_char(Response r) {
  switch (r) {
    case Response::Zero: return '0';
    case Response::One: return '1';
    case Response::Drop: return 'd';
    case Response::Guess: return 'g';
  }
  return '?';
}

}  // namespace

std::string PureAction::describe() const {
  std::string s = "a=" + fmt(angle[0]);
  if (copies == 2) s += "/" + fmt(angle[1]);
  const int outcomes = copies == 2 ? 4 : 2;
  for (int t = 0; t < 2; ++t) {
    s += t == 0 ? " r0=" : " r1=";
    for (int o = 0; o < outcomes; ++o) s += response_char(response[t][o]);
  }
  return s;
}

// ---- strategies ----------------------------------------------------------

namespace {

bool unit(double x) { return x >= 0.0 && x <= 1.0; }

PureAction single(double angle, std::array<Response, 4> r0, std::array<Response, 4> r1) {
  PureAction a;
  a.angle = {angle, 0.0};
  a.response = {r0, r1};
  return a;
}

PureAction both_axes(Basis m0, Basis m1) {
  PureAction a;
  a.copies = 2;
  a.angle = {basis_angle(m0), basis_angle(m1)};
  a.response = {literal(0), literal(1)};
  return a;
}

void push(ActionMix& mix, double w, const PureAction& a) {
  if (w > 0.0) mix.push_back({w, a});
}

}  // namespace

void validate(const AttackStrategy& s, Knowledge k) {
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Split>) {
          if (!unit(v.q)) throw std::invalid_argument("split fraction q must lie in [0,1]");
        } else if constexpr (std::is_same_v<T, Intermediate>) {
          if (!(v.theta_deg >= 0.0 && v.theta_deg < 90.0))
            throw std::invalid_argument("intermediate angle must lie in [0,90)");
        } else if constexpr (std::is_same_v<T, ConflictAware>) {
          if (k == Knowledge::Outsider)
            throw std::invalid_argument("conflict-aware strategies need insider knowledge");
          if (!unit(v.alpha)) throw std::invalid_argument("conflict-aware alpha must lie in [0,1]");
        } else if constexpr (std::is_same_v<T, Mixture>) {
          if (v.components.empty()) throw std::invalid_argument("empty mixture");
          double total = 0.0;
          for (const auto& c : v.components) {
            if (!(c.weight >= 0.0)) throw std::invalid_argument("negative mixture weight");
            total += c.weight;
            validate(c.strategy, k);
          }
          if (std::abs(total - 1.0) > 1e-9) throw std::invalid_argument("mixture weights must sum to 1");
        } else {
          for (const auto& mix : v.classes) {
            double total = 0.0;
            for (const auto& wa : mix) {
              if (!(wa.weight >= 0.0)) throw std::invalid_argument("negative action weight");
              for (int c = 0; c < wa.action.copies; ++c)
                if (!(wa.action.angle[c] >= 0.0 && wa.action.angle[c] < 180.0))
                  throw std::invalid_argument("action angle must lie in [0,180)");
              total += wa.weight;
            }
            if (!mix.empty() && std::abs(total - 1.0) > 1e-9)
              throw std::invalid_argument("action weights must sum to 1");
          }
        }
      },
      s.kind);
}

ActionMix compile(const AttackStrategy& s, Knowledge k, PhotonKind kind, Basis m0, Basis m1) {
  if (k == Knowledge::Outsider) {
    m0 = Basis::HV;
    m1 = Basis::DA;
  }
  ActionMix mix;
  if (kind == PhotonKind::Vacuum) return mix;
  const double a0 = basis_angle(m0), a1 = basis_angle(m1);
  const auto drop = constant(Response::Drop);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Tabulated>) {
          mix = v.classes[class_index(kind, m0, m1)];
        } else if constexpr (std::is_same_v<T, Mixture>) {
          for (const auto& c : v.components)
            for (const auto& wa : compile(c.strategy, k, kind, m0, m1)) push(mix, c.weight * wa.weight, wa.action);
        } else if (kind == PhotonKind::Multi) {
          push(mix, 1.0, both_axes(m0, m1));
        } else if constexpr (std::is_same_v<T, Split>) {
          push(mix, v.q / 2, single(a0, literal(0), drop));
          push(mix, v.q / 2, single(a1, drop, literal(0)));
          push(mix, 1.0 - v.q, single(a0, literal(0), literal(0)));
        } else if constexpr (std::is_same_v<T, Intermediate>) {
          push(mix, 1.0, single(v.theta_deg, literal(0), literal(0)));
        } else if constexpr (std::is_same_v<T, ConflictAware>) {
          if (k == Knowledge::Outsider)
            throw std::invalid_argument("conflict-aware strategies need insider knowledge");
          if (m0 == m1) {
            push(mix, 1.0, single(a0, literal(0), literal(0)));
          } else {
            const auto fill = constant(v.fill == Fill::Drop ? Response::Drop : Response::Guess);
            push(mix, v.alpha, single(22.5, literal(0), literal(0)));
            push(mix, (1.0 - v.alpha) / 2, single(a0, literal(0), fill));
            push(mix, (1.0 - v.alpha) / 2, single(a1, fill, literal(0)));
          }
        }
      },
      s.kind);
  return mix;
}

std::string describe(const AttackStrategy& s) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, Split>) {
          return "split(q=" + fmt(v.q) + ")";
        } else if constexpr (std::is_same_v<T, Intermediate>) {
          return "intermediate(theta=" + fmt(v.theta_deg) + ")";
        } else if constexpr (std::is_same_v<T, ConflictAware>) {
          return "conflict_aware(alpha=" + fmt(v.alpha) +
                 ",fill=" + (v.fill == Fill::Drop ? "drop" : "guess") + ")";
        } else if constexpr (std::is_same_v<T, Mixture>) {
          std::string out = "mixture(";
          for (std::size_t i = 0; i < v.components.size(); ++i) {
            if (i) out += ",";
            out += fmt(v.components[i].weight) + "*" + describe(v.components[i].strategy);
          }
          return out + ")";
        } else {
          static const char* names[8] = {"1:DA-DA", "1:DA-HV", "1:HV-DA", "1:HV-HV",
                                         "2:DA-DA", "2:DA-HV", "2:HV-DA", "2:HV-HV"};
          std::string out = "tabulated(";
          bool first = true;
          for (int c = 0; c < 8; ++c) {
            if (v.classes[c].empty()) continue;
            if (!first) out += "; ";
            first = false;
            out += names[c];
            out += " ";
            for (std::size_t i = 0; i < v.classes[c].size(); ++i) {
              if (i) out += " + ";
              out += fmt(v.classes[c][i].weight) + "*[" + v.classes[c][i].action.describe() + "]";
            }
          }
          return out + ")";
        }
      },
      s.kind);
}

// ---- parsing -------------------------------------------------------------

namespace {

class StrategyParser {
 public:
  explicit StrategyParser(std::string_view text) : s_(text) {}

  AttackStrategy parse_all() {
    AttackStrategy out = parse();
    skip();
    if (pos_ != s_.size()) fail("trailing characters");
    return out;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    throw std::invalid_argument("attack strategy: " + what + " at offset " + std::to_string(pos_));
  }
  void skip() {
    while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
  }
  bool eat(char c) {
    skip();
    if (pos_ < s_.size() && s_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }
  void expect(char c) {
    if (!eat(c)) fail(std::string("expected '") + c + "'");
  }
  std::string ident() {
    skip();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) fail("expected a name");
    return std::string(s_.substr(start, pos_ - start));
  }
  double number() {
    skip();
    const std::string rest(s_.substr(pos_));
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(rest, &used);
    } catch (const std::exception&) {
      fail("expected a number");
    }
    pos_ += used;
    return v;
  }

  AttackStrategy parse() {
    const std::string name = ident();
    expect('(');
    AttackStrategy out;
    if (name == "mixture") {
      Mixture m;
      do {
        MixtureComponent c;
        c.weight = number();
        expect('*');
        c.strategy = parse();
        m.components.push_back(std::move(c));
      } while (eat(','));
      expect(')');
      out.kind = std::move(m);
      return out;
    }
    if (name == "split") {
      Split v;
      args([&](const std::string& k) {
        if (k != "q") fail("unknown split parameter '" + k + "'");
        v.q = number();
      });
      out.kind = v;
    } else if (name == "intermediate") {
      Intermediate v;
      args([&](const std::string& k) {
        if (k != "theta") fail("unknown intermediate parameter '" + k + "'");
        v.theta_deg = number();
      });
      out.kind = v;
    } else if (name == "conflict_aware") {
      ConflictAware v;
      args([&](const std::string& k) {
        if (k == "alpha") {
          v.alpha = number();
        } else if (k == "fill") {
          const std::string f = ident();
          if (f == "drop") v.fill = Fill::Drop;
          else if (f == "guess") v.fill = Fill::Guess;
          else fail("fill must be drop or guess");
        } else {
          fail("unknown conflict_aware parameter '" + k + "'");
        }
      });
      out.kind = v;
    } else {
      fail("unknown strategy '" + name + "'");
    }
    return out;
  }

  template <class F>
  void args(F on_key) {
    if (eat(')')) return;
    do {
      const std::string key = ident();
      expect('=');
      on_key(key);
    } while (eat(','));
    expect(')');
  }

  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

AttackStrategy parse_strategy(std::string_view text) { return StrategyParser(text).parse_all(); }

// ---- rates ---------------------------------------------------------------

std::array<TokenRates, 2> action_rates(const PureAction& a, Knowledge k, Basis m0, Basis m1,
                                       double flip_hv, double flip_da) {
  std::array<TokenRates, 2> out{};
  const int outcomes = a.copies == 2 ? 4 : 2;
  for (int t = 0; t < 2; ++t) {
    // States that can sit on a position checked for token t.
    std::array<Basis, 2> bases{t == 0 ? m0 : m1, t == 0 ? m0 : m1};
    if (k == Knowledge::Outsider) bases = {Basis::HV, Basis::DA};
    for (Basis B : bases) {
      const double f = B == Basis::HV ? flip_hv : flip_da;
      for (std::uint8_t b = 0; b < 2; ++b) {
        const Bb84State st{b, B};
        const double w = 0.25;  // two bases (or one counted twice) times two bits
        const double z1 = probability_zero(st, f, a.angle[0]);
        const double z2 = a.copies == 2 ? probability_zero(st, f, a.angle[1]) : 1.0;
        for (int o = 0; o < outcomes; ++o) {
          const double p1 = (o & 1) ? 1.0 - z1 : z1;
          const double p2 = a.copies == 2 ? ((o & 2) ? 1.0 - z2 : z2) : 1.0;
          const double p = w * p1 * p2;
          switch (a.response[t][o]) {
            case Response::Drop: out[t].loss += p; break;
            case Response::Guess: out[t].wrong += 0.5 * p; break;
            case Response::Zero: out[t].wrong += b == 1 ? p : 0.0; break;
            case Response::One: out[t].wrong += b == 0 ? p : 0.0; break;
          }
        }
      }
    }
  }
  return out;
}

std::array<TokenRates, 2> expected_rates(const AttackStrategy& s, Knowledge k,
                                         const ChannelModel& channel, double tag_agreement) {
  validate(s, k);
  channel.validate();
  if (!unit(tag_agreement)) throw std::invalid_argument("tag agreement must lie in [0,1]");
  std::array<TokenRates, 2> out{};
  for (auto& r : out) r.loss = channel.loss_prob;
  const double p_single = 1.0 - channel.loss_prob - channel.multi_prob;
  for (PhotonKind kind : {PhotonKind::Single, PhotonKind::Multi}) {
    const double pk = kind == PhotonKind::Single ? p_single : channel.multi_prob;
    if (pk <= 0.0) continue;
    for (int rel = 0; rel < 4; ++rel) {
      const Basis m0 = basis_from_bit(rel >> 1), m1 = basis_from_bit(rel & 1);
      double pr = (m0 == m1 ? tag_agreement : 1.0 - tag_agreement) / 2;
      if (k == Knowledge::Outsider) pr = 0.25;
      if (pr <= 0.0) continue;
      for (const auto& wa : compile(s, k, kind, m0, m1)) {
        const auto r = action_rates(wa.action, k, m0, m1, channel.flip_prob_hv, channel.flip_prob_da);
        for (int t = 0; t < 2; ++t) {
          out[t].loss += pk * pr * wa.weight * r[t].loss;
          out[t].wrong += pk * pr * wa.weight * r[t].wrong;
        }
      }
    }
  }
  return out;
}

// ---- simulation ----------------------------------------------------------

namespace {

Outcome respond(Response r, Rng& rng) {
  switch (r) {
    case Response::Zero: return Outcome::Zero;
    case Response::One: return Outcome::One;
    case Response::Drop: return Outcome::NoClick;
    case Response::Guess: return outcome_from_bit(rng.coin());
  }
  return Outcome::NoClick;
}

}  // namespace

DoubleSpendResult run_double_spend(const AttackStrategy& s, Knowledge k, const QuantumToken& token,
                                   const BasisString& m0, const BasisString& m1,
                                   std::size_t per_bit_group, const Rng& rng) {
  validate(s, k);
  if (m0 == m1) throw std::invalid_argument("double spending needs two different tags");
  if (m0.bits != m1.bits || per_bit_group * m0.bits != token.size())
    throw std::invalid_argument("token length does not match tag width");

  std::array<ActionMix, 8> table;
  for (PhotonKind kind : {PhotonKind::Single, PhotonKind::Multi})
    for (int rel = 0; rel < 4; ++rel) {
      const Basis b0 = basis_from_bit(rel >> 1), b1 = basis_from_bit(rel & 1);
      table[class_index(kind, b0, b1)] = compile(s, k, kind, b0, b1);
    }

  DoubleSpendResult r;
  r.outcomes[0].resize(token.size());
  r.outcomes[1].resize(token.size());
  for (std::size_t j = 0; j < token.size(); ++j) {
    const auto& ph = token.photons[j];
    if (ph.kind == PhotonKind::Vacuum) {
      r.outcomes[0][j] = r.outcomes[1][j] = Outcome::NoClick;
      continue;
    }
    const std::size_t seg = segment_of(j, per_bit_group);
    const auto& mix = table[class_index(ph.kind, m0.at(seg), m1.at(seg))];
    if (mix.empty()) {
      r.outcomes[0][j] = r.outcomes[1][j] = Outcome::NoClick;
      continue;
    }
    Rng local = rng.child(j);
    double u = local.uniform();
    const PureAction* act = &mix.back().action;
    for (const auto& wa : mix) {
      if (u < wa.weight) {
        act = &wa.action;
        break;
      }
      u -= wa.weight;
    }
    int idx = measure_copy_at_angle(ph.state, ph.flip_prob, act->angle[0], local) == Outcome::One;
    if (act->copies == 2 && ph.count >= 2)
      idx += 2 * (measure_copy_at_angle(ph.state, ph.flip_prob, act->angle[1], local) == Outcome::One);
    r.outcomes[0][j] = respond(act->response[0][idx], local);
    r.outcomes[1][j] = respond(act->response[1][idx], local);
  }
  return r;
}

void score_double_spend(DoubleSpendResult& r, const StateString& states, const BasisString& m0,
                        const BasisString& m1, std::size_t per_bit_group) {
  r.stats[0] = check_outcomes(states, r.outcomes[0], m0, per_bit_group);
  r.stats[1] = check_outcomes(states, r.outcomes[1], m1, per_bit_group);
}

}  // namespace qpay
