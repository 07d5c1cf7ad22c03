#include "qpay/security.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace qpay {

void PerQubitGame::validate() const {
  if (!(multi_prob >= 0.0 && multi_prob <= 1.0)) throw std::invalid_argument("multi_prob must lie in [0,1]");
  if (!(tag_agreement >= 0.0 && tag_agreement <= 1.0))
    throw std::invalid_argument("tag_agreement must lie in [0,1]");
}

namespace {

// Joint probability P(outcome index, bit) for a position checked for one
// token, noiseless.
using Joint = std::array<std::array<double, 2>, 4>;

Joint joint_table(int copies, const std::array<double, 2>& angle, std::span<const Basis> bases) {
  Joint j{};
  const double w = 0.5 / double(bases.size());
  for (Basis B : bases)
    for (std::uint8_t b = 0; b < 2; ++b) {
      const Bb84State st{b, B};
      const double z1 = probability_zero(st, 0.0, angle[0]);
      const double z2 = copies == 2 ? probability_zero(st, 0.0, angle[1]) : 1.0;
      for (int o = 0; o < (copies == 2 ? 4 : 2); ++o) {
        const double p1 = (o & 1) ? 1.0 - z1 : z1;
        const double p2 = copies == 2 ? ((o & 2) ? 1.0 - z2 : z2) : 1.0;
        j[o][b] += w * p1 * p2;
      }
    }
  return j;
}

struct RowOption {
  std::array<Response, 4> row;
  double u, w;
};

// MAP answers, then drop outcomes in order of decreasing conditional error.
std::vector<RowOption> row_options(const Joint& j, int outcomes) {
  std::array<Response, 4> row{};
  std::array<double, 4> mass{}, wrong{};
  std::vector<int> order;
  for (int o = 0; o < outcomes; ++o) {
    mass[o] = j[o][0] + j[o][1];
    row[o] = j[o][0] >= j[o][1] ? Response::Zero : Response::One;
    wrong[o] = std::min(j[o][0], j[o][1]);
    if (mass[o] > 1e-15) order.push_back(o);
  }
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return wrong[a] / mass[a] > wrong[b] / mass[b]; });
  std::vector<RowOption> out;
  double u = 0.0, w = std::accumulate(wrong.begin(), wrong.end(), 0.0);
  out.push_back({row, u, w});
  for (int o : order) {
    row[o] = Response::Drop;
    u += mass[o];
    w -= wrong[o];
    out.push_back({row, u, std::max(0.0, w)});
  }
  return out;
}

double cross(double ou, double ow, double au, double aw, double bu, double bw) {
  return (au - ou) * (bw - ow) - (aw - ow) * (bu - ou);
}

std::vector<double> angle_grid(double step, double limit) {
  if (!(step > 0.0)) throw std::invalid_argument("angle step must be positive");
  std::vector<double> out;
  for (std::size_t i = 0;; ++i) {
    const double a = double(i) * step;
    if (a >= limit - 1e-12) break;
    out.push_back(a);
  }
  return out;
}

PureAction single_action(double angle, std::array<Response, 4> r0, std::array<Response, 4> r1) {
  PureAction a;
  a.angle = {angle, 0.0};
  a.response = {r0, r1};
  return a;
}

}  // namespace

AttackFrontier::AttackFrontier(const PerQubitGame& game, const Resolution& res, ActionFamily family)
    : game_(game) {
  game.validate();
  const auto single_angles = angle_grid(res.angle_step_deg, family == ActionFamily::Named ? 90.0 : 180.0);
  const auto multi_angles = angle_grid(res.multi_angle_step_deg, 180.0);

  struct ClassSpec {
    PhotonKind kind;
    Basis m0, m1;
    double prob;
  };
  std::vector<ClassSpec> classes;
  for (PhotonKind kind : {PhotonKind::Single, PhotonKind::Multi}) {
    const double pk = kind == PhotonKind::Single ? 1.0 - game.multi_prob : game.multi_prob;
    if (pk <= 0.0) continue;
    if (game.knowledge == Knowledge::Outsider) {
      classes.push_back({kind, Basis::HV, Basis::DA, pk});
      continue;
    }
    for (int rel = 0; rel < 4; ++rel) {
      const Basis m0 = basis_from_bit(rel >> 1), m1 = basis_from_bit(rel & 1);
      const double pr = (m0 == m1 ? game.tag_agreement : 1.0 - game.tag_agreement) / 2;
      if (pr > 0.0) classes.push_back({kind, m0, m1, pk * pr});
    }
  }

  for (const auto& cs : classes) {
    std::vector<Candidate> pts;
    std::array<Basis, 2> b0{cs.m0, cs.m0}, b1{cs.m1, cs.m1};
    if (game.knowledge == Knowledge::Outsider) b0 = b1 = {Basis::HV, Basis::DA};

    auto add_measurement = [&](int copies, std::array<double, 2> angle) {
      const int outcomes = copies == 2 ? 4 : 2;
      const auto r0 = row_options(joint_table(copies, angle, b0), outcomes);
      const auto r1 = row_options(joint_table(copies, angle, b1), outcomes);
      for (const auto& x : r0)
        for (const auto& y : r1) {
          PureAction a;
          a.copies = static_cast<std::uint8_t>(copies);
          a.angle = angle;
          a.response = {x.row, y.row};
          pts.push_back({(x.u + y.u) / 2, (x.w + y.w) / 2, a});
        }
    };
    auto add_fixed = [&](const PureAction& a) {
      const auto r = action_rates(a, game.knowledge, cs.m0, cs.m1, 0.0, 0.0);
      pts.push_back({(r[0].loss + r[1].loss) / 2, (r[0].wrong + r[1].wrong) / 2, a});
    };

    if (family == ActionFamily::Unrestricted) {
      if (cs.kind == PhotonKind::Single) {
        for (double a : single_angles) add_measurement(1, {a, 0.0});
      } else {
        for (double a : multi_angles)
          for (double b : multi_angles) add_measurement(2, {a, b});
      }
    } else {
      const double a0 = basis_angle(cs.m0), a1 = basis_angle(cs.m1);
      const auto drop = constant(Response::Drop);
      if (cs.kind == PhotonKind::Single) {
        add_fixed(single_action(a0, literal(0), drop));
        add_fixed(single_action(a1, drop, literal(0)));
        for (double a : single_angles) add_fixed(single_action(a, literal(0), literal(0)));
      } else {
        PureAction a;
        a.copies = 2;
        a.angle = {a0, a1};
        a.response = {literal(0), literal(1)};
        add_fixed(a);
      }
    }

    std::sort(pts.begin(), pts.end(), [](const Candidate& x, const Candidate& y) {
      return x.u != y.u ? x.u < y.u : x.w < y.w;
    });
    std::vector<Candidate> hull;
    for (const auto& p : pts) {
      if (!hull.empty() && std::abs(hull.back().u - p.u) < 1e-13) {
        if (p.w >= hull.back().w) continue;
        hull.pop_back();
      }
      while (hull.size() >= 2 && cross(hull[hull.size() - 2].u, hull[hull.size() - 2].w, hull.back().u,
                                       hull.back().w, p.u, p.w) <= 1e-15)
        hull.pop_back();
      hull.push_back(p);
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < hull.size(); ++i)
      if (hull[i].w < hull[best].w - 1e-15) best = i;
    hull.resize(best + 1);
    hulls_.push_back({cs.kind, cs.m0, cs.m1, cs.prob, std::move(hull)});
  }

  for (std::size_t h = 0; h < hulls_.size(); ++h) {
    const auto& c = hulls_[h].chain;
    for (std::size_t i = 0; i + 1 < c.size(); ++i)
      edges_.push_back({hulls_[h].prob * (c[i + 1].u - c[i].u), hulls_[h].prob * (c[i + 1].w - c[i].w), h, i});
  }
  std::stable_sort(edges_.begin(), edges_.end(),
                   [](const Edge& a, const Edge& b) { return a.dw * b.du < b.dw * a.du; });
}

SecureRegionPoint AttackFrontier::at(double l) const {
  if (!(l >= 0.0)) throw std::invalid_argument("loss budget must be nonnegative");
  double u = 0.0, w = 0.0;
  for (const auto& h : hulls_) {
    u += h.prob * h.chain.front().u;
    w += h.prob * h.chain.front().w;
  }
  if (u > l + 1e-12) throw std::invalid_argument("loss budget below the smallest achievable loss");

  auto ratio = [](double uu, double ww) { return uu < 1.0 ? ww / (1.0 - uu) : 0.0; };
  double best = ratio(u, w), best_u = u;
  std::size_t best_edges = 0;
  double best_frac = 0.0;
  for (std::size_t k = 0; k < edges_.size(); ++k) {
    const auto& e = edges_[k];
    if (u + e.du <= l) {
      u += e.du;
      w += e.dw;
      if (ratio(u, w) < best) {
        best = ratio(u, w);
        best_u = u;
        best_edges = k + 1;
        best_frac = 0.0;
      }
    } else {
      const double f = (l - u) / e.du;
      const double pu = u + f * e.du, pw = w + f * e.dw;
      if (f > 0.0 && ratio(pu, pw) < best) {
        best = ratio(pu, pw);
        best_u = pu;
        best_edges = k;
        best_frac = f;
      }
      break;
    }
  }

  // Per-class position at the optimum: a vertex, or a mix of two neighbours.
  std::vector<std::size_t> vertex(hulls_.size(), 0);
  for (std::size_t k = 0; k < best_edges; ++k) ++vertex[edges_[k].hull];
  std::vector<ActionMix> mixes(hulls_.size());
  for (std::size_t h = 0; h < hulls_.size(); ++h) {
    const auto& c = hulls_[h].chain;
    const bool partial = best_frac > 0.0 && edges_[best_edges].hull == h;
    if (partial) {
      mixes[h].push_back({1.0 - best_frac, c[vertex[h]].action});
      mixes[h].push_back({best_frac, c[vertex[h] + 1].action});
    } else {
      mixes[h].push_back({1.0, c[vertex[h]].action});
    }
  }

  Tabulated tab;
  for (std::size_t h = 0; h < hulls_.size(); ++h) {
    const auto& hc = hulls_[h];
    std::size_t mirror = h;
    for (std::size_t g = 0; g < hulls_.size(); ++g)
      if (hulls_[g].kind == hc.kind && hulls_[g].m0 == hc.m1 && hulls_[g].m1 == hc.m0) mirror = g;
    if (game_.knowledge == Knowledge::Outsider) mirror = h;
    auto& out = tab.classes[class_index(hc.kind, hc.m0, hc.m1)];
    for (const auto& wa : mixes[h]) out.push_back({wa.weight / 2, wa.action});
    for (const auto& wa : mixes[mirror]) out.push_back({wa.weight / 2, wa.action.swapped()});
  }

  SecureRegionPoint p;
  p.loss = l;
  p.min_dishonest_error = best;
  p.achieved_loss = best_u;
  p.argmin.kind = std::move(tab);
  return p;
}

SecureRegionPoint optimal_attack_error(double l, const PerQubitGame& game, const Resolution& res,
                                       ActionFamily family) {
  return AttackFrontier(game, res, family).at(l);
}

SecureRegion secure_region(std::span<const double> losses, const PerQubitGame& game,
                           const Resolution& res) {
  SecureRegion r{{}, AttackFrontier(game, res)};
  for (double l : losses) r.points.push_back(r.frontier.at(l));
  return r;
}

std::vector<double> loss_grid(std::size_t points, double max_loss) {
  if (points < 2) throw std::invalid_argument("loss grid needs at least two points");
  std::vector<double> out;
  for (std::size_t i = 0; i < points; ++i) out.push_back(max_loss * double(i) / double(points - 1));
  return out;
}

double named_family_min(double l, const PerQubitGame& game, const Resolution& res) {
  ChannelModel ch;
  ch.multi_prob = game.multi_prob;
  AttackStrategy split;
  split.kind = Split{1.0};
  const double split_loss = expected_rates(split, game.knowledge, ch, game.tag_agreement)[0].loss;
  const double q = split_loss > 0.0 ? std::min(1.0, l / split_loss) : 1.0;
  double best = std::numeric_limits<double>::infinity();
  for (double theta : angle_grid(res.angle_step_deg, 90.0)) {
    AttackStrategy s;
    Mixture m;
    m.components.push_back({q, split});
    AttackStrategy inter;
    inter.kind = Intermediate{theta};
    m.components.push_back({1.0 - q, inter});
    s.kind = std::move(m);
    const auto r = expected_rates(s, game.knowledge, ch, game.tag_agreement);
    best = std::min(best, 0.5 * (r[0].error() + r[1].error()));
  }
  return best;
}

// ---- finite-size bounds --------------------------------------------------

double kl_bernoulli(double p, double q) {
  auto term = [](double a, double b) {
    if (a <= 0.0) return 0.0;
    if (b <= 0.0) return std::numeric_limits<double>::infinity();
    return a * std::log(a / b);
  };
  return term(p, q) + term(1.0 - p, 1.0 - q);
}

double chernoff_honest(const ChernoffParams& p) {
  if (!(p.e_h < p.e_T) || !(p.l_h < p.l_T)) return 0.0;
  const double b = 1.0 - std::exp(-p.samples * (1.0 - p.l_T) * kl_bernoulli(p.e_T, p.e_h)) -
                   std::exp(-p.samples * kl_bernoulli(p.l_T, p.l_h));
  return std::clamp(b, 0.0, 1.0);
}

double log_chernoff_dishonest(const ChernoffParams& p) {
  if (p.e_T >= p.e_d) return 0.0;
  return -p.samples * (1.0 - p.l_T) * kl_bernoulli(p.e_T, p.e_d);
}

double chernoff_dishonest(const ChernoffParams& p) { return std::exp(log_chernoff_dishonest(p)); }

std::size_t token_length(std::size_t per_bit_group, unsigned tag_bits) {
  return per_bit_group * tag_bits;
}

}  // namespace qpay
