#pragma once

#include <span>
#include <string>
#include <vector>

#include "qpay/adversary.hpp"

namespace qpay {

/// One position of a double-spending attempt: a uniformly random BB84 state
/// handed to the adversary, who answers for two tokens. Each token's tag
/// basis at the position is known to an insider. `tag_agreement` is the
/// probability that both tags select the same basis: 0 means every position
/// is contested (each tag bit of one merchant is the complement of the
/// other's), 1/2 models two independent tags.
struct PerQubitGame {
  Knowledge knowledge = Knowledge::Insider;
  double multi_prob = 0.0;
  double tag_agreement = 0.0;

  void validate() const;
};

struct Resolution {
  double angle_step_deg = 0.5;
  double multi_angle_step_deg = 2.5;
};

/// Unrestricted: every measurement angle on the grid with every
/// outcome-to-answer map. Named: only the actions behind split and
/// intermediate strategies.
enum class ActionFamily { Unrestricted, Named };

struct SecureRegionPoint {
  double loss = 0.0;                 // loss budget l
  double min_dishonest_error = 0.0;  // e_d(l)
  double achieved_loss = 0.0;        // per-token loss of the argmin, <= l
  AttackStrategy argmin;
};

/// Lower convex frontier of the per-position game, built once and queried
/// for any loss budget. The argmin is a symmetrized tabulated strategy whose
/// two tokens see identical rates.
class AttackFrontier {
 public:
  explicit AttackFrontier(const PerQubitGame& game, const Resolution& res = {},
                          ActionFamily family = ActionFamily::Unrestricted);

  SecureRegionPoint at(double l) const;
  double e_d(double l) const { return at(l).min_dishonest_error; }
  bool is_secure(double e, double l) const { return e < e_d(l); }
  const PerQubitGame& game() const { return game_; }

 private:
  struct Candidate {
    double u, w;
    PureAction action;
  };
  struct ClassHull {
    PhotonKind kind;
    Basis m0, m1;
    double prob;
    std::vector<Candidate> chain;
  };
  struct Edge {
    double du, dw;
    std::size_t hull, index;
  };

  PerQubitGame game_;
  std::vector<ClassHull> hulls_;
  std::vector<Edge> edges_;  // sorted by slope dw/du, ascending
};

SecureRegionPoint optimal_attack_error(double l, const PerQubitGame& game, const Resolution& res = {},
                                       ActionFamily family = ActionFamily::Unrestricted);

struct SecureRegion {
  std::vector<SecureRegionPoint> points;
  AttackFrontier frontier;

  bool is_secure(double e, double l) const { return frontier.is_secure(e, l); }
};

SecureRegion secure_region(std::span<const double> losses, const PerQubitGame& game,
                           const Resolution& res = {});

/// `points` evenly spaced loss budgets from 0 to `max_loss` inclusive.
std::vector<double> loss_grid(std::size_t points = 11, double max_loss = 0.5);

/// Smallest error over mixtures of split(q=1) and intermediate(theta) with
/// theta on the resolution grid, at per-token loss <= l.
double named_family_min(double l, const PerQubitGame& game, const Resolution& res = {});

// ---- finite-size bounds --------------------------------------------------

/// Binary relative entropy D(p||q) in nats, with 0 ln 0 = 0 and +inf when q
/// sits on a boundary that p does not.
double kl_bernoulli(double p, double q);

/// `samples` is the number of checked positions on one token.
struct ChernoffParams {
  double samples = 0.0;
  double e_h = 0.0, l_h = 0.0;
  double e_T = 0.0, l_T = 0.0;
  double e_d = 0.0;
};

/// Lower bound on the honest pass probability. The error test only sees
/// clicked positions, so its exponent uses samples * (1 - l_T).
double chernoff_honest(const ChernoffParams& p);
/// Upper bound on the pass probability of a strategy whose clicked error is
/// at least e_d; 1 when e_T >= e_d.
double chernoff_dishonest(const ChernoffParams& p);
/// Natural log of chernoff_dishonest, exact where the bound underflows.
double log_chernoff_dishonest(const ChernoffParams& p);

/// Expected checked positions for a token of `states` positions.
inline double checked_positions(double states) { return states / 2.0; }
inline double midpoint_threshold(double e_h, double e_d) { return 0.5 * (e_h + e_d); }

/// lambda = N * T. T plays the role of sqrt(|C|) when tags are read as
/// T-bit basis strings.
std::size_t token_length(std::size_t per_bit_group, unsigned tag_bits);

}  // namespace qpay
