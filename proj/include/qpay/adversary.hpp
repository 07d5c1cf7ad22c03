#pragma once

#include <array>
#include <string>
#include <variant>
#include <vector>

#include "qpay/itmac.hpp"
#include "qpay/protocol.hpp"
#include "qpay/quantum.hpp"
#include "qpay/rng.hpp"

namespace qpay {

/// Insider: knows the merchant tags m_0 and m_1 position by position.
/// Outsider: does not, and measures in a fixed frame where token 0 is
/// associated with HV and token 1 with DA.
enum class Knowledge { Insider, Outsider };

const char* to_string(Knowledge k);

// ---- per-position actions ------------------------------------------------

/// What to report for one token after seeing a measurement outcome.
enum class Response : std::uint8_t { Zero, One, Drop, Guess };

/// Measure one or two copies at absolute angles, then report per token from
/// a table indexed by outcome: o1 for one copy, o1 + 2*o2 for two.
struct PureAction {
  std::uint8_t copies = 1;
  std::array<double, 2> angle{0.0, 0.0};
  std::array<std::array<Response, 4>, 2> response{};

  /// Same measurement with the token roles exchanged.
  PureAction swapped() const;
  std::string describe() const;
};

struct WeightedAction {
  double weight = 0.0;
  PureAction action;
};
using ActionMix = std::vector<WeightedAction>;

/// Response row reporting the outcome of copy `copy` (0 or 1) literally.
std::array<Response, 4> literal(int copy);
std::array<Response, 4> constant(Response r);

/// Class index for tabulated strategies: (kind, m0 basis, m1 basis).
inline int class_index(PhotonKind kind, Basis m0, Basis m1) {
  return (kind == PhotonKind::Multi ? 4 : 0) + 2 * int(basis_bit(m0)) + int(basis_bit(m1));
}

// ---- strategies ----------------------------------------------------------

enum class Fill { Guess, Drop };

/// Fraction q of positions split evenly between the two tokens (answer one,
/// drop the other); the rest measured in token 0's basis and reported to both.
struct Split {
  double q = 1.0;
};
/// Every position measured at absolute angle theta; the outcome goes to both.
struct Intermediate {
  double theta_deg = 22.5;
};
/// Insider only. Agreeing positions: measure the common basis, report to
/// both. Conflicting positions: with probability alpha measure halfway
/// between the two bases and report to both; otherwise serve one token
/// (chosen evenly) and fill the other.
struct ConflictAware {
  double alpha = 0.0;
  Fill fill = Fill::Drop;
};
/// Explicit per-class action mixtures, as produced by the optimizer.
struct Tabulated {
  std::array<ActionMix, 8> classes;
};

struct MixtureComponent;
struct Mixture {
  std::vector<MixtureComponent> components;
};

struct AttackStrategy {
  std::variant<Split, Intermediate, ConflictAware, Mixture, Tabulated> kind;
};

struct MixtureComponent {
  double weight = 0.0;
  AttackStrategy strategy;
};

/// Throws std::invalid_argument on out-of-range parameters or on a
/// conflict-aware component under the outsider model.
void validate(const AttackStrategy& s, Knowledge k);
std::string describe(const AttackStrategy& s);
/// Parses the CLI syntax: split(q=1), intermediate(theta=22.5),
/// conflict_aware(alpha=0,fill=drop), mixture(0.4*split(q=1),0.6*...).
AttackStrategy parse_strategy(std::string_view text);

/// Actions for one photon kind and basis pair. Outsider strategies ignore
/// m0/m1. Multi positions measure one copy on each token's axis (under the
/// outsider frame, HV for token 0 and DA for token 1) unless the strategy is
/// tabulated.
ActionMix compile(const AttackStrategy& s, Knowledge k, PhotonKind kind, Basis m0, Basis m1);

// ---- rates ---------------------------------------------------------------

/// Per-token rates over the checked set: `loss` is the NoClick probability,
/// `wrong` the probability of a wrong answer (not conditioned on a click).
struct TokenRates {
  double loss = 0.0;
  double wrong = 0.0;

  double error() const { return loss < 1.0 ? wrong / (1.0 - loss) : 0.0; }
};

/// Exact per-token rates of one action for a photon that is checked for
/// token k. Insider: the state basis is m_k. Outsider: uniform over bases.
std::array<TokenRates, 2> action_rates(const PureAction& a, Knowledge k, Basis m0, Basis m1,
                                       double flip_hv, double flip_da);

/// Closed-form checked-set rates for each token. `tag_agreement` is the
/// probability that m_0 and m_1 agree at a position; 1/2 for independent
/// tags.
std::array<TokenRates, 2> expected_rates(const AttackStrategy& s, Knowledge k,
                                         const ChannelModel& channel, double tag_agreement = 0.5);

// ---- simulation ----------------------------------------------------------

struct DoubleSpendResult {
  std::array<std::vector<Outcome>, 2> outcomes;
  /// Filled by score_double_spend.
  std::array<CheckStats, 2> stats{};
};

/// Builds two outcome strings from one received token. Position j uses
/// stream rng.child(j). Throws std::invalid_argument when m0 == m1.
DoubleSpendResult run_double_spend(const AttackStrategy& s, Knowledge k, const QuantumToken& token,
                                   const BasisString& m0, const BasisString& m1,
                                   std::size_t per_bit_group, const Rng& rng);

/// Scores both outcome strings against the TTP's record, as verification
/// would.
void score_double_spend(DoubleSpendResult& r, const StateString& states, const BasisString& m0,
                        const BasisString& m1, std::size_t per_bit_group);

}  // namespace qpay
