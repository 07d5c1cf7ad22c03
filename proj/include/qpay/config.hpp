#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qpay/adversary.hpp"
#include "qpay/protocol.hpp"
#include "qpay/quantum.hpp"
#include "qpay/security.hpp"
#include "qpay/timetag.hpp"

namespace qpay {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TransportMode { InProcess, Socket };

/// Everything a subcommand needs. Loaded from flat `key = value` text;
/// '#' starts a comment. Unknown keys are errors.
struct RunConfig {
  std::uint64_t seed = 1;
  std::string client_id;
  std::vector<std::string> merchants;
  VerificationPolicy policy;
  std::size_t mac_slots = 4;
  ChannelModel channel;
  TransportMode transport = TransportMode::InProcess;
  std::optional<AttackStrategy> attack;
  Knowledge knowledge = Knowledge::Insider;

  std::vector<double> region_losses;
  Resolution resolution;
  double region_multi_prob = 0.0;
  double tag_agreement = 0.0;

  double honest_error = 0.0;
  double honest_loss = 0.0;
  std::vector<double> chernoff_n;

  std::vector<Picoseconds> g2_windows;
  std::vector<Picoseconds> g2_taus;
  std::uint8_t g2_idler = 0, g2_d1 = 1, g2_d2 = 2;
  CoincidenceMode g2_mode = CoincidenceMode::Greedy;

  unsigned keygen_refreshes = 0;

  /// Effective key/value pairs after defaults and overrides.
  std::map<std::string, std::string> values;

  /// FNV-1a over the sorted effective values, transport excluded, so both
  /// transports of one configuration share a hash.
  std::string hash() const;
  /// Game used for threshold validation and the Chernoff floor: insider,
  /// the channel's multiphoton rate, configured tag agreement.
  PerQubitGame validation_game() const;
};

std::map<std::string, std::string> default_config_values();
RunConfig parse_config(std::string_view text,
                       const std::map<std::string, std::string>& overrides = {});
RunConfig load_config_file(const std::string& path,
                           const std::map<std::string, std::string>& overrides = {});

/// Rejects configurations whose error threshold is not below the smallest
/// error a double spender must cause at the loss threshold. Returns that
/// error.
double check_thresholds(const RunConfig& cfg);

}  // namespace qpay
