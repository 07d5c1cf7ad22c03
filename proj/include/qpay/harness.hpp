#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "qpay/config.hpp"
#include "qpay/wire.hpp"

namespace qpay {

struct MerchantResult {
  std::string merchant;
  Decision decision;
};

/// Outcome of one end-to-end run. `body()` holds everything determined by
/// the configuration; `exec.*` lines (transport, timing) are appended by
/// `text()` and excluded from the report hash.
struct RunReport {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::uint64_t token_id = 0;
  std::size_t token_length = 0;
  std::string attack = "none";
  std::vector<MerchantResult> merchants;
  std::map<std::string, std::uint64_t> messages;
  std::vector<std::pair<std::string, std::string>> extra;
  std::string transport;
  double wall_ms = 0.0;

  bool all_accepted() const;
  std::string body() const;
  std::string report_hash() const;
  std::string text() const;
};

/// Issues one token and pays with it. Honest clients pay the first merchant;
/// with an attack configured the client double spends on the first two.
/// With `independent_verifiers` each request goes to its own copy of the
/// TTP state taken after issuance.
RunReport run_protocol(const RunConfig& cfg, bool independent_verifiers, const std::string& command);

RunReport cmd_run(const RunConfig& cfg);
/// Requires an attack. Both cryptograms are judged on independent
/// verifiers, so the report shows whether each would pass on its own.
RunReport cmd_attack(const RunConfig& cfg);
std::string cmd_region(const RunConfig& cfg);
std::string cmd_chernoff(const RunConfig& cfg);
std::string cmd_g2(std::span<const std::string> files, const RunConfig& cfg);
Bytes cmd_keygen(const RunConfig& cfg);

/// "%.10g", with "nan" for NaN.
std::string format_number(double v);

}  // namespace qpay
