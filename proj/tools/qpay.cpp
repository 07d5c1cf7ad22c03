// qpay: run the payment protocol, attack it, and compute the analysis tables.
//
// Exit codes: 0 accepted / success, 2 rejected, 3 bad configuration or
// input, 4 transport failure.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

#include "qpay/harness.hpp"

namespace {

constexpr int kAccept = 0;
constexpr int kReject = 2;
constexpr int kConfig = 3;
constexpr int kTransport = 4;

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream f(out_path, std::ios::binary);
  if (!f) throw qpay::ConfigError("cannot write '" + out_path + "'");
  f << text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum token payment simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path;
  std::uint64_t seed = 0;
  bool seed_given = false;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "key = value configuration file");
    sub->add_option("--seed", seed, "overrides the configured seed")->each([&](const std::string&) {
      seed_given = true;
    });
    sub->add_option("--out", out_path, "output file (default: stdout)");
  };

  auto* run = app.add_subcommand("run", "issue a token and pay a merchant");
  auto* attack = app.add_subcommand("attack", "double spend one token on two merchants");
  auto* region = app.add_subcommand("region", "secure region boundary as CSV");
  auto* chernoff = app.add_subcommand("chernoff", "finite-size bounds versus N as CSV");
  auto* g2 = app.add_subcommand("g2", "heralded g2 from tag files as CSV");
  auto* keygen = app.add_subcommand("keygen", "write a MAC key file");
  for (auto* sub : {run, attack, region, chernoff, g2, keygen}) common(sub);

  std::vector<std::string> tag_files;
  g2->add_option("files", tag_files, "tag files")->required();
  unsigned tag_bits = 0;
  std::size_t slots = 0, refreshes = 0;
  keygen->add_option("--tag-bits", tag_bits, "tag width t: 8, 16, 32 or 64");
  keygen->add_option("--slots", slots, "number of one-time slots");
  keygen->add_option("--refreshes", refreshes, "key refreshes covered by the pad");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kConfig;
  }

  try {
    std::map<std::string, std::string> overrides;
    if (seed_given) overrides["seed"] = std::to_string(seed);
    if (tag_bits) overrides["T"] = std::to_string(tag_bits);
    if (slots) overrides["slots"] = std::to_string(slots);
    if (refreshes) overrides["keygen.refreshes"] = std::to_string(refreshes);
    const qpay::RunConfig cfg =
        config_path.empty() ? qpay::parse_config("", overrides) : qpay::load_config_file(config_path, overrides);

    if (run->parsed() || attack->parsed()) {
      const auto rep = run->parsed() ? qpay::cmd_run(cfg) : qpay::cmd_attack(cfg);
      emit(out_path, rep.text());
      return rep.all_accepted() ? kAccept : kReject;
    }
    if (region->parsed()) emit(out_path, qpay::cmd_region(cfg));
    if (chernoff->parsed()) emit(out_path, qpay::cmd_chernoff(cfg));
    if (g2->parsed()) emit(out_path, qpay::cmd_g2(tag_files, cfg));
    if (keygen->parsed()) {
      if (out_path.empty()) throw qpay::ConfigError("keygen needs --out");
      const auto key = qpay::cmd_keygen(cfg);
      emit(out_path, std::string(key.begin(), key.end()));
    }
    return kAccept;
  } catch (const qpay::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const qpay::TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return kTransport;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
