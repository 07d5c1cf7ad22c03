#include "qpay/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace qpay {

std::map<std::string, std::string> default_config_values() {
  return {
      {"seed", "1"},
      {"client", "client-0"},
      {"merchants", "merchant-0,merchant-1"},
      {"N", "31250"},
      {"T", "32"},
      {"slots", "4"},
      {"e_T", "0.035"},
      {"l_T", "0.30"},
      {"loss", "0.224"},
      {"flip_hv", "0.0145"},
      {"flip_da", "0.0328"},
      {"multi", "0.0676"},
      {"max_multi", "2"},
      {"transport", "inproc"},
      {"attack", "none"},
      {"knowledge", "insider"},
      {"tag_agreement", "0"},
      {"region.points", "11"},
      {"region.max_loss", "0.5"},
      {"region.angle_step", "0.5"},
      {"region.multi_angle_step", "2.5"},
      {"region.multi", "0"},
      {"honest.error", "0.0328"},
      {"honest.loss", "0.224"},
      {"chernoff.n_min", "1000"},
      {"chernoff.n_max", "100000"},
      {"chernoff.points", "10"},
      {"g2.windows", "2960"},
      {"g2.tau_min", "-20000"},
      {"g2.tau_max", "20000"},
      {"g2.tau_step", "1000"},
      {"g2.idler", "0"},
      {"g2.d1", "1"},
      {"g2.d2", "2"},
      {"g2.mode", "greedy"},
      {"keygen.refreshes", "0"},
  };
}

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

class Reader {
 public:
  explicit Reader(const std::map<std::string, std::string>& v) : v_(v) {}

  const std::string& str(const std::string& key) const { return v_.at(key); }

  double real(const std::string& key) const {
    const auto& s = str(key);
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || !std::isfinite(x)) bad(key, "a number");
    return x;
  }

  std::int64_t integer(const std::string& key) const {
    const auto& s = str(key);
    std::size_t used = 0;
    long long x = 0;
    try {
      x = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) bad(key, "an integer");
    return x;
  }

  std::uint64_t count(const std::string& key, std::uint64_t min = 0) const {
    const auto x = integer(key);
    if (x < std::int64_t(min)) bad(key, "an integer >= " + std::to_string(min));
    return static_cast<std::uint64_t>(x);
  }

  std::uint64_t u64(const std::string& key) const {
    const auto& s = str(key);
    std::size_t used = 0;
    unsigned long long x = 0;
    try {
      x = std::stoull(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size() || s[0] == '-') bad(key, "an unsigned integer");
    return x;
  }

  [[noreturn]] void bad(const std::string& key, const std::string& what) const {
    throw ConfigError("config key '" + key + "' must be " + what + " (got '" + str(key) + "')");
  }

 private:
  const std::map<std::string, std::string>& v_;
};

}  // namespace

std::string RunConfig::hash() const {
  std::string canon;
  for (const auto& [k, v] : values) {
    if (k == "transport") continue;
    canon += k + "=" + v + "\n";
  }
  return to_hex(fnv1a64(canon));
}

PerQubitGame RunConfig::validation_game() const {
  return PerQubitGame{Knowledge::Insider, channel.multi_prob, tag_agreement};
}

RunConfig parse_config(std::string_view text, const std::map<std::string, std::string>& overrides) {
  auto values = default_config_values();
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    if (!values.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    values[key] = value;
  }
  for (const auto& [k, v] : overrides) {
    if (!values.count(k)) throw ConfigError("unknown key '" + k + "'");
    values[k] = v;
  }

  RunConfig c;
  const Reader r(values);
  c.seed = r.u64("seed");
  c.client_id = r.str("client");
  if (c.client_id.empty() || c.client_id.size() > 0xffff) r.bad("client", "a nonempty name");
  c.merchants = split_list(r.str("merchants"));
  if (c.merchants.empty()) r.bad("merchants", "a nonempty comma-separated list");
  for (std::size_t i = 0; i < c.merchants.size(); ++i) {
    if (c.merchants[i].size() > MerchantId::kMaxBytes) r.bad("merchants", "a list of ids of at most 31 bytes");
    for (std::size_t j = 0; j < i; ++j)
      if (c.merchants[i] == c.merchants[j]) r.bad("merchants", "a list of distinct ids");
  }

  c.policy.per_bit_group = r.count("N", 1);
  c.policy.tag_bits = static_cast<unsigned>(r.count("T", 1));
  c.policy.loss_threshold = r.real("l_T");
  c.mac_slots = r.count("slots", 1);

  c.channel.loss_prob = r.real("loss");
  c.channel.flip_prob_hv = r.real("flip_hv");
  c.channel.flip_prob_da = r.real("flip_da");
  c.channel.multi_prob = r.real("multi");
  c.channel.max_multi = static_cast<unsigned>(r.count("max_multi", 2));
  try {
    c.channel.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  const auto& transport = r.str("transport");
  if (transport == "inproc") c.transport = TransportMode::InProcess;
  else if (transport == "socket") c.transport = TransportMode::Socket;
  else r.bad("transport", "inproc or socket");

  const auto& knowledge = r.str("knowledge");
  if (knowledge == "insider") c.knowledge = Knowledge::Insider;
  else if (knowledge == "outsider") c.knowledge = Knowledge::Outsider;
  else r.bad("knowledge", "insider or outsider");

  if (r.str("attack") != "none") {
    try {
      c.attack = parse_strategy(r.str("attack"));
      validate(*c.attack, c.knowledge);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }

  c.tag_agreement = r.real("tag_agreement");
  c.region_multi_prob = r.real("region.multi");
  c.resolution.angle_step_deg = r.real("region.angle_step");
  c.resolution.multi_angle_step_deg = r.real("region.multi_angle_step");
  if (!(c.resolution.angle_step_deg > 0 && c.resolution.angle_step_deg <= 0.5))
    r.bad("region.angle_step", "in (0, 0.5]");
  if (!(c.resolution.multi_angle_step_deg > 0 && c.resolution.multi_angle_step_deg <= 45))
    r.bad("region.multi_angle_step", "in (0, 45]");
  const auto points = r.count("region.points", 2);
  const double max_loss = r.real("region.max_loss");
  if (!(max_loss > 0 && max_loss <= 1)) r.bad("region.max_loss", "in (0, 1]");
  c.region_losses = loss_grid(points, max_loss);
  try {
    PerQubitGame{Knowledge::Insider, c.region_multi_prob, c.tag_agreement}.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  c.honest_error = r.real("honest.error");
  c.honest_loss = r.real("honest.loss");
  const double n_min = r.real("chernoff.n_min"), n_max = r.real("chernoff.n_max");
  const auto n_points = r.count("chernoff.points", 2);
  if (!(n_min > 0 && n_max > n_min)) r.bad("chernoff.n_max", "above chernoff.n_min > 0");
  for (std::uint64_t i = 0; i < n_points; ++i)
    c.chernoff_n.push_back(std::round(n_min + (n_max - n_min) * double(i) / double(n_points - 1)));

  for (const auto& w : split_list(r.str("g2.windows"))) {
    std::map<std::string, std::string> one{{"g2.windows", w}};
    const auto x = Reader(one).integer("g2.windows");
    if (x <= 0) Reader(one).bad("g2.windows", "positive picosecond windows");
    c.g2_windows.push_back(x);
  }
  if (c.g2_windows.empty()) r.bad("g2.windows", "a nonempty list");
  const auto tau_min = r.integer("g2.tau_min"), tau_max = r.integer("g2.tau_max");
  const auto tau_step = r.integer("g2.tau_step");
  if (tau_step <= 0 || tau_max < tau_min) r.bad("g2.tau_step", "positive with tau_min <= tau_max");
  for (auto t = tau_min; t <= tau_max; t += tau_step) c.g2_taus.push_back(t);
  auto channel_id = [&](const char* key) {
    const auto x = r.count(key);
    if (x > 255) r.bad(key, "a channel id below 256");
    return static_cast<std::uint8_t>(x);
  };
  c.g2_idler = channel_id("g2.idler");
  c.g2_d1 = channel_id("g2.d1");
  c.g2_d2 = channel_id("g2.d2");
  const auto& mode = r.str("g2.mode");
  if (mode == "greedy") c.g2_mode = CoincidenceMode::Greedy;
  else if (mode == "allpairs") c.g2_mode = CoincidenceMode::AllPairs;
  else r.bad("g2.mode", "greedy or allpairs");
  c.keygen_refreshes = static_cast<unsigned>(r.count("keygen.refreshes"));

  if (r.str("e_T") == "auto") {
    c.policy.error_threshold = 0.0;
    c.values = values;
    const double e_d = AttackFrontier(c.validation_game(), c.resolution).e_d(c.policy.loss_threshold);
    c.policy.error_threshold = midpoint_threshold(c.honest_error, e_d);
  } else {
    c.policy.error_threshold = r.real("e_T");
  }
  try {
    c.policy.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.mac_slots > 1'000'000) r.bad("slots", "at most 10^6");
  c.values = std::move(values);
  return c;
}

RunConfig load_config_file(const std::string& path, const std::map<std::string, std::string>& overrides) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str(), overrides);
}

double check_thresholds(const RunConfig& cfg) {
  const double e_d = AttackFrontier(cfg.validation_game(), cfg.resolution).e_d(cfg.policy.loss_threshold);
  if (!(cfg.policy.error_threshold < e_d)) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "error threshold %.6g is not below e_d(l_T = %.6g) = %.6g",
                  cfg.policy.error_threshold, cfg.policy.loss_threshold, e_d);
    throw ConfigError(buf);
  }
  return e_d;
}

}  // namespace qpay
