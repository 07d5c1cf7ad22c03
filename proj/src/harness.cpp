#include "qpay/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <functional>
#include <iterator>
#include <mutex>
#include <thread>

#include "qpay/adversary.hpp"
#include "qpay/security.hpp"
#include "qpay/timetag.hpp"

namespace qpay {

std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

bool RunReport::all_accepted() const {
  return !merchants.empty() &&
         std::all_of(merchants.begin(), merchants.end(), [](const auto& m) { return m.decision.accepted; });
}

std::string RunReport::body() const {
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + "=" + v + "\n"; };
  line("command", command);
  line("config_hash", config_hash);
  line("seed", std::to_string(seed));
  line("token_id", std::to_string(token_id));
  line("token_length", std::to_string(token_length));
  line("attack", attack);
  for (std::size_t i = 0; i < merchants.size(); ++i) {
    const std::string p = "merchant." + std::to_string(i) + ".";
    const auto& d = merchants[i].decision;
    line(p + "id", merchants[i].merchant);
    line(p + "accepted", d.accepted ? "true" : "false");
    line(p + "reason", to_string(d.reason));
    line(p + "error", exact(d.measured_error));
    line(p + "loss", exact(d.measured_loss));
    line(p + "checked", std::to_string(d.checked_count));
  }
  line("accepted", all_accepted() ? "true" : "false");
  for (const auto& [k, v] : messages) line("messages." + k, std::to_string(v));
  for (const auto& [k, v] : extra) line(k, v);
  return out;
}

std::string RunReport::report_hash() const { return to_hex(fnv1a64(body())); }

std::string RunReport::text() const {
  std::string out = body();
  out += "exec.transport=" + transport + "\n";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.3f", wall_ms);
  out += "exec.wall_ms=" + std::string(buf) + "\n";
  out += "report_hash=" + report_hash() + "\n";
  return out;
}

// ---- roles ---------------------------------------------------------------

namespace {

using Link = std::function<std::unique_ptr<Endpoint>(std::size_t)>;

struct SentCounter {
  std::mutex mu;
  std::map<std::string, std::uint64_t> sent;

  void send(Endpoint& e, const Frame& f) {
    e.send(f);
    std::lock_guard lock(mu);
    ++sent[to_string(f.type)];
  }
};

struct Shared {
  const RunConfig& cfg;
  std::size_t paid;  // merchants receiving a cryptogram
  bool independent;
  SentCounter counter;
  TrustedTokenProvider ttp;
  MacKey client_key;
  std::uint64_t token_id = 0;
  std::vector<MerchantResult> results;
};

void ttp_role(Shared& s, Link client_link, Link merchant_link) {
  const auto& cfg = s.cfg;
  auto client = client_link(0);
  const Rng root(cfg.seed);
  const auto issued = s.ttp.issue(cfg.client_id, cfg.policy.token_length(), root.named("token"));
  s.token_id = issued.description.token_id;
  s.counter.send(*client, encode(IssueMsg{issued.description.token_id, cfg.client_id,
                                          issued.token.size(),
                                          static_cast<std::uint32_t>(cfg.policy.per_bit_group),
                                          static_cast<std::uint8_t>(cfg.policy.tag_bits)}));
  for (const auto& chunk : chunk_token(issued.description.token_id, issued.token))
    s.counter.send(*client, encode(chunk));

  std::vector<std::unique_ptr<TrustedTokenProvider>> branches;
  if (s.independent)
    for (std::size_t i = 0; i < s.paid; ++i) branches.push_back(s.ttp.branch());

  std::vector<std::unique_ptr<Endpoint>> links;
  std::vector<VerifyRequest> reqs;
  for (std::size_t i = 0; i < s.paid; ++i) {
    links.push_back(merchant_link(i));
    reqs.push_back(decode_verify(links.back()->receive()));
  }
  // Requests are judged in merchant order, whatever order they arrived in.
  auto rank = [&](const VerifyRequest& r) {
    const auto it = std::find(cfg.merchants.begin(), cfg.merchants.end(), r.merchant.str());
    return std::distance(cfg.merchants.begin(), it);
  };
  std::vector<std::size_t> order(s.paid);
  for (std::size_t i = 0; i < s.paid; ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rank(reqs[a]) < rank(reqs[b]); });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t i = order[k];
    TrustedTokenProvider& verifier = s.independent ? *branches[k] : s.ttp;
    const Decision d = verifier.verify(reqs[i], cfg.policy);
    s.counter.send(*links[i], encode(DecisionMsg{reqs[i].token_id, reqs[i].merchant.str(), d}));
  }
}

void client_role(Shared& s, Link ttp_link, Link merchant_link) {
  const auto& cfg = s.cfg;
  auto ttp = ttp_link(0);
  const IssueMsg issue = decode_issue(ttp->receive());
  if (issue.client_id != cfg.client_id || issue.length != cfg.policy.token_length() ||
      issue.per_bit_group != cfg.policy.per_bit_group || issue.tag_bits != cfg.policy.tag_bits)
    throw ProtocolError("issued token does not match the configured layout");
  const Rng root(cfg.seed);
  const Rng channel_rng = root.named("channel");
  QuantumToken token;
  token.photons.resize(issue.length);
  std::size_t received = 0;
  while (received < issue.length) {
    auto chunk = decode_chunk(ttp->receive());
    if (chunk.token_id != issue.token_id || chunk.offset != received ||
        chunk.photons.size() > issue.length - received || chunk.photons.empty())
      throw ProtocolError("token chunk out of sequence");
    transmit_range(chunk.photons, chunk.offset, cfg.channel, channel_rng);
    std::copy(chunk.photons.begin(), chunk.photons.end(), token.photons.begin() + chunk.offset);
    received += chunk.photons.size();
  }

  std::vector<Cryptogram> crypts;
  const MerchantId m0(cfg.merchants[0]);
  if (!cfg.attack) {
    crypts.push_back(client_cryptogram(s.client_key, 0, m0, token, cfg.policy, root.named("client"),
                                       issue.token_id, cfg.client_id));
  } else {
    const MerchantId m1(cfg.merchants[1]);
    const BasisString t0 = tag(s.client_key, 0, m0);
    const BasisString t1 = evaluate(s.client_key, 0, m1.encoded());
    auto r = run_double_spend(*cfg.attack, cfg.knowledge, token, t0, t1, cfg.policy.per_bit_group,
                              root.named("attack"));
    for (int k = 0; k < 2; ++k)
      crypts.push_back(Cryptogram{issue.token_id, cfg.client_id, k == 0 ? m0 : m1, 0, std::move(r.outcomes[k])});
  }
  for (std::size_t i = 0; i < crypts.size(); ++i) {
    auto link = merchant_link(i);
    s.counter.send(*link, encode(crypts[i]));
  }
}

void merchant_role(Shared& s, std::size_t index, Link client_link, Link ttp_link) {
  const MerchantId self(s.cfg.merchants[index]);
  auto ttp = ttp_link(index);
  auto client = client_link(index);
  const Cryptogram c = decode_cryptogram(client->receive());
  s.counter.send(*ttp, encode(merchant_forward(c, self)));
  const DecisionMsg d = decode_decision(ttp->receive());
  if (d.token_id != c.token_id || d.merchant != self.str()) throw ProtocolError("decision for another request");
  s.results[index] = MerchantResult{self.str(), d.decision};
}

// Non-owning handle, so the harness can close every in-memory link when a
// role fails while the others are still blocked.
class Borrowed final : public Endpoint {
 public:
  explicit Borrowed(Endpoint* e) : e_(e) {}
  void send(const Frame& f) override { e_->send(f); }
  Frame receive() override { return e_->receive(); }
  void close() override { e_->close(); }

 private:
  Endpoint* e_;
};

Link borrow_from(std::vector<std::unique_ptr<Endpoint>>& eps) {
  return [&eps](std::size_t i) { return std::make_unique<Borrowed>(eps.at(i).get()); };
}

}  // namespace

RunReport run_protocol(const RunConfig& cfg, bool independent_verifiers, const std::string& command) {
  const auto start = std::chrono::steady_clock::now();
  const std::size_t paid = cfg.attack ? 2 : 1;
  if (cfg.merchants.size() < paid) throw ConfigError("an attack needs two merchants");

  Shared s{cfg, paid, independent_verifiers, {}, {}, {}, 0, std::vector<MerchantResult>(paid)};
  {
    Rng key_rng = Rng(cfg.seed).named("mac-key");
    try {
      s.client_key = keygen(cfg.policy.tag_bits, cfg.mac_slots, key_rng, cfg.keygen_refreshes);
    } catch (const MacError& e) {
      throw ConfigError(e.what());
    }
    s.ttp.enroll(cfg.client_id, s.client_key);
  }

  std::vector<std::function<void()>> roles;
  // Endpoints for in-process mode: [ttp side, client side] per link.
  std::vector<std::unique_ptr<Endpoint>> ttp_client(1), client_ttp(1), client_merch(paid), merch_client(paid),
      merch_ttp(paid), ttp_merch(paid);
  std::unique_ptr<LoopbackListener> ttp_client_l, ttp_merch_l;
  std::vector<std::unique_ptr<LoopbackListener>> merch_l;

  Link ttp_to_client, ttp_to_merchant, client_to_ttp, client_to_merchant, merchant_to_client, merchant_to_ttp;
  if (cfg.transport == TransportMode::InProcess) {
    std::tie(ttp_client[0], client_ttp[0]) = memory_pipe();
    for (std::size_t i = 0; i < paid; ++i) {
      std::tie(client_merch[i], merch_client[i]) = memory_pipe();
      std::tie(merch_ttp[i], ttp_merch[i]) = memory_pipe();
    }
    ttp_to_client = borrow_from(ttp_client);
    ttp_to_merchant = borrow_from(ttp_merch);
    client_to_ttp = borrow_from(client_ttp);
    client_to_merchant = borrow_from(client_merch);
    merchant_to_client = borrow_from(merch_client);
    merchant_to_ttp = borrow_from(merch_ttp);
  } else {
    ttp_client_l = std::make_unique<LoopbackListener>();
    ttp_merch_l = std::make_unique<LoopbackListener>();
    for (std::size_t i = 0; i < paid; ++i) merch_l.push_back(std::make_unique<LoopbackListener>());
    ttp_to_client = [&](std::size_t) { return ttp_client_l->accept(); };
    ttp_to_merchant = [&](std::size_t) { return ttp_merch_l->accept(); };
    client_to_ttp = [&](std::size_t) { return connect_loopback(ttp_client_l->port()); };
    client_to_merchant = [&](std::size_t i) { return connect_loopback(merch_l[i]->port()); };
    merchant_to_client = [&](std::size_t i) { return merch_l[i]->accept(); };
    merchant_to_ttp = [&](std::size_t) { return connect_loopback(ttp_merch_l->port()); };
  }

  roles.push_back([&] { ttp_role(s, ttp_to_client, ttp_to_merchant); });
  roles.push_back([&] { client_role(s, client_to_ttp, client_to_merchant); });
  for (std::size_t i = 0; i < paid; ++i)
    roles.push_back([&, i] { merchant_role(s, i, merchant_to_client, merchant_to_ttp); });

  std::vector<std::exception_ptr> errors(roles.size());
  std::vector<std::thread> threads;
  for (std::size_t r = 0; r < roles.size(); ++r)
    threads.emplace_back([&, r] {
      try {
        roles[r]();
      } catch (...) {
        errors[r] = std::current_exception();
        // Unblock roles still waiting on in-memory links.
        if (cfg.transport == TransportMode::InProcess) {
          for (auto* v : {&ttp_client, &client_merch, &merch_ttp})
            for (auto& e : *v) e->close();
        }
      }
    });
  for (auto& t : threads) t.join();

  std::exception_ptr transport_error;
  for (const auto& e : errors) {
    if (!e) continue;
    try {
      std::rethrow_exception(e);
    } catch (const TransportError&) {
      if (!transport_error) transport_error = e;
    } catch (...) {
      throw;
    }
  }
  if (transport_error) std::rethrow_exception(transport_error);

  RunReport rep;
  rep.command = command;
  rep.config_hash = cfg.hash();
  rep.seed = cfg.seed;
  rep.token_id = s.token_id;
  rep.token_length = cfg.policy.token_length();
  rep.attack = cfg.attack ? describe(*cfg.attack) : "none";
  rep.merchants = s.results;
  rep.messages = s.counter.sent;
  if (cfg.attack) {
    rep.extra.emplace_back("knowledge", to_string(cfg.knowledge));
    // Closed form for two independent tags.
    const auto r = expected_rates(*cfg.attack, cfg.knowledge, cfg.channel, 0.5);
    for (int k = 0; k < 2; ++k) {
      rep.extra.emplace_back("expected." + std::to_string(k) + ".error", exact(r[k].error()));
      rep.extra.emplace_back("expected." + std::to_string(k) + ".loss", exact(r[k].loss));
    }
    rep.extra.emplace_back("verifiers", independent_verifiers ? "independent" : "shared");
  }
  rep.transport = cfg.transport == TransportMode::InProcess ? "inproc" : "socket";
  rep.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

RunReport cmd_run(const RunConfig& cfg) {
  check_thresholds(cfg);
  return run_protocol(cfg, false, "run");
}

RunReport cmd_attack(const RunConfig& cfg) {
  if (!cfg.attack) throw ConfigError("attack subcommand needs an 'attack' strategy in the config");
  check_thresholds(cfg);
  return run_protocol(cfg, true, "attack");
}

std::string cmd_region(const RunConfig& cfg) {
  const PerQubitGame insider{Knowledge::Insider, cfg.region_multi_prob, cfg.tag_agreement};
  const PerQubitGame outsider{Knowledge::Outsider, cfg.region_multi_prob, 0.0};
  const PerQubitGame independent{Knowledge::Insider, cfg.region_multi_prob, 0.5};
  const AttackFrontier fi(insider, cfg.resolution), fo(outsider, cfg.resolution), fx(independent, cfg.resolution);

  std::string out = "# config_hash=" + cfg.hash() + "\n";
  out += "row,loss,e_d_insider,e_d_outsider,e_d_insider_independent_tags,achieved_loss_insider,"
         "reference_e_d,argmin_insider\n";
  auto row = [&](const char* kind, double l, const AttackFrontier& a, const AttackFrontier& b,
                 const AttackFrontier& c, const std::string& reference) {
    const auto p = a.at(l);
    out += std::string(kind) + "," + format_number(l) + "," + format_number(p.min_dishonest_error) + "," +
           format_number(b.e_d(l)) + "," + format_number(c.e_d(l)) + "," + format_number(p.achieved_loss) +
           "," + reference + ",\"" + describe(p.argmin) + "\"\n";
  };
  for (double l : cfg.region_losses) row("grid", l, fi, fo, fx, "");

  // Published operating point, evaluated with the channel's multiphoton rate.
  const double m = cfg.channel.multi_prob;
  const AttackFrontier ri({Knowledge::Insider, m, cfg.tag_agreement}, cfg.resolution),
      ro({Knowledge::Outsider, m, 0.0}, cfg.resolution), rx({Knowledge::Insider, m, 0.5}, cfg.resolution);
  row("reference", 0.224, ri, ro, rx, "0.0379");
  return out;
}

std::string cmd_chernoff(const RunConfig& cfg) {
  const double e_d = check_thresholds(cfg);
  std::string out = "# config_hash=" + cfg.hash() + "\n";
  out += "row,N,checked,p_h_bound,p_d_bound,log10_p_d_bound,e_d\n";
  auto row = [&](const char* kind, double n) {
    ChernoffParams p;
    p.samples = checked_positions(n);
    p.e_h = cfg.honest_error;
    p.l_h = cfg.honest_loss;
    p.e_T = cfg.policy.error_threshold;
    p.l_T = cfg.policy.loss_threshold;
    p.e_d = e_d;
    out += std::string(kind) + "," + format_number(n) + "," + format_number(p.samples) + "," +
           format_number(chernoff_honest(p)) + "," + format_number(chernoff_dishonest(p)) + "," +
           format_number(log_chernoff_dishonest(p) / std::log(10.0)) + "," + format_number(e_d) + "\n";
  };
  for (double n : cfg.chernoff_n) row("sweep", n);
  row("reference", 4.2e6);
  return out;
}

std::string cmd_g2(std::span<const std::string> files, const RunConfig& cfg) {
  if (files.empty()) throw ConfigError("g2 needs at least one tag file");
  std::map<std::uint8_t, TimeTagStream> merged;
  std::uint64_t input_hash = fnv1a64(std::string_view{});
  for (const auto& path : files) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot read tag file '" + path + "'");
    const Bytes data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    input_hash = fnv1a64(data, input_hash);
    std::vector<TimeTagStream> streams;
    try {
      streams = decode_tags(data);
    } catch (const FormatError& e) {
      throw ConfigError(path + ": " + e.what());
    }
    for (auto& s : streams) {
      auto& m = merged[s.channel];
      m.channel = s.channel;
      m.tags.insert(m.tags.end(), s.tags.begin(), s.tags.end());
    }
  }
  for (auto& [ch, s] : merged) std::sort(s.tags.begin(), s.tags.end());
  auto pick = [&](std::uint8_t ch) -> const TimeTagStream& {
    auto it = merged.find(ch);
    if (it == merged.end()) throw ConfigError("tag files hold no events on channel " + std::to_string(ch));
    return it->second;
  };
  const auto& idler = pick(cfg.g2_idler);
  const auto& d1 = pick(cfg.g2_d1);
  const auto& d2 = pick(cfg.g2_d2);

  std::string out = "# config_hash=" + cfg.hash() + "\n";
  out += "# input_hash=" + to_hex(input_hash) + "\n";
  out += "tau_ps,g2,sigma,window_ps\n";
  for (Picoseconds w : cfg.g2_windows) {
    const auto est = g2_heralded(idler, d1, d2, w, cfg.g2_taus, cfg.g2_mode);
    for (const auto& p : est.points)
      out += std::to_string(p.tau) + "," + format_number(p.g2) + "," + format_number(p.sigma) + "," +
             std::to_string(w) + "\n";
  }
  return out;
}

Bytes cmd_keygen(const RunConfig& cfg) {
  Rng key_rng = Rng(cfg.seed).named("mac-key");
  try {
    return encode_key(keygen(cfg.policy.tag_bits, cfg.mac_slots, key_rng, cfg.keygen_refreshes));
  } catch (const MacError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace qpay
