// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <regex>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "support.hpp"
#include "veryfl/chainproxy.hpp"
#include "veryfl/contracts.hpp"
#include "veryfl/errors.hpp"
#include "veryfl/fl/config.hpp"
#include "veryfl/fl/dataset.hpp"
#include "veryfl/fl/model.hpp"
#include "veryfl/fl/trainer.hpp"
#include "veryfl/ledger.hpp"
#include "veryfl/sha256.hpp"
#include "veryfl/task.hpp"
#include "veryfl/watermark.hpp"

using namespace veryfl;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult cli_run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream ss;
  ss.precision(digits);
  ss << v;
  return ss.str();
}

Digest hash_of(std::uint64_t tag, std::uint64_t i) { return sha256(Encoder{}.u64(tag).u64(i).buffer()); }

double norm_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

// Shared state: the default benchmark run twice through the CLI.
struct DefaultRuns {
  test::TempDir dir{"acceptance"};
  fs::path config, out_a, out_b;
  int code_a = -1, code_b = -1;
  std::string err;

  DefaultRuns() {
    config = dir / "default.json";
    std::ofstream(config) << fl::to_json(fl::default_benchmark());
    out_a = dir / "run_a";
    out_b = dir / "run_b";
    auto a = cli_run({"run", "--config", config.string(), "--out", out_a.string()});
    auto b = cli_run({"run", "--config", config.string(), "--out", out_b.string()});
    code_a = a.code;
    code_b = b.code;
    err = a.err + b.err;
  }
  bool ok() const { return code_a == 0 && code_b == 0; }
  fs::path log() const { return out_a / "chain.log"; }
  fs::path model() const { return out_a / "model.bin"; }
  nlohmann::json report() const { return nlohmann::json::parse(test::read_text(out_a / "report.json")); }
};

// Recomputes an election from chain data alone.
bool election_valid(const ledger::Ledger& l, const contracts::ContractSet& c, const contracts::ElectionResult& e) {
  if (c.client(e.aggregator) == nullptr) return false;
  const auto& prev = l.block(e.elected_at).prev_hash;
  if (contracts::election_seed(prev, e.round) != e.seed_digest) return false;
  const auto candidates = c.election_weights(e.round);
  std::vector<std::uint64_t> w;
  for (const auto& [addr, weight] : candidates) w.push_back(weight);
  return candidates[contracts::weighted_draw(e.seed_digest, w)].first == e.aggregator;
}

std::size_t invalid_elections(const ledger::Ledger& l) {
  const auto& c = contracts::contracts_of(l);
  std::size_t bad = 0;
  for (const auto& e : c.elections()) bad += !election_valid(l, c, e);
  return bad;
}

// ---- criteria ------------------------------------------------------------------

Verdict determinism(const DefaultRuns& runs) {
  if (!runs.ok()) return {false, "run failed: " + runs.err};
  const auto a = test::read_file(runs.out_a / "chain.log");
  const auto b = test::read_file(runs.out_b / "chain.log");
  const auto ra = nlohmann::json::parse(test::read_text(runs.out_a / "report.json"));
  const auto rb = nlohmann::json::parse(test::read_text(runs.out_b / "report.json"));
  const bool same_log = a == b;
  const bool same_root = ra["final"]["state_root"] == rb["final"]["state_root"];

  const auto log = ledger::parse_block_log(a);
  const auto replayed = ledger::Ledger::replay(log.blocks, log.chain_seed, log.account_count,
                                               std::make_unique<contracts::ContractSet>());
  std::size_t mismatched = 0;
  for (std::size_t h = 0; h < log.blocks.size(); ++h) mismatched += replayed.block(h).state_root != log.blocks[h].state_root;
  return {same_log && same_root && mismatched == 0,
          std::to_string(a.size()) + "-byte logs " + (same_log ? "identical" : "DIFFER") + ", state roots " +
              (same_root ? "equal" : "DIFFER") + ", " + std::to_string(log.blocks.size() - mismatched) + "/" +
              std::to_string(log.blocks.size()) + " replayed roots match"};
}

Verdict fedavg_oracle() {
  const auto data = fl::make_blobs({1003, 12, 3, 1.0}, 71);
  const auto part = fl::split_dataset(data.labels, 10, fl::Strategy::iid(), 72);
  const auto arch = fl::make_architecture("mlp_1hidden", 12, 3, 32);
  const auto global = fl::init_model(arch, 73);
  fl::TrainArgs args;
  args.learning_rate = 0.2;
  args.local_epochs = 1;
  args.batch_size = data.size();
  args.weight_decay = 0.0;

  std::vector<fl::ModelUpdate> updates;
  for (std::size_t c = 0; c < 10; ++c) {
    updates.push_back(fl::local_train(global, data.subset(part.of(c)), args, fl::Algorithm::kFedAvg, 100 + c));
  }
  const auto agg = fl::aggregate(updates);
  const auto pooled = fl::cross_entropy(arch, global.values, data, {});
  auto expect = global.values;
  for (std::size_t i = 0; i < expect.size(); ++i) expect[i] -= args.learning_rate * pooled.gradient[i];

  // Relative to the size of the step itself, the stricter of the two natural scales.
  const double rel = norm_diff(agg.values, expect) / norm_diff(expect, global.values);
  return {rel < 1e-9, "relative error " + fmt(rel, 3) + " over " + std::to_string(expect.size()) + " parameters"};
}

Verdict watermark_embedding(const DefaultRuns& runs) {
  if (!runs.ok()) return {false, "run failed"};
  const auto report = runs.report();
  const double rate = report["final"]["detection_rate"].get<double>();
  const std::uint64_t key_seed = report["final"]["key_seed"].get<std::uint64_t>();

  const auto log = ledger::read_block_log(runs.log());
  const auto session = chainproxy::BridgeSession::resume(log);
  const auto spec = *session.contracts().watermark_spec(report["final"]["model_id"].get<std::string>());
  const auto mf = fl::load_model(runs.model());
  const auto slice = mf.slice.view(std::span<const double>(mf.params.values));
  const auto owner_rate = watermark::detection_rate(
      watermark::extract(slice, watermark::WatermarkKey::derive(key_seed, 32, slice.size())),
      watermark::WatermarkBits{spec.bits});
  const auto other_key = watermark::WatermarkKey::derive(key_seed ^ 0x9e3779b97f4a7c15ULL, 32, slice.size());
  const double random_rate = watermark::detection_rate(watermark::extract(slice, other_key), watermark::WatermarkBits{spec.bits});

  // Central differences at 100 random points away from every hinge kink.
  std::mt19937_64 rng(404);
  std::normal_distribution<double> normal(0.0, 0.05);
  const double h = 1e-5, gamma = watermark::kDefaultGamma;
  const auto key = watermark::WatermarkKey::derive(11, 32, 512);
  double worst = 0.0;
  for (int points = 0; points < 100;) {
    std::vector<double> w(512);
    for (auto& x : w) x = normal(rng);
    watermark::WatermarkBits target;
    for (int i = 0; i < 32; ++i) target.bits.push_back(rng() & 1 ? 1 : -1);
    const auto scores = key.project(w);
    bool near_kink = false;
    for (std::size_t i = 0; i < 32; ++i) near_kink |= std::abs(gamma - target.bits[i] * scores[i]) < 10 * h;
    if (near_kink) continue;
    ++points;
    const auto g = watermark::regularizer(w, key, target, gamma).gradient;
    double diff2 = 0.0, norm2 = 0.0;
    for (std::size_t j = 0; j < w.size(); ++j) {
      auto wp = w, wm = w;
      wp[j] += h;
      wm[j] -= h;
      const double fd =
          (watermark::regularizer(wp, key, target, gamma).loss - watermark::regularizer(wm, key, target, gamma).loss) /
          (2 * h);
      diff2 += (fd - g[j]) * (fd - g[j]);
      norm2 += g[j] * g[j];
    }
    worst = std::max(worst, std::sqrt(diff2) / std::max(std::sqrt(norm2), 1.0));
  }

  const bool pass = rate == 1.0 && owner_rate == 1.0 && random_rate >= 0.2 && random_rate <= 0.8 && worst < 1e-4;
  return {pass, "k=32 d=" + std::to_string(slice.size()) + ", detection " + fmt(owner_rate) + ", independent key " +
                    fmt(random_rate) + ", gradient rel. error " + fmt(worst, 3)};
}

Verdict ownership_round_trip(const DefaultRuns& runs) {
  if (!runs.ok()) return {false, "run failed"};
  const auto report = runs.report();
  const std::uint64_t key_seed = report["final"]["key_seed"].get<std::uint64_t>();
  const auto token = report["final"]["token_id"].get<std::uint64_t>();
  const auto v = cli_run({"verify", "--model", runs.model().string(), "--log", runs.log().string(), "--token",
                          std::to_string(token), "--seed", std::to_string(key_seed)});
  const bool owned = v.code == 0 && v.out.find("verdict: OWNED") != std::string::npos;

  const auto session = chainproxy::BridgeSession::resume(ledger::read_block_log(runs.log()));
  const auto& c = session.contracts();
  const auto bits = c.watermark_spec(c.token(token)->model_id)->bits;
  std::size_t rejected = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    auto claim = bits;
    claim[i] = static_cast<std::int8_t>(-claim[i]);
    rejected += !c.verify_ownership(token, claim, key_seed);
  }
  const bool pass = owned && c.verify_ownership(token, bits, key_seed) && rejected == bits.size();
  return {pass, std::string("verify exit ") + std::to_string(v.code) + (owned ? " OWNED" : " not owned") + ", " +
                    std::to_string(rejected) + "/" + std::to_string(bits.size()) + " single-bit flips rejected"};
}

Verdict incentive_conservation() {
  std::mt19937_64 rng(55);
  test::Accounts acc(21);
  std::size_t exact = 0;
  long double worst = 0.0L;
  for (int trial = 0; trial < 100; ++trial) {
    contracts::ContractSet c;
    c.deploy(acc.as(acc.server()), 32);
    const std::size_t n = 1 + rng() % 20;
    std::vector<std::uint64_t> sizes(n);
    for (std::size_t i = 0; i < n; ++i) {
      char id[16];
      std::snprintf(id, sizeof id, "c%02zu", i);
      c.register_client(acc.as(acc.all[i + 1]), id);
      sizes[i] = 1 + rng() % 10000;
      c.record_training(acc.as(acc.all[i + 1]), 1, 0, 0, sizes[i]);
    }
    const std::uint64_t budget = 1 + rng() % 10'000'000;
    const auto before = c.balances();
    const auto rewards = c.distribute_incentives(acc.as(acc.server()), 1, budget);
    std::uint64_t sum = 0, total = 0;
    for (auto s : sizes) total += s;
    bool within = true;
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = rewards.at(acc.all[i + 1]);
      sum += r;
      const long double share = static_cast<long double>(budget) * sizes[i] / total;
      worst = std::max(worst, std::abs(static_cast<long double>(r) - share));
      within = within && std::abs(static_cast<long double>(r) - share) < 1.0L;
      within = within && c.balance(acc.all[i + 1]) - (before.count(acc.all[i + 1]) ? before.at(acc.all[i + 1]) : 0) == r;
    }
    exact += sum == budget && within;
  }
  return {exact == 100, std::to_string(exact) + "/100 settlements exact, max deviation " +
                            fmt(static_cast<double>(worst), 3) + " units"};
}

Verdict election(const std::vector<const ledger::Ledger*>& chains) {
  std::size_t checked = 0, invalid = 0;
  for (const auto* l : chains) {
    checked += contracts::contracts_of(*l).elections().size();
    invalid += invalid_elections(*l);
  }

  test::Accounts acc(11);
  contracts::ContractSet base;
  base.deploy(acc.as(acc.server()), 32);
  for (std::size_t i = 1; i <= 10; ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "c%02zu", i);
    base.register_client(acc.as(acc.all[i]), id);
  }
  std::vector<int> wins(11, 0);
  for (std::uint64_t d = 0; d < 1000; ++d) {
    auto c = base;
    const auto e = c.elect_aggregator(acc.as(acc.server(), 2, hash_of(1, d)), 1);
    ++wins[static_cast<std::size_t>(std::find(acc.all.begin(), acc.all.end(), e.aggregator) - acc.all.begin())];
  }
  double lo = 1.0, hi = 0.0;
  for (std::size_t i = 1; i <= 10; ++i) {
    lo = std::min(lo, wins[i] / 1000.0);
    hi = std::max(hi, wins[i] / 1000.0);
  }

  contracts::ContractSet pair;
  pair.deploy(acc.as(acc.server()), 32);
  pair.register_client(acc.as(acc.all[1]), "heavy");
  pair.register_client(acc.as(acc.all[2]), "light");
  pair.record_training(acc.as(acc.all[1]), 1, 0, 0, 90);
  pair.record_training(acc.as(acc.all[2]), 1, 0, 0, 10);
  int heavy = 0;
  for (std::uint64_t d = 0; d < 10000; ++d) {
    auto c = pair;
    heavy += c.elect_aggregator(acc.as(acc.server(), 3, hash_of(2, d)), 2).aggregator == acc.all[1];
  }
  const double heavy_freq = heavy / 10000.0;

  const bool pass = checked > 0 && invalid == 0 && lo >= 0.05 && hi <= 0.15 && std::abs(heavy_freq - 0.9) <= 0.02;
  return {pass, std::to_string(checked - invalid) + "/" + std::to_string(checked) +
                    " on-chain elections recomputed, equal-weight frequencies in [" + fmt(lo, 3) + ", " + fmt(hi, 3) +
                    "], heavy client " + fmt(heavy_freq, 4)};
}

Verdict partitioner() {
  std::mt19937_64 rng(606);
  std::size_t good = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 10 + rng() % 2000;
    const std::size_t classes = 2 + rng() % 9;
    const std::size_t clients = 1 + rng() % std::min<std::size_t>(n, 50);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng() % classes);
    const auto strategy = rng() % 2 ? fl::Strategy::iid() : fl::Strategy::dirichlet(std::exp(std::uniform_real_distribution<double>(-3.0, 5.0)(rng)));
    const auto p = fl::split_dataset(labels, clients, strategy, rng());
    std::vector<int> hits(n, 0);
    bool nonempty = p.clients() == clients;
    for (const auto& [c, idx] : p.assignments) {
      nonempty = nonempty && !idx.empty();
      for (auto i : idx) ++hits[i];
    }
    good += nonempty && std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; });
  }

  // Large concentration: every client's label mix tracks the global one.
  double worst = 0.0;
  for (std::uint64_t seed : {1, 2, 3}) {
    const std::size_t classes = seed == 1 ? 2 : 3;
    std::vector<int> labels(60000);
    for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % classes);
    const auto p = fl::split_dataset(labels, 10, fl::Strategy::dirichlet(1e4), seed);
    for (const auto& [c, idx] : p.assignments) {
      for (std::size_t k = 0; k < classes; ++k) {
        const double share =
            static_cast<double>(std::count_if(idx.begin(), idx.end(), [&](auto i) { return labels[i] == int(k); })) /
            static_cast<double>(idx.size());
        worst = std::max(worst, std::abs(share - 1.0 / static_cast<double>(classes)));
      }
    }
  }
  return {good == 200 && worst <= 0.05, std::to_string(good) + "/200 random splits disjoint, covering, non-empty; "
                                            "max label-share deviation " + fmt(worst * 100, 3) + " points"};
}

Verdict fedprox_behaviour() {
  const auto data = fl::make_blobs({400, 10, 2, 1.0}, 81);
  const auto global = fl::init_model("mlp_1hidden", 10, 2, 82, 32);
  fl::TrainArgs args;
  args.learning_rate = 0.1;
  args.local_epochs = 3;
  args.batch_size = 16;
  std::vector<double> dist;
  std::vector<fl::ModelParams> outs;
  for (double mu : {0.0, 0.1, 1.0, 10.0}) {
    args.mu = mu;
    outs.push_back(fl::local_train(global, data, args, fl::Algorithm::kFedProx, 83).params);
    dist.push_back(norm_diff(outs.back().values, global.values));
  }
  args.mu = 0.0;
  const auto avg = fl::local_train(global, data, args, fl::Algorithm::kFedAvg, 83).params;
  const bool monotone = std::is_sorted(dist.rbegin(), dist.rend());
  const bool identical = avg.values == outs[0].values;
  return {monotone && identical, "distances " + fmt(dist[0]) + " >= " + fmt(dist[1]) + " >= " + fmt(dist[2]) + " >= " +
                                     fmt(dist[3]) + ", mu=0 " + (identical ? "bit-identical" : "DIFFERS") + " to fedavg"};
}

struct SmokeRun {
  chainproxy::BridgeSession session;
  TaskReport report;
};

SmokeRun smoke_run() {
  auto c = fl::default_benchmark();
  c.global_args.separation = 3.0;
  c.global_args.seed = 9;
  auto s = chainproxy::BridgeSession::open(c.global_args.seed, contract_config_for(c));
  auto r = run_task(c, s);
  return {std::move(s), std::move(r)};
}

Verdict training_smoke(const TaskReport& r) {
  const double first = r.rounds.front().mean_loss, last = r.rounds.back().mean_loss;
  const double acc = std::min(r.final_accuracy, r.rounds.back().global_accuracy);
  return {last < first && acc >= 0.9, "mean client loss " + fmt(first) + " -> " + fmt(last) +
                                          ", final global accuracy " + fmt(acc)};
}

Verdict tamper_evidence(const DefaultRuns& runs) {
  if (!runs.ok()) return {false, "run failed"};
  const auto original = test::read_file(runs.log());
  // Byte ranges of each block record, length prefix included.
  std::vector<std::size_t> owner(original.size(), 0);
  {
    constexpr std::size_t kHeader = 8 + 4 + 8 + 4;
    std::size_t pos = kHeader, height = 0;
    while (pos < original.size()) {
      const std::size_t len = (std::size_t{original[pos]} << 24) | (std::size_t{original[pos + 1]} << 16) |
                              (std::size_t{original[pos + 2]} << 8) | original[pos + 3];
      for (std::size_t i = pos; i < pos + 4 + len; ++i) owner[i] = height;
      pos += 4 + len;
      ++height;
    }
  }
  const std::regex height_re("at height ([0-9]+)");
  const auto path = runs.dir / "tampered.log";
  std::size_t caught = 0;
  std::string first_miss;
  for (std::size_t i = 0; i < original.size(); ++i) {
    auto bytes = original;
    bytes[i] ^= 0xff;
    test::write_file(path, bytes);
    const auto r = cli_run({"ledger", "--log", path.string()});
    std::smatch m;
    if (r.code == 1 && std::regex_search(r.err, m, height_re) && std::stoull(m[1]) <= owner[i]) {
      ++caught;
    } else if (first_miss.empty()) {
      first_miss = ", first miss at byte " + std::to_string(i) + ": exit " + std::to_string(r.code) + " " + r.err;
    }
  }
  return {caught == original.size(),
          std::to_string(caught) + "/" + std::to_string(original.size()) + " single-byte flips rejected at or before their block" +
              first_miss};
}

}  // namespace

int main() {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  int failed = 0;

  auto report = [&](int id, const char* name, const std::function<Verdict()>& check) {
    const auto t0 = clock::now();
    Verdict v;
    try {
      v = check();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(clock::now() - t0).count();
    failed += !v.pass;
    std::cout << (v.pass ? "[PASS] " : "[FAIL] ") << id << ". " << name << ": " << v.detail << " (" << fmt(secs, 3)
              << "s)" << std::endl;
  };

  DefaultRuns runs;
  std::optional<SmokeRun> smoke;
  try {
    smoke.emplace(smoke_run());
  } catch (const std::exception& e) {
    std::cout << "smoke run failed: " << e.what() << std::endl;
  }

  report(1, "End-to-end determinism", [&] { return determinism(runs); });
  report(2, "FedAvg equals the centralized step", fedavg_oracle);
  report(3, "Watermark embedding", [&] { return watermark_embedding(runs); });
  report(4, "Ownership round trip", [&] { return ownership_round_trip(runs); });
  report(5, "Incentive conservation", incentive_conservation);
  report(6, "Election validity and fairness", [&] {
    std::vector<const ledger::Ledger*> chains;
    std::optional<chainproxy::BridgeSession> a, b;
    if (runs.ok()) {
      a.emplace(chainproxy::BridgeSession::resume(ledger::read_block_log(runs.out_a / "chain.log")));
      b.emplace(chainproxy::BridgeSession::resume(ledger::read_block_log(runs.out_b / "chain.log")));
      chains = {&a->ledger(), &b->ledger()};
    }
    if (smoke) chains.push_back(&smoke->session.ledger());
    return election(chains);
  });
  report(7, "Partitioner", partitioner);
  report(8, "FedProx behaviour", fedprox_behaviour);
  report(9, "Training smoke", [&] {
    if (!smoke) return Verdict{false, "smoke run failed"};
    return training_smoke(smoke->report);
  });
  report(10, "Tamper evidence", [&] { return tamper_evidence(runs); });

  const double total = std::chrono::duration<double>(clock::now() - start).count();
  std::cout << (10 - failed) << "/10 criteria passed in " << fmt(total, 3) << "s" << std::endl;
  return failed == 0 ? 0 : 1;
}
