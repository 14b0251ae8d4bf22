#include "veryfl/task.hpp"

#include <algorithm>
#include <array>
#include <future>
#include <random>

#include <json.hpp>

#include "veryfl/errors.hpp"
#include "veryfl/fl/dataset.hpp"
#include "veryfl/fl/trainer.hpp"

namespace veryfl {
namespace {

enum SeedTag : std::uint64_t { kDataSeed = 1, kSplitSeed = 2, kModelSeed = 3, kTrainSeed = 4 };

watermark::ParamSlice watermark_slice(const fl::TaskConfig& config, const fl::Architecture& arch) {
  auto slice = arch.final_layer_weights();
  const auto& wa = config.train_args.watermark;
  if (wa.offset) slice.offset = *wa.offset;
  if (wa.length) slice.length = *wa.length;
  return slice;
}

std::vector<fl::ModelUpdate> train_clients(const fl::TaskConfig& config, const fl::ModelParams& global,
                                           const std::vector<fl::Dataset>& shards, std::uint64_t round) {
  const std::size_t n = shards.size();
  std::vector<fl::ModelUpdate> updates(n);
  auto train_one = [&](std::size_t i) {
    return fl::local_train(global, shards[i], config.train_args, config.algorithm,
                           derive_seed(config.global_args.seed, {kTrainSeed, round, i}));
  };
  const std::size_t workers = std::min(config.global_args.workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) updates[i] = train_one(i);
    return updates;
  }
  for (std::size_t start = 0; start < n; start += workers) {
    std::vector<std::future<fl::ModelUpdate>> pending;
    for (std::size_t i = start; i < std::min(start + workers, n); ++i) {
      pending.push_back(std::async(std::launch::async, train_one, i));
    }
    for (std::size_t j = 0; j < pending.size(); ++j) updates[start + j] = pending[j].get();
  }
  return updates;
}

}  // namespace

std::vector<std::string> make_client_ids(std::size_t n) {
  const std::size_t width = std::max<std::size_t>(2, std::to_string(n).size());
  std::vector<std::string> ids;
  ids.reserve(n);
  for (std::size_t i = 1; i <= n; ++i) {
    std::string num = std::to_string(i);
    ids.push_back("client_" + std::string(width - num.size(), '0') + num);
  }
  return ids;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::vector<std::uint32_t> words{static_cast<std::uint32_t>(base), static_cast<std::uint32_t>(base >> 32)};
  for (auto t : tags) {
    words.push_back(static_cast<std::uint32_t>(t));
    words.push_back(static_cast<std::uint32_t>(t >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

chainproxy::ContractConfig contract_config_for(const fl::TaskConfig& config) {
  chainproxy::ContractConfig cc;
  cc.watermark_bits = config.train_args.watermark.k;
  cc.account_count = std::max(ledger::Ledger::kDefaultAccounts, config.global_args.client_number + 1);
  return cc;
}

TaskReport run_task(const fl::TaskConfig& config, chainproxy::BridgeSession& bridge) {
  const auto& g = config.global_args;
  const auto& t = config.train_args;

  const fl::Dataset data = fl::load_dataset(g, derive_seed(g.seed, {kDataSeed}));
  const fl::Strategy strategy =
      g.partition == fl::PartitionKind::kIid ? fl::Strategy::iid() : fl::Strategy::dirichlet(g.dirichlet_alpha);
  const auto partition = fl::split_dataset(data.labels, g.client_number, strategy, derive_seed(g.seed, {kSplitSeed}));
  std::vector<fl::Dataset> shards;
  shards.reserve(g.client_number);
  for (std::size_t c = 0; c < g.client_number; ++c) shards.push_back(data.subset(partition.of(c)));

  const auto arch = fl::make_architecture(g.model, data.n_features, data.n_classes, g.hidden_units);
  fl::ModelParams global = fl::init_model(arch, derive_seed(g.seed, {kModelSeed}));
  const auto slice = watermark_slice(config, arch);
  if (t.watermark.enabled) {
    slice.view(std::span<const double>(global.values));
    if (t.watermark.k > slice.length) {
      throw Error(ErrorCode::kBadDimensions, "watermark k=" + std::to_string(t.watermark.k) +
                                                 " exceeds slice length " + std::to_string(slice.length));
    }
  }

  const auto ids = make_client_ids(g.client_number);
  if (bridge.bindings().empty()) bridge.bind_clients(ids);
  for (const auto& id : ids) bridge.address_of(id);

  TaskReport report;
  report.algorithm = std::string(fl::to_string(config.algorithm));
  report.clients = g.client_number;
  report.slice = slice;

  const std::uint64_t first_round = bridge.current_round() + 1;
  for (std::uint64_t r = first_round; r < first_round + g.communication_rounds; ++r) {
    const auto election = bridge.contracts().election(r);
    if (!election) throw Error(ErrorCode::kNotFound, "no aggregator elected for round " + std::to_string(r));

    const auto updates = train_clients(config, global, shards, r);

    std::vector<chainproxy::ClientRoundMetrics> metrics;
    RoundSummary summary;
    summary.round = r;
    summary.aggregator = election->aggregator;
    summary.aggregator_client = bridge.client_of(election->aggregator);
    for (std::size_t i = 0; i < updates.size(); ++i) {
      const auto& m = updates[i].metrics;
      metrics.push_back({ids[i], fl::to_micro(m.accuracy), fl::to_micro(m.loss), updates[i].dataset_size});
      summary.mean_accuracy += m.accuracy;
      summary.mean_loss += m.loss;
    }
    summary.mean_accuracy /= static_cast<double>(updates.size());
    summary.mean_loss /= static_cast<double>(updates.size());

    const auto outcome = bridge.submit_round(r, metrics, g.incentive_budget);
    for (const auto& [addr, reward] : outcome.rewards) summary.rewards_paid += reward;
    summary.block_hash = outcome.block_hash;

    // Aggregation performed on behalf of the elected client.
    global = fl::aggregate(updates);
    const auto gm = fl::evaluate(global, data);
    summary.global_accuracy = gm.accuracy;
    summary.global_loss = gm.loss;
    report.rounds.push_back(summary);
  }

  report.final_accuracy = report.rounds.empty() ? fl::evaluate(global, data).accuracy
                                                : report.rounds.back().global_accuracy;
  if (t.watermark.enabled) {
    report.watermarked = true;
    report.model_id = g.model_id;
    report.owner = g.owner.empty() ? ids.front() : g.owner;
    const auto owner_it = std::find(ids.begin(), ids.end(), report.owner);
    if (owner_it == ids.end()) throw Error(ErrorCode::kUnboundClient, "owner " + report.owner);
    const fl::Dataset& owner_data = shards[static_cast<std::size_t>(owner_it - ids.begin())];

    fl::EmbedResult embedded;
    auto embed = [&](const contracts::WatermarkSpec& spec) {
      fl::WatermarkContext ctx{watermark::WatermarkKey::derive(spec.key_seed, spec.bits.size(), slice.length),
                               watermark::WatermarkBits{spec.bits}, slice, t.watermark.gamma, t.watermark.lambda};
      embedded = fl::embed_watermark(global, owner_data, t, ctx, t.watermark.max_steps);
      return embedded.extracted;
    };
    const auto fin = bridge.finalize_model(g.model_id, report.owner, embed);
    global = embedded.params;
    report.token_id = fin.token.token_id;
    report.key_seed = fin.spec.key_seed;
    report.detection_rate = watermark::detection_rate(fin.extracted, watermark::WatermarkBits{fin.spec.bits});
    report.embed_steps = embedded.steps;
    report.final_accuracy = fl::evaluate(global, data).accuracy;
  }

  report.final_model = global;
  report.state_root = bridge.ledger().tip().state_root;
  report.block_height = bridge.ledger().height();
  return report;
}

std::string to_json(const TaskReport& r) {
  nlohmann::ordered_json rounds = nlohmann::ordered_json::array();
  for (const auto& s : r.rounds) {
    rounds.push_back({{"round", s.round},
                      {"aggregator", to_hex(s.aggregator)},
                      {"aggregator_client", s.aggregator_client},
                      {"mean_accuracy", s.mean_accuracy},
                      {"mean_loss", s.mean_loss},
                      {"global_accuracy", s.global_accuracy},
                      {"global_loss", s.global_loss},
                      {"rewards_paid", s.rewards_paid},
                      {"block_hash", to_hex(s.block_hash)}});
  }
  nlohmann::ordered_json fin;
  fin["watermarked"] = r.watermarked;
  if (r.watermarked) {
    fin["model_id"] = r.model_id;
    fin["owner"] = r.owner;
    fin["token_id"] = r.token_id.value_or(0);
    fin["key_seed"] = r.key_seed;
    fin["detection_rate"] = r.detection_rate;
    fin["embed_steps"] = r.embed_steps;
  }
  fin["final_accuracy"] = r.final_accuracy;
  fin["state_root"] = to_hex(r.state_root);
  fin["block_height"] = r.block_height;

  nlohmann::ordered_json doc;
  doc["algorithm"] = r.algorithm;
  doc["clients"] = r.clients;
  doc["rounds"] = rounds;
  doc["final"] = fin;
  return doc.dump(2) + "\n";
}

}  // namespace veryfl
