#pragma once

// Task driver: wires datasets, local trainers and the aggregator to the chain
// bridge and runs a complete federated experiment.

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <vector>

#include "veryfl/chainproxy.hpp"
#include "veryfl/fl/config.hpp"
#include "veryfl/fl/model.hpp"

namespace veryfl {

struct RoundSummary {
  std::uint64_t round = 0;
  Address aggregator;  // elected client the aggregation is attributed to
  std::string aggregator_client;
  double mean_accuracy = 0.0;  // over client-reported metrics
  double mean_loss = 0.0;
  double global_accuracy = 0.0;  // aggregated model on the pooled dataset
  double global_loss = 0.0;
  std::uint64_t rewards_paid = 0;
  Digest block_hash{};
};

struct TaskReport {
  std::string algorithm;
  std::size_t clients = 0;
  std::vector<RoundSummary> rounds;

  bool watermarked = false;
  std::string model_id;
  std::string owner;
  std::optional<std::uint64_t> token_id;
  std::uint64_t key_seed = 0;
  double detection_rate = 0.0;
  std::size_t embed_steps = 0;
  double final_accuracy = 0.0;  // after watermark fine-tune

  Digest state_root{};
  std::uint64_t block_height = 0;

  fl::ModelParams final_model;
  watermark::ParamSlice slice;
};

// "client_01", "client_02", ... zero-padded so lexical order matches index order.
std::vector<std::string> make_client_ids(std::size_t n);

// Deterministic sub-seed for (base, tags...).
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

// Account count and watermark length the bridge needs for this config.
chainproxy::ContractConfig contract_config_for(const fl::TaskConfig& config);

// Runs the whole task against an open session: binds clients, trains
// communication_rounds rounds (one block each), then embeds the watermark and
// mints the model token when enabled.
TaskReport run_task(const fl::TaskConfig& config, chainproxy::BridgeSession& bridge);

// Structured report without the model parameters.
std::string to_json(const TaskReport& report);

}  // namespace veryfl
