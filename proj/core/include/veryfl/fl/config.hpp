#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

namespace veryfl::fl {

enum class Algorithm { kFedAvg, kFedProx };

std::string_view to_string(Algorithm a);

enum class PartitionKind { kIid, kDirichlet };

// Overall task shape: model, data, clients, rounds.
struct GlobalArgs {
  std::string model;    // linear | mlp_1hidden
  std::string dataset;  // blobs | csv | cifar10 | cifar100 | fashionmnist
  std::size_t client_number = 0;
  std::size_t communication_rounds = 0;
  std::uint64_t seed = 0;

  std::size_t hidden_units = 256;
  std::optional<std::size_t> samples;
  std::optional<std::size_t> features;
  std::optional<std::size_t> classes;
  std::optional<double> separation;
  std::string data_path;  // csv only
  PartitionKind partition = PartitionKind::kIid;
  double dirichlet_alpha = 0.5;
  std::uint64_t incentive_budget = 1000;
  std::string model_id = "veryfl-model";
  std::string owner;  // client id receiving the model token; first client when empty
  std::size_t workers = 1;
};

struct WatermarkArgs {
  bool enabled = true;
  std::size_t k = 32;
  double gamma = 0.1;
  double lambda = 0.5;
  std::size_t max_steps = 1000;
  // Defaults to the weight block of the final linear layer.
  std::optional<std::size_t> offset;
  std::optional<std::size_t> length;
};

// Local optimisation settings.
struct TrainArgs {
  double learning_rate = 0.0;
  std::string optimizer = "sgd";
  double weight_decay = 0.0;
  std::size_t local_epochs = 1;
  std::size_t batch_size = 32;
  double mu = 0.0;
  WatermarkArgs watermark;
};

struct TaskConfig {
  GlobalArgs global_args;
  TrainArgs train_args;
  Algorithm algorithm = Algorithm::kFedAvg;
};

// Parses and validates a JSON config document. Throws Error(kConfigError)
// whose message names the offending field (or line, for syntax errors).
TaskConfig parse_config(std::string_view text);
TaskConfig load_config(const std::filesystem::path& path);

// The stock benchmark: 10 clients, 5 rounds, 2-class blobs, fedavg.
TaskConfig default_benchmark();
std::string to_json(const TaskConfig& config);

}  // namespace veryfl::fl
