#include "veryfl/fl/config.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "veryfl/errors.hpp"

namespace veryfl::fl {
namespace {

using nlohmann::json;

[[noreturn]] void config_error(const std::string& field, const std::string& what) {
  throw Error(ErrorCode::kConfigError, field + ": " + what);
}

const json& section(const json& doc, const char* name) {
  if (!doc.contains(name)) config_error(name, "missing required section");
  const json& s = doc.at(name);
  if (!s.is_object()) config_error(name, "must be an object");
  return s;
}

std::string path(const std::string& prefix, const char* key) { return prefix + "." + key; }

template <typename T>
T read(const json& obj, const std::string& prefix, const char* key) {
  const std::string field = path(prefix, key);
  if (!obj.contains(key)) config_error(field, "missing required field");
  const json& v = obj.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) config_error(field, "expected a string");
    return v.get<std::string>();
  } else if constexpr (std::is_same_v<T, bool>) {
    if (!v.is_boolean()) config_error(field, "expected true/false");
    return v.get<bool>();
  } else if constexpr (std::is_floating_point_v<T>) {
    if (!v.is_number()) config_error(field, "expected a number");
    return v.get<T>();
  } else {
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0)) {
      config_error(field, "expected a non-negative integer");
    }
    return static_cast<T>(v.get<std::uint64_t>());
  }
}

template <typename T>
void read_opt(const json& obj, const std::string& prefix, const char* key, T& out) {
  if (obj.contains(key)) out = read<T>(obj, prefix, key);
}

template <typename T>
void read_opt(const json& obj, const std::string& prefix, const char* key, std::optional<T>& out) {
  if (obj.contains(key)) out = read<T>(obj, prefix, key);
}

void check_known(const json& obj, const std::string& prefix, std::initializer_list<const char*> keys) {
  for (const auto& [k, v] : obj.items()) {
    bool known = false;
    for (const char* key : keys) known = known || k == key;
    if (!known) config_error(prefix + "." + k, "unknown field");
  }
}

void validate(const TaskConfig& c) {
  const auto& g = c.global_args;
  const auto& t = c.train_args;
  if (g.model != "linear" && g.model != "mlp_1hidden") config_error("global_args.model", "unknown model '" + g.model + "'");
  if (g.client_number == 0) config_error("global_args.client_number", "must be positive");
  if (g.communication_rounds == 0) config_error("global_args.communication_rounds", "must be positive");
  if (g.hidden_units == 0) config_error("global_args.hidden_units", "must be positive");
  if (g.dataset == "csv" && g.data_path.empty()) config_error("global_args.data_path", "required for csv datasets");
  if (!(g.dirichlet_alpha > 0.0)) config_error("global_args.dirichlet_alpha", "must be positive");
  if (g.incentive_budget == 0) config_error("global_args.incentive_budget", "must be positive");
  if (g.model_id.empty()) config_error("global_args.model_id", "must be non-empty");
  if (g.workers == 0) config_error("global_args.workers", "must be positive");
  if (!(t.learning_rate > 0.0)) config_error("train_args.learning_rate", "must be positive");
  if (t.optimizer != "sgd") config_error("train_args.optimizer", "only 'sgd' is supported");
  if (t.weight_decay < 0.0) config_error("train_args.weight_decay", "must be non-negative");
  if (t.local_epochs == 0) config_error("train_args.local_epochs", "must be positive");
  if (t.batch_size == 0) config_error("train_args.batch_size", "must be positive");
  if (t.mu < 0.0) config_error("train_args.mu", "must be non-negative");
  if (t.watermark.enabled) {
    if (t.watermark.k == 0) config_error("train_args.watermark.k", "must be positive");
    if (!(t.watermark.gamma > 0.0)) config_error("train_args.watermark.gamma", "must be positive");
    if (t.watermark.lambda < 0.0) config_error("train_args.watermark.lambda", "must be non-negative");
  }
}

}  // namespace

std::string_view to_string(Algorithm a) { return a == Algorithm::kFedAvg ? "fedavg" : "fedprox"; }

TaskConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    for (std::size_t i = 0; i < e.byte && i < text.size(); ++i) line += text[i] == '\n';
    throw Error(ErrorCode::kConfigError, "line " + std::to_string(line) + ": " + e.what());
  }
  if (!doc.is_object()) config_error("<root>", "expected a JSON object");
  check_known(doc, "<root>", {"global_args", "train_args", "algorithm"});

  TaskConfig c;
  const json& g = section(doc, "global_args");
  const json& t = section(doc, "train_args");
  const std::string G = "global_args";
  const std::string T = "train_args";

  check_known(g, G, {"model", "dataset", "client_number", "communication_rounds", "seed", "hidden_units",
                     "samples", "features", "classes", "separation", "data_path", "partition",
                     "dirichlet_alpha", "incentive_budget", "model_id", "owner", "workers"});
  auto& ga = c.global_args;
  ga.model = read<std::string>(g, G, "model");
  ga.dataset = read<std::string>(g, G, "dataset");
  ga.client_number = read<std::size_t>(g, G, "client_number");
  ga.communication_rounds = read<std::size_t>(g, G, "communication_rounds");
  ga.seed = read<std::uint64_t>(g, G, "seed");
  read_opt(g, G, "hidden_units", ga.hidden_units);
  read_opt(g, G, "samples", ga.samples);
  read_opt(g, G, "features", ga.features);
  read_opt(g, G, "classes", ga.classes);
  read_opt(g, G, "separation", ga.separation);
  read_opt(g, G, "data_path", ga.data_path);
  if (g.contains("partition")) {
    const auto p = read<std::string>(g, G, "partition");
    if (p == "iid") {
      ga.partition = PartitionKind::kIid;
    } else if (p == "dirichlet") {
      ga.partition = PartitionKind::kDirichlet;
    } else {
      config_error("global_args.partition", "expected 'iid' or 'dirichlet'");
    }
  }
  read_opt(g, G, "dirichlet_alpha", ga.dirichlet_alpha);
  read_opt(g, G, "incentive_budget", ga.incentive_budget);
  read_opt(g, G, "model_id", ga.model_id);
  read_opt(g, G, "owner", ga.owner);
  read_opt(g, G, "workers", ga.workers);

  check_known(t, T, {"learning_rate", "optimizer", "weight_decay", "local_epochs", "batch_size", "mu", "watermark"});
  auto& ta = c.train_args;
  ta.learning_rate = read<double>(t, T, "learning_rate");
  read_opt(t, T, "optimizer", ta.optimizer);
  read_opt(t, T, "weight_decay", ta.weight_decay);
  read_opt(t, T, "local_epochs", ta.local_epochs);
  read_opt(t, T, "batch_size", ta.batch_size);
  read_opt(t, T, "mu", ta.mu);
  if (t.contains("watermark")) {
    const std::string W = "train_args.watermark";
    const json& w = t.at("watermark");
    if (!w.is_object()) config_error(W, "must be an object");
    check_known(w, W, {"enabled", "k", "gamma", "lambda", "max_steps", "offset", "length"});
    auto& wa = ta.watermark;
    read_opt(w, W, "enabled", wa.enabled);
    read_opt(w, W, "k", wa.k);
    read_opt(w, W, "gamma", wa.gamma);
    read_opt(w, W, "lambda", wa.lambda);
    read_opt(w, W, "max_steps", wa.max_steps);
    read_opt(w, W, "offset", wa.offset);
    read_opt(w, W, "length", wa.length);
  }

  if (!doc.contains("algorithm")) config_error("algorithm", "missing required field");
  if (!doc.at("algorithm").is_string()) config_error("algorithm", "expected a string");
  const auto algo = doc.at("algorithm").get<std::string>();
  if (algo == "fedavg") {
    c.algorithm = Algorithm::kFedAvg;
  } else if (algo == "fedprox") {
    c.algorithm = Algorithm::kFedProx;
  } else {
    config_error("algorithm", "expected 'fedavg' or 'fedprox'");
  }
  validate(c);
  return c;
}

TaskConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(ErrorCode::kConfigError, file.string() + ": cannot open config file");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

TaskConfig default_benchmark() {
  TaskConfig c;
  c.global_args.model = "mlp_1hidden";
  c.global_args.dataset = "blobs";
  c.global_args.client_number = 10;
  c.global_args.communication_rounds = 5;
  c.global_args.seed = 42;
  c.train_args.learning_rate = 0.05;
  c.train_args.batch_size = 32;
  c.train_args.local_epochs = 1;
  c.algorithm = Algorithm::kFedAvg;
  return c;
}

std::string to_json(const TaskConfig& c) {
  nlohmann::ordered_json g;
  const auto& ga = c.global_args;
  g["model"] = ga.model;
  g["dataset"] = ga.dataset;
  g["client_number"] = ga.client_number;
  g["communication_rounds"] = ga.communication_rounds;
  g["seed"] = ga.seed;
  g["hidden_units"] = ga.hidden_units;
  if (ga.samples) g["samples"] = *ga.samples;
  if (ga.features) g["features"] = *ga.features;
  if (ga.classes) g["classes"] = *ga.classes;
  if (ga.separation) g["separation"] = *ga.separation;
  if (!ga.data_path.empty()) g["data_path"] = ga.data_path;
  g["partition"] = ga.partition == PartitionKind::kIid ? "iid" : "dirichlet";
  g["dirichlet_alpha"] = ga.dirichlet_alpha;
  g["incentive_budget"] = ga.incentive_budget;
  g["model_id"] = ga.model_id;
  if (!ga.owner.empty()) g["owner"] = ga.owner;
  g["workers"] = ga.workers;

  const auto& ta = c.train_args;
  nlohmann::ordered_json w;
  w["enabled"] = ta.watermark.enabled;
  w["k"] = ta.watermark.k;
  w["gamma"] = ta.watermark.gamma;
  w["lambda"] = ta.watermark.lambda;
  w["max_steps"] = ta.watermark.max_steps;
  if (ta.watermark.offset) w["offset"] = *ta.watermark.offset;
  if (ta.watermark.length) w["length"] = *ta.watermark.length;
  nlohmann::ordered_json t;
  t["learning_rate"] = ta.learning_rate;
  t["optimizer"] = ta.optimizer;
  t["weight_decay"] = ta.weight_decay;
  t["local_epochs"] = ta.local_epochs;
  t["batch_size"] = ta.batch_size;
  t["mu"] = ta.mu;
  t["watermark"] = w;

  nlohmann::ordered_json doc;
  doc["global_args"] = g;
  doc["train_args"] = t;
  doc["algorithm"] = std::string(to_string(c.algorithm));
  return doc.dump(2) + "\n";
}

}  // namespace veryfl::fl
