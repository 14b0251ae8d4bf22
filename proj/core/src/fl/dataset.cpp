#include "veryfl/fl/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "veryfl/errors.hpp"

namespace veryfl::fl {

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.n_features = n_features;
  out.n_classes = n_classes;
  out.features.reserve(indices.size() * n_features);
  out.labels.reserve(indices.size());
  for (auto i : indices) {
    const auto r = row(i);
    out.features.insert(out.features.end(), r.begin(), r.end());
    out.labels.push_back(labels[i]);
  }
  return out;
}

Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed) {
  if (spec.samples == 0 || spec.features == 0 || spec.classes < 2) {
    throw Error(ErrorCode::kInvalidArgument, "blobs need samples > 0, features > 0, classes >= 2");
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> centre_dist(0.0, spec.separation);
  std::normal_distribution<double> noise(0.0, 1.0);

  std::vector<double> centres(spec.classes * spec.features);
  for (auto& c : centres) c = centre_dist(rng);

  Dataset d;
  d.n_features = spec.features;
  d.n_classes = spec.classes;
  d.features.resize(spec.samples * spec.features);
  d.labels.resize(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    const auto label = i % spec.classes;
    d.labels[i] = static_cast<int>(label);
    for (std::size_t f = 0; f < spec.features; ++f) {
      d.features[i * spec.features + f] = centres[label * spec.features + f] + noise(rng);
    }
  }
  return d;
}

Dataset load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, path.string() + ": empty file");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 2) throw Error(ErrorCode::kParseError, path.string() + ": need at least one feature column");

  Dataset d;
  d.n_features = columns - 1;
  std::size_t line_no = 1;
  int max_label = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      const char* first = cell.data();
      const char* last = cell.data() + cell.size();
      while (first < last && *first == ' ') ++first;
      if (col + 1 < columns) {
        double v = 0;
        auto [p, ec] = std::from_chars(first, last, v);
        if (ec != std::errc{} || p != last) {
          throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
        }
        d.features.push_back(v);
      } else if (col + 1 == columns) {
        int label = 0;
        auto [p, ec] = std::from_chars(first, last, label);
        if (ec != std::errc{} || p != last || label < 0) {
          throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": bad label '" + cell + "'");
        }
        d.labels.push_back(label);
        max_label = std::max(max_label, label);
      }
      ++col;
    }
    if (col != columns) {
      throw Error(ErrorCode::kParseError, path.string() + ":" + std::to_string(line_no) + ": expected " +
                                              std::to_string(columns) + " columns");
    }
  }
  if (d.labels.empty()) throw Error(ErrorCode::kParseError, path.string() + ": no data rows");
  d.n_classes = static_cast<std::size_t>(std::max(max_label + 1, 2));
  return d;
}

Dataset load_dataset(const GlobalArgs& args, std::uint64_t seed) {
  if (args.dataset == "csv") return load_csv(args.data_path);

  BlobSpec spec;
  if (args.dataset == "blobs" || args.dataset == "synthetic") {
    // defaults
  } else if (args.dataset == "cifar10") {
    spec = {5000, 64, 10, 1.0};
  } else if (args.dataset == "cifar100") {
    spec = {10000, 64, 100, 1.5};
  } else if (args.dataset == "fashionmnist") {
    spec = {5000, 49, 10, 1.0};
  } else {
    throw Error(ErrorCode::kUnknownDataset, args.dataset);
  }
  if (args.samples) spec.samples = *args.samples;
  if (args.features) spec.features = *args.features;
  if (args.classes) spec.classes = *args.classes;
  if (args.separation) spec.separation = *args.separation;
  return make_blobs(spec, seed);
}

namespace {

DatasetPartition split_iid(std::size_t n_samples, std::size_t n_clients, std::mt19937_64& rng) {
  std::vector<std::size_t> order(n_samples);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  DatasetPartition p;
  const std::size_t base = n_samples / n_clients;
  const std::size_t extra = n_samples % n_clients;
  std::size_t pos = 0;
  for (std::size_t c = 0; c < n_clients; ++c) {
    const std::size_t len = base + (c < extra ? 1 : 0);
    std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(pos),
                                   order.begin() + static_cast<std::ptrdiff_t>(pos + len));
    std::sort(chunk.begin(), chunk.end());
    p.assignments.emplace(c, std::move(chunk));
    pos += len;
  }
  return p;
}

DatasetPartition split_dirichlet(std::span<const int> labels, std::size_t n_clients, double alpha,
                                 std::mt19937_64& rng) {
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

  std::vector<std::vector<std::size_t>> lists(n_clients);
  std::gamma_distribution<double> gamma(alpha, 1.0);
  for (const auto& [label, members] : by_class) {
    std::vector<double> p(n_clients);
    double total = 0.0;
    for (auto& v : p) {
      v = gamma(rng);
      total += v;
    }
    if (!(total > 0.0)) {
      // Every gamma draw underflowed (tiny alpha): put the class on one client.
      std::fill(p.begin(), p.end(), 0.0);
      p[std::uniform_int_distribution<std::size_t>(0, n_clients - 1)(rng)] = 1.0;
    }
    std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
    for (auto idx : members) lists[pick(rng)].push_back(idx);
  }

  // Repair: each empty client takes one sample from the current largest
  // client (lowest index on ties).
  for (std::size_t c = 0; c < n_clients; ++c) {
    if (!lists[c].empty()) continue;
    auto largest = std::max_element(lists.begin(), lists.end(),
                                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
    lists[c].push_back(largest->back());
    largest->pop_back();
  }

  DatasetPartition out;
  for (std::size_t c = 0; c < n_clients; ++c) {
    std::sort(lists[c].begin(), lists[c].end());
    out.assignments.emplace(c, std::move(lists[c]));
  }
  return out;
}

}  // namespace

DatasetPartition split_dataset(std::span<const int> labels, std::size_t n_clients, Strategy strategy,
                               std::uint64_t seed) {
  if (n_clients == 0) throw Error(ErrorCode::kInvalidArgument, "n_clients must be positive");
  if (labels.size() < n_clients) {
    throw Error(ErrorCode::kTooFewSamples, std::to_string(labels.size()) + " samples for " +
                                               std::to_string(n_clients) + " clients");
  }
  std::mt19937_64 rng(seed);
  if (strategy.kind == PartitionKind::kIid) return split_iid(labels.size(), n_clients, rng);
  if (!(strategy.alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "dirichlet alpha must be positive");
  return split_dirichlet(labels, n_clients, strategy.alpha, rng);
}

}  // namespace veryfl::fl
