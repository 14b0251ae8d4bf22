#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <vector>

#include "veryfl/fl/config.hpp"

namespace veryfl::fl {

// Dense classification data, features stored row-major.
struct Dataset {
  std::size_t n_features = 0;
  std::size_t n_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const { return {features.data() + i * n_features, n_features}; }
  Dataset subset(std::span<const std::size_t> indices) const;
};

struct BlobSpec {
  std::size_t samples = 2000;
  std::size_t features = 20;
  std::size_t classes = 2;
  double separation = 1.0;
};

// Gaussian blobs: class centres ~ N(0, separation^2) per feature, samples are
// centre + N(0, 1). Labels cycle through the classes so they are balanced.
Dataset make_blobs(const BlobSpec& spec, std::uint64_t seed);

// Header row, numeric feature columns, last column an integer label >= 0.
// Throws Error(kParseError) naming the offending line.
Dataset load_csv(const std::filesystem::path& path);

// Resolves the dataset named in the config. Benchmark image-dataset names map
// to synthetic stand-ins of matching class count.
Dataset load_dataset(const GlobalArgs& args, std::uint64_t seed);

struct Strategy {
  PartitionKind kind = PartitionKind::kIid;
  double alpha = 0.5;  // Dirichlet concentration

  static Strategy iid() { return {PartitionKind::kIid, 0.0}; }
  static Strategy dirichlet(double alpha) { return {PartitionKind::kDirichlet, alpha}; }
};

// client index -> ascending sample indices; disjoint, covering, non-empty.
struct DatasetPartition {
  std::map<std::size_t, std::vector<std::size_t>> assignments;

  std::size_t clients() const { return assignments.size(); }
  const std::vector<std::size_t>& of(std::size_t client) const { return assignments.at(client); }
};

// IID: seeded shuffle, then contiguous chunks whose sizes differ by at most 1.
// Dirichlet: per class draw p ~ Dir(alpha * 1_n) and assign each sample of
// that class to a client drawn from p; empty clients then take one sample
// from the largest client until none is empty.
// Throws TooFewSamples when there are fewer samples than clients.
DatasetPartition split_dataset(std::span<const int> labels, std::size_t n_clients, Strategy strategy,
                               std::uint64_t seed);

}  // namespace veryfl::fl
