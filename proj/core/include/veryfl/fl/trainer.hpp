#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "veryfl/fl/config.hpp"
#include "veryfl/fl/dataset.hpp"
#include "veryfl/fl/model.hpp"
#include "veryfl/watermark.hpp"

namespace veryfl::fl {

struct ModelUpdate {
  ModelParams params;
  Metrics metrics;
  std::size_t dataset_size = 0;
};

// Watermark embedding term added to the local objective.
struct WatermarkContext {
  watermark::WatermarkKey key;
  watermark::WatermarkBits target;
  watermark::ParamSlice slice;
  double gamma = watermark::kDefaultGamma;
  double lambda = watermark::kDefaultLambda;
};

struct Objective {
  double loss = 0.0;
  std::vector<double> gradient;
};

// cross-entropy(rows) + weight_decay/2 |w|^2 + [fedprox] mu/2 |w - w_global|^2
// + [watermark] lambda * hinge(slice).
Objective local_objective(const Architecture& arch, std::span<const double> params,
                          std::span<const double> global, const Dataset& data,
                          std::span<const std::size_t> rows, const TrainArgs& args, Algorithm algorithm,
                          const WatermarkContext* wm);

// local_epochs of mini-batch SGD over `data` with batches drawn in a shuffled
// order seeded by `seed`; metrics are measured on `data` after training.
// Throws NonFiniteLoss if the objective or parameters stop being finite.
ModelUpdate local_train(const ModelParams& global, const Dataset& data, const TrainArgs& args,
                        Algorithm algorithm, std::uint64_t seed, const WatermarkContext* wm = nullptr);

// Dataset-size weighted mean of the update parameters. The summation order
// is canonicalised, so the result does not depend on the order of `updates`.
// Throws EmptyUpdateSet / ShapeMismatch.
ModelParams aggregate(std::span<const ModelUpdate> updates);

struct EmbedResult {
  ModelParams params;
  watermark::WatermarkBits extracted;
  double detection_rate = 0.0;
  std::size_t steps = 0;
};

// Full-batch fine-tune on `data` with the watermark term until every bit is
// recovered. Throws WatermarkEmbeddingFailed after `max_steps`.
EmbedResult embed_watermark(const ModelParams& params, const Dataset& data, const TrainArgs& args,
                            const WatermarkContext& wm, std::size_t max_steps);

// value * 1e6 rounded half-to-even. Throws InvalidMetric on non-finite or
// negative input.
std::uint64_t to_micro(double value);

}  // namespace veryfl::fl
