#include "veryfl/fl/trainer.hpp"

#include <algorithm>
#include <cfenv>
#include <cmath>
#include <numeric>
#include <random>

#include "veryfl/errors.hpp"

namespace veryfl::fl {
namespace {

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace

Objective local_objective(const Architecture& arch, std::span<const double> params,
                          std::span<const double> global, const Dataset& data,
                          std::span<const std::size_t> rows, const TrainArgs& args, Algorithm algorithm,
                          const WatermarkContext* wm) {
  LossGrad ce = cross_entropy(arch, params, data, rows);
  Objective obj{ce.loss, std::move(ce.gradient)};

  if (args.weight_decay > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      sq += params[i] * params[i];
      obj.gradient[i] += args.weight_decay * params[i];
    }
    obj.loss += 0.5 * args.weight_decay * sq;
  }
  if (algorithm == Algorithm::kFedProx && args.mu > 0.0) {
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double diff = params[i] - global[i];
      sq += diff * diff;
      obj.gradient[i] += args.mu * diff;
    }
    obj.loss += 0.5 * args.mu * sq;
  }
  if (wm != nullptr && wm->lambda > 0.0) {
    const auto slice = wm->slice.view(params);
    const auto reg = watermark::regularizer(slice, wm->key, wm->target, wm->gamma);
    obj.loss += wm->lambda * reg.loss;
    for (std::size_t j = 0; j < reg.gradient.size(); ++j) {
      obj.gradient[wm->slice.offset + j] += wm->lambda * reg.gradient[j];
    }
  }
  return obj;
}

ModelUpdate local_train(const ModelParams& global, const Dataset& data, const TrainArgs& args,
                        Algorithm algorithm, std::uint64_t seed, const WatermarkContext* wm) {
  if (!global.valid()) throw Error(ErrorCode::kShapeMismatch, "global parameters invalid or non-finite");
  if (data.size() == 0) throw Error(ErrorCode::kInvalidArgument, "empty partition");
  if (args.batch_size == 0) throw Error(ErrorCode::kInvalidArgument, "batch_size must be positive");
  const Architecture arch = Architecture::of(global);

  std::vector<double> w = global.values;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);

  for (std::size_t epoch = 0; epoch < args.local_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += args.batch_size) {
      const std::size_t len = std::min(args.batch_size, order.size() - start);
      const std::span<const std::size_t> batch(order.data() + start, len);
      const Objective obj = local_objective(arch, w, global.values, data, batch, args, algorithm, wm);
      if (!std::isfinite(obj.loss) || !all_finite(obj.gradient)) {
        throw Error(ErrorCode::kNonFiniteLoss, "epoch " + std::to_string(epoch) + ", batch at " +
                                                   std::to_string(start) + ", loss " + std::to_string(obj.loss));
      }
      for (std::size_t i = 0; i < w.size(); ++i) w[i] -= args.learning_rate * obj.gradient[i];
      if (!all_finite(w)) {
        throw Error(ErrorCode::kNonFiniteLoss, "parameters diverged in epoch " + std::to_string(epoch));
      }
    }
  }

  ModelUpdate up;
  up.params = ModelParams{std::move(w), global.shapes};
  up.metrics = evaluate(up.params, data);
  up.dataset_size = data.size();
  return up;
}

ModelParams aggregate(std::span<const ModelUpdate> updates) {
  if (updates.empty()) throw Error(ErrorCode::kEmptyUpdateSet, "no updates to aggregate");
  const ModelParams& first = updates.front().params;
  double total = 0.0;
  for (const auto& u : updates) {
    if (!u.params.same_shape(first) || u.params.size() != first.size()) {
      throw Error(ErrorCode::kShapeMismatch, "update shapes differ");
    }
    if (u.dataset_size == 0) throw Error(ErrorCode::kInvalidArgument, "update with zero dataset size");
    total += static_cast<double>(u.dataset_size);
  }

  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto& ua = updates[a];
    const auto& ub = updates[b];
    if (ua.dataset_size != ub.dataset_size) return ua.dataset_size < ub.dataset_size;
    return std::lexicographical_compare(ua.params.values.begin(), ua.params.values.end(),
                                        ub.params.values.begin(), ub.params.values.end());
  });

  ModelParams out{std::vector<double>(first.size(), 0.0), first.shapes};
  for (auto idx : order) {
    const auto& u = updates[idx];
    const double weight = static_cast<double>(u.dataset_size) / total;
    for (std::size_t i = 0; i < out.values.size(); ++i) out.values[i] += weight * u.params.values[i];
  }
  return out;
}

EmbedResult embed_watermark(const ModelParams& params, const Dataset& data, const TrainArgs& args,
                            const WatermarkContext& wm, std::size_t max_steps) {
  const Architecture arch = Architecture::of(params);
  EmbedResult res{params, {}, 0.0, 0};
  for (;; ++res.steps) {
    res.extracted = watermark::extract(wm.slice.view(std::span<const double>(res.params.values)), wm.key);
    res.detection_rate = watermark::detection_rate(res.extracted, wm.target);
    if (res.detection_rate == 1.0) return res;
    if (res.steps == max_steps) break;
    // Plain SGD objective (no proximal term) on the full local dataset.
    const Objective obj = local_objective(arch, res.params.values, params.values, data, {}, args,
                                          Algorithm::kFedAvg, &wm);
    if (!std::isfinite(obj.loss)) throw Error(ErrorCode::kNonFiniteLoss, "watermark fine-tune diverged");
    for (std::size_t i = 0; i < res.params.values.size(); ++i) {
      res.params.values[i] -= args.learning_rate * obj.gradient[i];
    }
  }
  throw Error(ErrorCode::kWatermarkEmbeddingFailed,
              "detection rate " + std::to_string(res.detection_rate) + " after " + std::to_string(max_steps) +
                  " steps");
}

std::uint64_t to_micro(double value) {
  if (!std::isfinite(value) || value < 0.0) {
    throw Error(ErrorCode::kInvalidMetric, "metric " + std::to_string(value) + " not representable on chain");
  }
  // nearbyint honours the current rounding mode; FE_TONEAREST is ties-to-even.
  const int saved = std::fegetround();
  std::fesetround(FE_TONEAREST);
  const double scaled = std::nearbyint(value * 1e6);
  std::fesetround(saved);
  return static_cast<std::uint64_t>(scaled);
}

}  // namespace veryfl::fl
