#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "veryfl/fl/dataset.hpp"
#include "veryfl/watermark.hpp"

namespace veryfl::fl {

struct LayerShape {
  std::string name;
  std::vector<std::size_t> dims;

  std::size_t count() const;
  bool operator==(const LayerShape&) const = default;
};

// Flat parameter vector plus the ordered layer table describing it.
struct ModelParams {
  std::vector<double> values;
  std::vector<LayerShape> shapes;

  std::size_t size() const { return values.size(); }
  // Sum of layer sizes equals values.size() and every value is finite.
  bool valid() const;
  bool same_shape(const ModelParams& other) const { return shapes == other.shapes; }
  bool operator==(const ModelParams&) const = default;
};

// Dense classifier: either softmax regression (hidden == 0) or one ReLU
// hidden layer. Layout: [fc.weight (C x F), fc.bias] or
// [fc1.weight (H x F), fc1.bias, fc2.weight (C x H), fc2.bias].
struct Architecture {
  std::size_t features = 0;
  std::size_t hidden = 0;
  std::size_t classes = 0;

  bool has_hidden() const { return hidden > 0; }
  std::size_t parameter_count() const;
  std::vector<LayerShape> shapes() const;
  // Weight block of the last linear layer.
  watermark::ParamSlice final_layer_weights() const;

  // Throws ShapeMismatch if the layer table is not one of the two layouts.
  static Architecture of(const ModelParams& params);
};

// Throws UnknownModel for names other than linear / mlp_1hidden.
Architecture make_architecture(const std::string& model_name, std::size_t features, std::size_t classes,
                               std::size_t hidden_units);

// Uniform in [-0.1, 0.1], deterministic per (architecture, seed).
ModelParams init_model(const Architecture& arch, std::uint64_t seed);
ModelParams init_model(const std::string& model_name, std::size_t features, std::size_t classes,
                       std::uint64_t seed, std::size_t hidden_units = 256);

// Logits for one sample.
std::vector<double> forward(const Architecture& arch, std::span<const double> params, std::span<const double> x);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> gradient;
};

// Mean cross-entropy over `rows` (all rows when empty) and its gradient.
LossGrad cross_entropy(const Architecture& arch, std::span<const double> params, const Dataset& data,
                       std::span<const std::size_t> rows);

struct Metrics {
  double accuracy = 0.0;
  double loss = 0.0;
};

// Argmax accuracy and mean cross-entropy. Throws ShapeMismatch.
Metrics evaluate(const ModelParams& params, const Dataset& data);

// Binary model file: "VFLMODEL" magic, u32 version, layer table, watermark
// slice, then little-endian binary64 values.
void save_model(const std::filesystem::path& path, const ModelParams& params, const watermark::ParamSlice& slice);

struct ModelFile {
  ModelParams params;
  watermark::ParamSlice slice;
};

// Throws Error(kParseError).
ModelFile load_model(const std::filesystem::path& path);

}  // namespace veryfl::fl
