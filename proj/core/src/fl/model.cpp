#include "veryfl/fl/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>

#include "veryfl/errors.hpp"

namespace veryfl::fl {

std::size_t LayerShape::count() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

bool ModelParams::valid() const {
  std::size_t total = 0;
  for (const auto& s : shapes) total += s.count();
  return total == values.size() &&
         std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); });
}

std::size_t Architecture::parameter_count() const {
  if (has_hidden()) return hidden * features + hidden + classes * hidden + classes;
  return classes * features + classes;
}

std::vector<LayerShape> Architecture::shapes() const {
  if (has_hidden()) {
    return {{"fc1.weight", {hidden, features}},
            {"fc1.bias", {hidden}},
            {"fc2.weight", {classes, hidden}},
            {"fc2.bias", {classes}}};
  }
  return {{"fc.weight", {classes, features}}, {"fc.bias", {classes}}};
}

watermark::ParamSlice Architecture::final_layer_weights() const {
  if (has_hidden()) return {hidden * features + hidden, classes * hidden};
  return {0, classes * features};
}

Architecture Architecture::of(const ModelParams& params) {
  const auto& s = params.shapes;
  Architecture a;
  if (s.size() == 2 && s[0].dims.size() == 2 && s[1].dims.size() == 1) {
    a = {s[0].dims[1], 0, s[0].dims[0]};
  } else if (s.size() == 4 && s[0].dims.size() == 2 && s[2].dims.size() == 2) {
    a = {s[0].dims[1], s[0].dims[0], s[2].dims[0]};
  } else {
    throw Error(ErrorCode::kShapeMismatch, "unrecognised layer table");
  }
  if (a.shapes() != s) throw Error(ErrorCode::kShapeMismatch, "inconsistent layer table");
  if (params.values.size() != a.parameter_count()) {
    throw Error(ErrorCode::kShapeMismatch, "parameter count does not match layer table");
  }
  return a;
}

Architecture make_architecture(const std::string& model_name, std::size_t features, std::size_t classes,
                               std::size_t hidden_units) {
  if (features == 0 || classes == 0) throw Error(ErrorCode::kShapeMismatch, "empty feature/class dimension");
  if (model_name == "linear") return {features, 0, classes};
  if (model_name == "mlp_1hidden") {
    if (hidden_units == 0) throw Error(ErrorCode::kInvalidArgument, "hidden_units must be positive");
    return {features, hidden_units, classes};
  }
  throw Error(ErrorCode::kUnknownModel, model_name);
}

ModelParams init_model(const Architecture& arch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-0.1, 0.1);
  ModelParams p;
  p.shapes = arch.shapes();
  p.values.resize(arch.parameter_count());
  for (auto& v : p.values) v = dist(rng);
  return p;
}

ModelParams init_model(const std::string& model_name, std::size_t features, std::size_t classes,
                       std::uint64_t seed, std::size_t hidden_units) {
  return init_model(make_architecture(model_name, features, classes, hidden_units), seed);
}

namespace {

// out = W x + b for a row-major (rows x cols) W.
void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
            std::size_t rows, std::size_t cols, std::span<double> out) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* wr = w.data() + r * cols;
    double acc = b[r];
    for (std::size_t c = 0; c < cols; ++c) acc += wr[c] * x[c];
    out[r] = acc;
  }
}

// Returns log-sum-exp(z) - z[y] and writes softmax(z) - onehot(y) into dz.
double softmax_xent(std::span<const double> z, int y, std::span<double> dz) {
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    dz[i] = std::exp(z[i] - m);
    sum += dz[i];
  }
  for (auto& v : dz) v /= sum;
  dz[static_cast<std::size_t>(y)] -= 1.0;
  return m + std::log(sum) - z[static_cast<std::size_t>(y)];
}

struct Views {
  std::span<const double> w1, b1, w2, b2;
};

Views split(const Architecture& a, std::span<const double> p) {
  if (a.has_hidden()) {
    const std::size_t n1 = a.hidden * a.features;
    const std::size_t n2 = a.classes * a.hidden;
    return {p.subspan(0, n1), p.subspan(n1, a.hidden), p.subspan(n1 + a.hidden, n2),
            p.subspan(n1 + a.hidden + n2, a.classes)};
  }
  const std::size_t n = a.classes * a.features;
  return {{}, {}, p.subspan(0, n), p.subspan(n, a.classes)};
}

void check_data(const Architecture& a, std::span<const double> params, const Dataset& data) {
  if (params.size() != a.parameter_count()) throw Error(ErrorCode::kShapeMismatch, "parameter count");
  if (data.n_features != a.features) {
    throw Error(ErrorCode::kShapeMismatch, "model expects " + std::to_string(a.features) + " features, data has " +
                                               std::to_string(data.n_features));
  }
  for (int y : data.labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= a.classes) {
      throw Error(ErrorCode::kShapeMismatch, "label " + std::to_string(y) + " outside model classes");
    }
  }
}

}  // namespace

std::vector<double> forward(const Architecture& arch, std::span<const double> params, std::span<const double> x) {
  const Views v = split(arch, params);
  std::vector<double> z(arch.classes);
  if (arch.has_hidden()) {
    std::vector<double> h(arch.hidden);
    affine(v.w1, v.b1, x, arch.hidden, arch.features, h);
    for (auto& e : h) e = std::max(e, 0.0);
    affine(v.w2, v.b2, h, arch.classes, arch.hidden, z);
  } else {
    affine(v.w2, v.b2, x, arch.classes, arch.features, z);
  }
  return z;
}

LossGrad cross_entropy(const Architecture& arch, std::span<const double> params, const Dataset& data,
                       std::span<const std::size_t> rows) {
  check_data(arch, params, data);
  std::vector<std::size_t> all;
  if (rows.empty()) {
    all.resize(data.size());
    std::iota(all.begin(), all.end(), std::size_t{0});
    rows = all;
  }
  const Views v = split(arch, params);
  LossGrad out;
  out.gradient.assign(params.size(), 0.0);
  const std::size_t F = arch.features, H = arch.hidden, C = arch.classes;

  std::vector<double> a(H), h(H), z(C), dz(C), dh(H);
  // Gradient block offsets follow the parameter layout.
  double* g = out.gradient.data();
  double* gw1 = g;
  double* gb1 = g + H * F;
  double* gw2 = arch.has_hidden() ? g + H * F + H : g;
  double* gb2 = arch.has_hidden() ? gw2 + C * H : g + C * F;

  for (auto i : rows) {
    const auto x = data.row(i);
    const int y = data.labels[i];
    if (arch.has_hidden()) {
      affine(v.w1, v.b1, x, H, F, a);
      for (std::size_t j = 0; j < H; ++j) h[j] = std::max(a[j], 0.0);
      affine(v.w2, v.b2, h, C, H, z);
      out.loss += softmax_xent(z, y, dz);
      std::fill(dh.begin(), dh.end(), 0.0);
      for (std::size_t c = 0; c < C; ++c) {
        const double* w2r = v.w2.data() + c * H;
        double* gw2r = gw2 + c * H;
        for (std::size_t j = 0; j < H; ++j) {
          gw2r[j] += dz[c] * h[j];
          dh[j] += w2r[j] * dz[c];
        }
        gb2[c] += dz[c];
      }
      for (std::size_t j = 0; j < H; ++j) {
        if (a[j] <= 0.0) continue;
        double* gw1r = gw1 + j * F;
        for (std::size_t f = 0; f < F; ++f) gw1r[f] += dh[j] * x[f];
        gb1[j] += dh[j];
      }
    } else {
      affine(v.w2, v.b2, x, C, F, z);
      out.loss += softmax_xent(z, y, dz);
      for (std::size_t c = 0; c < C; ++c) {
        double* gwr = gw2 + c * F;
        for (std::size_t f = 0; f < F; ++f) gwr[f] += dz[c] * x[f];
        gb2[c] += dz[c];
      }
    }
  }
  const double n = static_cast<double>(rows.size());
  out.loss /= n;
  for (auto& e : out.gradient) e /= n;
  return out;
}

Metrics evaluate(const ModelParams& params, const Dataset& data) {
  const Architecture arch = Architecture::of(params);
  check_data(arch, params.values, data);
  if (data.size() == 0) throw Error(ErrorCode::kShapeMismatch, "empty dataset");
  std::size_t correct = 0;
  double loss = 0.0;
  std::vector<double> dz(arch.classes);
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto z = forward(arch, params.values, data.row(i));
    const auto pred = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
    correct += pred == static_cast<std::size_t>(data.labels[i]);
    loss += softmax_xent(z, data.labels[i], dz);
  }
  const double n = static_cast<double>(data.size());
  return {static_cast<double>(correct) / n, loss / n};
}

// ---- model file ---------------------------------------------------------------

namespace {

constexpr char kModelMagic[8] = {'V', 'F', 'L', 'M', 'O', 'D', 'E', 'L'};
constexpr std::uint32_t kModelVersion = 1;

template <typename T>
void put_le(std::vector<char>& out, T v) {
  static_assert(std::is_unsigned_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class LeReader {
 public:
  explicit LeReader(const std::vector<char>& data) : data_(data) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(data_.begin() + static_cast<std::ptrdiff_t>(pos_),
                  data_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error(ErrorCode::kParseError, "model file truncated");
  }
  const std::vector<char>& data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_model(const std::filesystem::path& path, const ModelParams& params, const watermark::ParamSlice& slice) {
  std::vector<char> out(std::begin(kModelMagic), std::end(kModelMagic));
  put_le<std::uint32_t>(out, kModelVersion);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(params.shapes.size()));
  for (const auto& s : params.shapes) {
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.name.size()));
    out.insert(out.end(), s.name.begin(), s.name.end());
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(s.dims.size()));
    for (auto d : s.dims) put_le<std::uint64_t>(out, d);
  }
  put_le<std::uint64_t>(out, slice.offset);
  put_le<std::uint64_t>(out, slice.length);
  put_le<std::uint64_t>(out, params.values.size());
  for (double v : params.values) put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorCode::kInvalidArgument, "cannot write " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

ModelFile load_model(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::kParseError, "cannot open " + path.string());
  const std::vector<char> data{std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
  LeReader r(data);
  if (r.str(8) != std::string(kModelMagic, 8)) throw Error(ErrorCode::kParseError, "not a model file");
  if (r.get<std::uint32_t>() != kModelVersion) throw Error(ErrorCode::kParseError, "unsupported model version");

  ModelFile mf;
  const auto layers = r.get<std::uint32_t>();
  if (layers > 64) throw Error(ErrorCode::kParseError, "implausible layer count");
  for (std::uint32_t i = 0; i < layers; ++i) {
    LayerShape s;
    s.name = r.str(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw Error(ErrorCode::kParseError, "implausible layer rank");
    for (std::uint32_t d = 0; d < rank; ++d) s.dims.push_back(r.get<std::uint64_t>());
    mf.params.shapes.push_back(std::move(s));
  }
  mf.slice.offset = r.get<std::uint64_t>();
  mf.slice.length = r.get<std::uint64_t>();
  const auto n = r.get<std::uint64_t>();
  if (n > data.size() / 8) throw Error(ErrorCode::kParseError, "value count exceeds file size");
  mf.params.values.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) mf.params.values.push_back(std::bit_cast<double>(r.get<std::uint64_t>()));
  if (!r.done()) throw Error(ErrorCode::kParseError, "trailing bytes in model file");
  if (!mf.params.valid()) throw Error(ErrorCode::kParseError, "layer table does not match values or non-finite value");
  return mf;
}

}  // namespace veryfl::fl
