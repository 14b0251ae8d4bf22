#include "veryfl/watermark.hpp"

#include <random>

#include "veryfl/errors.hpp"
#include "veryfl/sha256.hpp"

namespace veryfl::watermark {

WatermarkKey WatermarkKey::derive(std::uint64_t key_seed, std::size_t k, std::size_t d) {
  if (k == 0 || k > d) {
    throw Error(ErrorCode::kBadDimensions, "need 1 <= k <= d, got k=" + std::to_string(k) +
                                               " d=" + std::to_string(d));
  }
  // mt19937_64 output is fixed by the standard; the sign comes from the top bit.
  std::mt19937_64 gen(key_seed);
  std::vector<std::int8_t> m(k * d);
  for (auto& e : m) e = (gen() >> 63) ? 1 : -1;
  return WatermarkKey(key_seed, k, d, std::move(m));
}

WatermarkKey WatermarkKey::from_matrix(std::size_t k, std::size_t d, std::vector<std::int8_t> matrix) {
  if (k == 0 || k > d || matrix.size() != k * d) {
    throw Error(ErrorCode::kBadDimensions, "matrix of " + std::to_string(matrix.size()) + " entries for k=" +
                                               std::to_string(k) + " d=" + std::to_string(d));
  }
  for (auto e : matrix) {
    if (e != 1 && e != -1) throw Error(ErrorCode::kInvalidArgument, "matrix entries must be +1 or -1");
  }
  return WatermarkKey(0, k, d, std::move(matrix));
}

std::vector<double> WatermarkKey::project(std::span<const double> slice) const {
  if (slice.size() != d_) {
    throw Error(ErrorCode::kLengthMismatch, "slice has " + std::to_string(slice.size()) +
                                                " values, key expects " + std::to_string(d_));
  }
  std::vector<double> out(k_, 0.0);
  for (std::size_t i = 0; i < k_; ++i) {
    const auto r = row(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < d_; ++j) acc += r[j] * slice[j];
    out[i] = acc;
  }
  return out;
}

std::span<const double> ParamSlice::view(std::span<const double> params) const {
  if (length == 0 || offset > params.size() || length > params.size() - offset) {
    throw Error(ErrorCode::kBadDimensions, "watermark slice [" + std::to_string(offset) + ", +" +
                                               std::to_string(length) + ") outside " +
                                               std::to_string(params.size()) + " parameters");
  }
  return params.subspan(offset, length);
}

std::span<double> ParamSlice::view(std::span<double> params) const {
  const auto c = view(std::span<const double>(params));
  return params.subspan(c.data() - params.data(), c.size());
}

WatermarkBits extract(std::span<const double> slice, const WatermarkKey& key) {
  const auto scores = key.project(slice);
  WatermarkBits out;
  out.bits.reserve(scores.size());
  for (double s : scores) out.bits.push_back(s >= 0.0 ? 1 : -1);
  return out;
}

Regularizer regularizer(std::span<const double> slice, const WatermarkKey& key,
                        const WatermarkBits& target, double gamma) {
  if (!(gamma > 0.0)) throw Error(ErrorCode::kInvalidArgument, "gamma must be positive");
  if (target.size() != key.k()) {
    throw Error(ErrorCode::kLengthMismatch, "target has " + std::to_string(target.size()) +
                                                " bits, key has " + std::to_string(key.k()));
  }
  const auto scores = key.project(slice);
  Regularizer out;
  out.gradient.assign(key.d(), 0.0);
  for (std::size_t i = 0; i < key.k(); ++i) {
    const double b = target.bits[i];
    const double margin = gamma - b * scores[i];
    if (margin <= 0.0) continue;
    out.loss += margin;
    const auto r = key.row(i);
    for (std::size_t j = 0; j < key.d(); ++j) out.gradient[j] -= b * r[j];
  }
  return out;
}

double detection_rate(const WatermarkBits& extracted, const WatermarkBits& target) {
  if (extracted.size() != target.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(extracted.size()) + " vs " +
                                                std::to_string(target.size()) + " bits");
  }
  if (target.size() == 0) return 1.0;
  std::size_t agree = 0;
  for (std::size_t i = 0; i < target.size(); ++i) agree += extracted.bits[i] == target.bits[i];
  return static_cast<double>(agree) / static_cast<double>(target.size());
}

Digest commitment(const WatermarkBits& bits, std::uint64_t key_seed) {
  Encoder enc;
  for (auto b : bits.bits) enc.u8(b > 0 ? 0x01 : 0x00);
  enc.u64(key_seed);
  return sha256(enc.buffer());
}

}  // namespace veryfl::watermark
