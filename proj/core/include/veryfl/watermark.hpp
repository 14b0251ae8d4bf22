#pragma once

// Feature-based white-box watermarking over a slice of the flat parameter
// vector: a secret +-1 projection matrix E maps the slice w to k scores, and
// the watermark bits are sign(E w). All functions are pure.

#include <cstdint>
#include <span>
#include <vector>

#include "veryfl/bytes.hpp"

namespace veryfl::watermark {

inline constexpr double kDefaultGamma = 0.1;
inline constexpr double kDefaultLambda = 0.5;

struct WatermarkBits {
  std::vector<std::int8_t> bits;  // +1 / -1

  std::size_t size() const { return bits.size(); }
  bool operator==(const WatermarkBits&) const = default;
};

class WatermarkKey {
 public:
  // Throws BadDimensions unless 1 <= k <= d.
  static WatermarkKey derive(std::uint64_t key_seed, std::size_t k, std::size_t d);
  // Explicit k x d row-major matrix of +1/-1 entries; seed is recorded as 0.
  static WatermarkKey from_matrix(std::size_t k, std::size_t d, std::vector<std::int8_t> matrix);

  std::uint64_t key_seed() const { return key_seed_; }
  std::size_t k() const { return k_; }
  std::size_t d() const { return d_; }
  // Row-major k x d matrix of +1 / -1.
  std::span<const std::int8_t> matrix() const { return matrix_; }
  std::span<const std::int8_t> row(std::size_t i) const { return {matrix_.data() + i * d_, d_}; }

  // E w; throws LengthMismatch.
  std::vector<double> project(std::span<const double> slice) const;

  bool operator==(const WatermarkKey&) const = default;

 private:
  WatermarkKey(std::uint64_t seed, std::size_t k, std::size_t d, std::vector<std::int8_t> m)
      : key_seed_(seed), k_(k), d_(d), matrix_(std::move(m)) {}

  std::uint64_t key_seed_;
  std::size_t k_;
  std::size_t d_;
  std::vector<std::int8_t> matrix_;
};

// Offset/length of the watermarked region inside a flat parameter vector.
struct ParamSlice {
  std::size_t offset = 0;
  std::size_t length = 0;

  // Throws BadDimensions when the slice exceeds `total`.
  std::span<const double> view(std::span<const double> params) const;
  std::span<double> view(std::span<double> params) const;

  bool operator==(const ParamSlice&) const = default;
};

// bits_i = sign((E w)_i) with sign(0) = +1.
WatermarkBits extract(std::span<const double> slice, const WatermarkKey& key);

struct Regularizer {
  double loss = 0.0;
  std::vector<double> gradient;  // d entries
};

// loss = sum_i max(0, gamma - b_i (E w)_i); the gradient sums -b_i E_i over
// strictly active hinges. Throws LengthMismatch / InvalidArgument (gamma <= 0).
Regularizer regularizer(std::span<const double> slice, const WatermarkKey& key,
                        const WatermarkBits& target, double gamma = kDefaultGamma);

// Fraction of agreeing positions; throws LengthMismatch.
double detection_rate(const WatermarkBits& extracted, const WatermarkBits& target);

// SHA-256 over one byte per bit (0x01 for +1, 0x00 for -1) followed by the
// big-endian key seed.
Digest commitment(const WatermarkBits& bits, std::uint64_t key_seed);

}  // namespace veryfl::watermark
