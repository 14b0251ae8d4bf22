#include "veryfl/bytes.hpp"

#include <algorithm>
#include <limits>

#include "veryfl/errors.hpp"

namespace veryfl {

std::string to_hex(ByteView bytes) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0x0f]);
  }
  return out;
}

namespace {
int nibble(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}
}  // namespace

Bytes from_hex(std::string_view hex) {
  if (hex.size() % 2 != 0) throw Error(ErrorCode::kParseError, "odd-length hex string");
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int hi = nibble(hex[2 * i]);
    const int lo = nibble(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) throw Error(ErrorCode::kParseError, "invalid hex digit");
    out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
  }
  return out;
}

Digest digest_from_hex(std::string_view hex) {
  const Bytes b = from_hex(hex);
  if (b.size() != 32) throw Error(ErrorCode::kParseError, "digest must be 32 bytes");
  Digest d;
  std::copy(b.begin(), b.end(), d.begin());
  return d;
}

Encoder& Encoder::u8(std::uint8_t v) {
  buf_.push_back(v);
  return *this;
}

Encoder& Encoder::u32(std::uint32_t v) {
  for (int shift = 24; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

Encoder& Encoder::u64(std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8) buf_.push_back(static_cast<std::uint8_t>(v >> shift));
  return *this;
}

Encoder& Encoder::digest(const Digest& d) {
  buf_.insert(buf_.end(), d.begin(), d.end());
  return *this;
}

Encoder& Encoder::bytes(ByteView b) {
  if (b.size() > std::numeric_limits<std::uint32_t>::max()) {
    throw Error(ErrorCode::kInvalidArgument, "field exceeds u32 length prefix");
  }
  u32(static_cast<std::uint32_t>(b.size()));
  return raw(b);
}

Encoder& Encoder::raw(ByteView b) {
  buf_.insert(buf_.end(), b.begin(), b.end());
  return *this;
}

void Decoder::need(std::size_t n) const {
  if (remaining() < n) throw Error(ErrorCode::kParseError, "truncated input");
}

std::uint8_t Decoder::u8() {
  need(1);
  return data_[pos_++];
}

std::uint32_t Decoder::u32() {
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v = (v << 8) | data_[pos_++];
  return v;
}

std::uint64_t Decoder::u64() {
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | data_[pos_++];
  return v;
}

bool Decoder::boolean() {
  const auto v = u8();
  if (v > 1) throw Error(ErrorCode::kParseError, "non-canonical boolean");
  return v == 1;
}

Digest Decoder::digest() {
  need(32);
  Digest d;
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(pos_), 32, d.begin());
  pos_ += 32;
  return d;
}

Bytes Decoder::bytes() {
  const auto n = u32();
  const auto view = raw(n);
  return Bytes(view.begin(), view.end());
}

std::string Decoder::str() {
  const auto n = u32();
  const auto view = raw(n);
  return std::string(view.begin(), view.end());
}

ByteView Decoder::raw(std::size_t n) {
  need(n);
  auto view = data_.subspan(pos_, n);
  pos_ += n;
  return view;
}

void Decoder::expect_done() const {
  if (!done()) throw Error(ErrorCode::kParseError, "trailing bytes");
}

}  // namespace veryfl
