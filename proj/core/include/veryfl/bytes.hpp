#pragma once

// Canonical byte encoding shared by the ledger, contracts and watermark
// commitments: big-endian fixed-width integers, u32 length prefixes for
// variable-size fields.

#include <array>
#include <compare>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace veryfl {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;
using Digest = std::array<std::uint8_t, 32>;

struct Address {
  Digest id{};

  auto operator<=>(const Address&) const = default;
  bool operator==(const Address&) const = default;
};

std::string to_hex(ByteView bytes);
inline std::string to_hex(const Digest& d) { return to_hex(ByteView{d}); }
inline std::string to_hex(const Address& a) { return to_hex(ByteView{a.id}); }

// Throws Error(kParseError) on odd length or non-hex characters.
Bytes from_hex(std::string_view hex);
Digest digest_from_hex(std::string_view hex);

inline ByteView as_bytes(std::string_view s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

class Encoder {
 public:
  Encoder& u8(std::uint8_t v);
  Encoder& u32(std::uint32_t v);
  Encoder& u64(std::uint64_t v);
  Encoder& boolean(bool v) { return u8(v ? 1 : 0); }
  Encoder& digest(const Digest& d);
  Encoder& address(const Address& a) { return digest(a.id); }
  // Length-prefixed (u32).
  Encoder& bytes(ByteView b);
  Encoder& str(std::string_view s) { return bytes(as_bytes(s)); }
  // No prefix.
  Encoder& raw(ByteView b);

  const Bytes& buffer() const& { return buf_; }
  Bytes take() && { return std::move(buf_); }

 private:
  Bytes buf_;
};

// Strict decoder: every read throws Error(kParseError) on truncation;
// booleans must be exactly 0 or 1.
class Decoder {
 public:
  explicit Decoder(ByteView data) : data_(data) {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  bool boolean();
  Digest digest();
  Address address() { return Address{digest()}; }
  Bytes bytes();
  std::string str();
  ByteView raw(std::size_t n);

  std::size_t remaining() const { return data_.size() - pos_; }
  bool done() const { return remaining() == 0; }
  // Throws if unread bytes remain.
  void expect_done() const;

 private:
  void need(std::size_t n) const;

  ByteView data_;
  std::size_t pos_ = 0;
};

}  // namespace veryfl
