#include <doctest.h>

#include <json.hpp>

#include "support.hpp"
#include "veryfl/bytes.hpp"
#include "veryfl/errors.hpp"
#include "veryfl/sha256.hpp"

using namespace veryfl;

TEST_SUITE("codec") {
  TEST_CASE("sha256 matches the published empty and abc vectors") {
    CHECK(to_hex(sha256(std::string_view{})) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(to_hex(sha256(std::string_view{"abc"})) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  }

  TEST_CASE("incremental hashing equals one-shot hashing") {
    Sha256 h;
    h.update(std::string_view{"ab"});
    h.update(std::string_view{"c"});
    CHECK(h.finish() == sha256(std::string_view{"abc"}));
  }

  TEST_CASE("hex round trip and rejection of malformed input") {
    const Bytes b{0x00, 0x7f, 0xff, 0x10};
    CHECK(to_hex(b) == "007fff10");
    CHECK(from_hex("007FFF10") == b);
    CHECK_THROWS_AS(from_hex("abc"), Error);
    CHECK_THROWS_AS(from_hex("zz"), Error);
    CHECK_THROWS_AS(digest_from_hex("00"), Error);
  }

  TEST_CASE("encoder writes big-endian integers and length-prefixed strings") {
    Encoder e;
    e.u32(0x01020304).u64(5).str("hi").boolean(true);
    const Bytes expect{1, 2, 3, 4, 0, 0, 0, 0, 0, 0, 0, 5, 0, 0, 0, 2, 'h', 'i', 1};
    CHECK(e.buffer() == expect);

    Decoder d(e.buffer());
    CHECK(d.u32() == 0x01020304u);
    CHECK(d.u64() == 5u);
    CHECK(d.str() == "hi");
    CHECK(d.boolean());
    CHECK(d.done());
    CHECK_NOTHROW(d.expect_done());
  }

  TEST_CASE("decoder is strict about truncation, trailing bytes and booleans") {
    const Bytes short_u64{0, 0, 0};
    Decoder d1(short_u64);
    CHECK_THROWS_AS(d1.u64(), Error);

    const Bytes trailing{1, 9};
    Decoder d2(trailing);
    CHECK(d2.u8() == 1);
    CHECK_THROWS_AS(d2.expect_done(), Error);

    const Bytes bad_bool{2};
    Decoder d3(bad_bool);
    CHECK_THROWS_AS(d3.boolean(), Error);

    const Bytes overlong{0, 0, 0, 9, 'x'};
    Decoder d4(overlong);
    CHECK_THROWS_AS(d4.bytes(), Error);
  }

  TEST_CASE("every error code has a unique name that parses back") {
    for (std::uint32_t c = 0; c <= static_cast<std::uint32_t>(ErrorCode::kConcurrentMutation); ++c) {
      const auto code = static_cast<ErrorCode>(c);
      const auto name = to_string(code);
      CAPTURE(name);
      REQUIRE(error_code_from_string(name).has_value());
      CHECK(*error_code_from_string(name) == code);
    }
    CHECK_FALSE(error_code_from_string("NoSuchError").has_value());
  }

  TEST_CASE("errors carry their code and optional height") {
    const Error plain(ErrorCode::kBadNonce, "x");
    CHECK(plain.code() == ErrorCode::kBadNonce);
    CHECK_FALSE(plain.height().has_value());
    const Error at(ErrorCode::kBrokenHashChain, "y", 4);
    CHECK(at.height() == 4u);
    CHECK(std::string(at.what()).find("BrokenHashChain") != std::string::npos);
  }

  TEST_CASE("installed contract manifest matches the compiled catalog") {
    const auto on_disk = nlohmann::json::parse(test::read_text(VERYFL_MANIFEST_FILE));
    const auto compiled = nlohmann::json::parse(contracts::manifest_json());
    CHECK(on_disk == compiled);
    CHECK(compiled["methods"].size() == contracts::method_catalog().size());
  }
}
