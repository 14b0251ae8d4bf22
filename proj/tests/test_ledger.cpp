#include <doctest.h>

#include <memory>
#include <random>

#include "support.hpp"
#include "veryfl/contracts.hpp"
#include "veryfl/errors.hpp"
#include "veryfl/ledger.hpp"

using namespace veryfl;
using ledger::Ledger;
using ledger::Transaction;

namespace {

Ledger make_ledger(std::uint64_t seed = 11, std::size_t accounts = 10) {
  return Ledger(seed, std::make_unique<contracts::ContractSet>(), accounts);
}

Transaction tx(const Ledger& l, const Address& sender, std::string_view contract, std::string_view method,
               Bytes payload) {
  return Transaction{l.next_nonce(sender), sender, std::string(contract), std::string(method), std::move(payload), 0};
}

// Deploys contracts and registers accounts[1..n] as client_1..client_n in one block.
void setup(Ledger& l, std::size_t n) {
  l.submit(tx(l, l.server(), contracts::kSystem, "deploy", contracts::payload::deploy(32)));
  for (std::size_t i = 1; i <= n; ++i) {
    const auto& a = l.accounts()[i];
    l.submit(tx(l, a, contracts::kRegistry, "register_client", contracts::payload::register_client("client_" + std::to_string(i))));
  }
  l.seal();
}

Ledger replay_of(const Ledger& l) {
  return Ledger::replay(l.chain(), l.chain_seed(), l.accounts().size(), std::make_unique<contracts::ContractSet>());
}

}  // namespace

TEST_SUITE("ledger") {
  TEST_CASE("genesis creates ten accounts with the first one as server") {
    const auto l = make_ledger();
    CHECK(l.accounts().size() == 10);
    CHECK(l.server() == l.accounts()[0]);
    CHECK(l.height() == 1);
    CHECK(l.block(0).index == 0);
    CHECK(l.block(0).prev_hash == Digest{});
    CHECK(l.block(0).txs.empty());
  }

  TEST_CASE("genesis is deterministic in the seed") {
    const auto a = make_ledger(5), b = make_ledger(5), c = make_ledger(6);
    CHECK(a.accounts() == b.accounts());
    CHECK(a.tip().block_hash == b.tip().block_hash);
    CHECK(a.accounts() != c.accounts());
    CHECK(a.tip().block_hash != c.tip().block_hash);
  }

  TEST_CASE("fewer than ten accounts is rejected") {
    CHECK_THROWS_AS(make_ledger(1, 9), Error);
  }

  TEST_CASE("submit queues transactions in FIFO order") {
    auto l = make_ledger();
    const auto& s = l.server();
    CHECK(l.submit(tx(l, s, contracts::kSystem, "deploy", contracts::payload::deploy(8))) == 0);
    CHECK(l.submit(tx(l, l.accounts()[1], contracts::kRegistry, "register_client", contracts::payload::register_client("a"))) == 1);
    CHECK(l.submit(tx(l, l.accounts()[2], contracts::kRegistry, "register_client", contracts::payload::register_client("b"))) == 2);
    const auto& b = l.seal();
    REQUIRE(b.txs.size() == 3);
    CHECK(b.txs[0].tx.method == "deploy");
    CHECK(b.txs[2].tx.sender == l.accounts()[2]);
    CHECK(l.pending_size() == 0);
  }

  TEST_CASE("admission errors leave the ledger untouched") {
    auto l = make_ledger();
    const auto& s = l.server();
    auto good = tx(l, s, contracts::kSystem, "deploy", contracts::payload::deploy(8));
    l.submit(good);

    SUBCASE("reused nonce") {
      auto again = good;
      CHECK_THROWS_WITH_AS(l.submit(again), doctest::Contains("BadNonce"), Error);
    }
    SUBCASE("unknown sender") {
      auto stranger = tx(l, s, contracts::kSystem, "deploy", contracts::payload::deploy(8));
      stranger.sender = ledger::derive_address(999, 0);
      CHECK_THROWS_WITH_AS(l.submit(stranger), doctest::Contains("UnknownSender"), Error);
    }
    SUBCASE("schema violation") {
      auto bad = tx(l, s, contracts::kRegistry, "register_client", Bytes{1, 2});
      CHECK_THROWS_WITH_AS(l.submit(bad), doctest::Contains("SchemaViolation"), Error);
      auto unknown = tx(l, s, contracts::kRegistry, "nope", {});
      CHECK_THROWS_WITH_AS(l.submit(unknown), doctest::Contains("SchemaViolation"), Error);
    }
    CHECK(l.pending_size() == 1);
    CHECK(l.next_nonce(s) == 1);
  }

  TEST_CASE("sealing an empty queue keeps the state root") {
    auto l = make_ledger();
    const auto before = l.tip().state_root;
    const auto& b = l.seal();
    CHECK(b.txs.empty());
    CHECK(b.state_root == before);
    CHECK(b.prev_hash == l.block(0).block_hash);
  }

  TEST_CASE("a failing transaction is recorded and changes nothing") {
    auto l = make_ledger();
    setup(l, 2);
    const auto before = l.tip().state_root;
    // accounts[1] is not the server.
    l.submit(tx(l, l.accounts()[1], contracts::kElection, "elect_aggregator", contracts::payload::elect_aggregator(1)));
    const auto& b = l.seal();
    REQUIRE(b.txs.size() == 1);
    CHECK_FALSE(b.txs[0].receipt.ok);
    CHECK(b.txs[0].receipt.error == ErrorCode::kNotServerAccount);
    CHECK(b.state_root == before);
  }

  TEST_CASE("get_block and get_state report NotFound") {
    auto l = make_ledger();
    CHECK_THROWS_WITH_AS(l.block(5), doctest::Contains("NotFound"), Error);
    CHECK_THROWS_WITH_AS(l.state(contracts::kRegistry), doctest::Contains("NotFound"), Error);
    setup(l, 1);
    CHECK_FALSE(l.state(contracts::kRegistry).empty());
  }

  TEST_CASE("replay of genesis only equals init") {
    const auto l = make_ledger(3);
    const auto r = replay_of(l);
    CHECK(r.accounts() == l.accounts());
    CHECK(r.tip() == l.tip());
  }

  TEST_CASE("replay reproduces every stored state root") {
    auto l = make_ledger();
    setup(l, 4);
    for (std::uint64_t i = 1; i <= 4; ++i) {
      l.submit(tx(l, l.accounts()[i], contracts::kTraining, "record_training",
                  contracts::payload::record_training(1, 500000 + i, 693147, 10 * i)));
    }
    l.submit(tx(l, l.server(), contracts::kIncentive, "distribute_incentives", contracts::payload::distribute_incentives(1, 100)));
    l.seal();
    const auto r = replay_of(l);
    REQUIRE(r.height() == l.height());
    for (std::uint64_t h = 0; h < l.height(); ++h) CHECK(r.block(h).state_root == l.block(h).state_root);
    CHECK(r.current_state_root() == l.current_state_root());
  }

  TEST_CASE("replay detects a tampered payload at its height") {
    auto l = make_ledger();
    setup(l, 3);
    l.submit(tx(l, l.accounts()[1], contracts::kTraining, "record_training", contracts::payload::record_training(1, 1, 2, 3)));
    l.seal();
    auto chain = l.chain();
    chain[2].txs[0].tx.payload.back() ^= 0x01;
    try {
      (void)Ledger::replay(chain, l.chain_seed(), 10, std::make_unique<contracts::ContractSet>());
      FAIL("replay accepted a tampered chain");
    } catch (const Error& e) {
      CHECK((e.code() == ErrorCode::kBrokenHashChain || e.code() == ErrorCode::kStateRootMismatch));
      CHECK(e.height() == 2u);
    }
  }

  TEST_CASE("replay rejects a forged block hash even when recomputed") {
    auto l = make_ledger();
    setup(l, 2);
    auto chain = l.chain();
    // Rewrite the receipt and re-hash: the chain links but the outcome disagrees.
    chain[1].txs[1].receipt = {false, ErrorCode::kDuplicateAddress};
    chain[1].block_hash = ledger::compute_block_hash(chain[1]);
    try {
      (void)Ledger::replay(chain, l.chain_seed(), 10, std::make_unique<contracts::ContractSet>());
      FAIL("replay accepted a forged receipt");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kReceiptMismatch);
      CHECK(e.height() == 1u);
    }
  }

  TEST_CASE("block encoding round trips and rejects trailing bytes") {
    auto l = make_ledger();
    setup(l, 3);
    const auto& b = l.tip();
    auto bytes = ledger::encode(b);
    CHECK(ledger::decode_block(bytes) == b);
    bytes.push_back(0);
    CHECK_THROWS_AS(ledger::decode_block(bytes), Error);
  }

  TEST_CASE("block log round trips through a file") {
    test::TempDir dir("ledger");
    auto l = make_ledger(21, 12);
    setup(l, 5);
    ledger::write_block_log(dir / "chain.log", l);
    const auto log = ledger::read_block_log(dir / "chain.log");
    CHECK(log.chain_seed == 21);
    CHECK(log.account_count == 12);
    CHECK(log.blocks == l.chain());
  }

  TEST_CASE("corrupt block log names the failing height") {
    test::TempDir dir("ledger");
    auto l = make_ledger();
    setup(l, 2);
    ledger::write_block_log(dir / "chain.log", l);
    auto bytes = test::read_file(dir / "chain.log");
    bytes.resize(bytes.size() - 3);
    try {
      (void)ledger::parse_block_log(bytes);
      FAIL("truncated log parsed");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kLogCorrupt);
      CHECK(e.height() == 1u);
    }
  }

  TEST_CASE("property: nonces stay sequential under random interleavings") {
    std::mt19937_64 rng(99);
    auto l = make_ledger();
    setup(l, 9);
    for (int step = 0; step < 300; ++step) {
      const auto& a = l.accounts()[rng() % 10];
      const auto expected = l.next_nonce(a);
      l.submit(tx(l, a, contracts::kRegistry, "register_client", contracts::payload::register_client("x" + std::to_string(step))));
      CHECK(l.next_nonce(a) == expected + 1);
      if (rng() % 7 == 0) l.seal();
    }
    l.seal();
    const auto r = replay_of(l);
    CHECK(r.current_state_root() == l.current_state_root());
  }
}
