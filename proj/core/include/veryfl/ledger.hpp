#pragma once

// Deterministic in-process blockchain: genesis accounts, a FIFO transaction
// queue, hash-chained blocks and bit-exact replay.
//
// The ledger knows nothing about contract semantics. Contract logic is
// supplied through a ContractHost; every transaction is dispatched to it at
// seal time and a rejected call is recorded in the block with its error code.
//
// Concurrency: single writer. submit() and seal() must be externally
// serialized; const member functions may run concurrently with each other.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "veryfl/bytes.hpp"
#include "veryfl/errors.hpp"

namespace veryfl::ledger {

struct Transaction {
  std::uint64_t nonce = 0;
  Address sender;
  std::string contract;
  std::string method;
  Bytes payload;
  std::uint64_t round_tag = 0;

  bool operator==(const Transaction&) const = default;
};

struct Receipt {
  bool ok = true;
  ErrorCode error = ErrorCode::kOk;

  bool operator==(const Receipt&) const = default;
};

struct IncludedTx {
  Transaction tx;
  Receipt receipt;

  bool operator==(const IncludedTx&) const = default;
};

struct Block {
  std::uint64_t index = 0;
  Digest prev_hash{};
  std::vector<IncludedTx> txs;
  Digest state_root{};
  Digest block_hash{};

  bool operator==(const Block&) const = default;
};

void encode(Encoder& enc, const Transaction& tx);
Transaction decode_transaction(Decoder& dec);

// SHA-256 over the encoded transaction followed by its receipt.
Digest tx_digest(const IncludedTx& itx);
// SHA-256 over (index, prev_hash, tx digests, state_root).
Digest compute_block_hash(const Block& block);

Bytes encode(const Block& block);
// Strict: rejects trailing bytes and non-canonical fields.
Block decode_block(ByteView bytes);

// Deterministic account address for (chain seed, account index).
Address derive_address(std::uint64_t chain_seed, std::uint64_t index);

// Contract states are hashed in lexicographic name order after the account list.
Digest compute_state_root(std::span<const Address> accounts,
                          const std::map<std::string, Bytes, std::less<>>& contract_states);

struct ExecContext {
  Address sender;
  std::uint64_t height = 0;  // index of the block being sealed
  Digest prev_hash{};        // hash of the latest sealed block
  std::uint64_t round_tag = 0;
  Address server;            // accounts[0]
};

class ContractHost {
 public:
  virtual ~ContractHost() = default;

  // Throws Error(kSchemaViolation) when the contract/method is unknown or the
  // payload does not decode under the method's argument schema.
  virtual void check_schema(std::string_view contract, std::string_view method,
                            ByteView payload) const = 0;

  // Executes one call. Throws veryfl::Error on rejection and must leave all
  // contract state untouched when it does.
  virtual void apply(const Transaction& tx, const ExecContext& ctx) = 0;

  // Canonical state of every deployed contract, keyed by contract name.
  virtual std::map<std::string, Bytes, std::less<>> states() const = 0;

  // A host with the same static configuration and no state, used by replay.
  virtual std::unique_ptr<ContractHost> fresh() const = 0;
};

class Ledger {
 public:
  static constexpr std::size_t kDefaultAccounts = 10;

  // Genesis: `account_count` (>= 10) accounts and block 0.
  Ledger(std::uint64_t chain_seed, std::unique_ptr<ContractHost> host,
         std::size_t account_count = kDefaultAccounts);

  Ledger(Ledger&&) noexcept = default;
  Ledger& operator=(Ledger&&) noexcept = default;

  // Queues a transaction and returns its position in the pending FIFO.
  // Throws UnknownSender, BadNonce or SchemaViolation without mutating state.
  std::size_t submit(Transaction tx);

  // Drains the pending queue into a new block.
  const Block& seal();

  // Rebuilds a ledger from blocks, re-executing every transaction. Throws
  // BrokenHashChain, ReceiptMismatch or StateRootMismatch naming the first
  // bad height.
  static Ledger replay(std::span<const Block> blocks, std::uint64_t chain_seed,
                       std::size_t account_count, std::unique_ptr<ContractHost> host);

  std::uint64_t chain_seed() const { return chain_seed_; }
  const std::vector<Address>& accounts() const { return accounts_; }
  const Address& server() const { return accounts_.front(); }
  bool has_account(const Address& a) const;
  std::uint64_t next_nonce(const Address& a) const;

  std::size_t height() const { return chain_.size(); }
  const std::vector<Block>& chain() const { return chain_; }
  const Block& tip() const { return chain_.back(); }
  // Throws NotFound.
  const Block& block(std::uint64_t index) const;
  // Canonical bytes of one contract's state. Throws NotFound when undeployed.
  Bytes state(std::string_view contract) const;
  Digest current_state_root() const;

  std::size_t pending_size() const { return pending_.size(); }
  const ContractHost& host() const { return *host_; }

 private:
  Block build_next_block();

  std::uint64_t chain_seed_;
  std::unique_ptr<ContractHost> host_;
  std::vector<Address> accounts_;
  std::map<Address, std::uint64_t> next_nonce_;
  std::vector<Transaction> pending_;
  std::vector<Block> chain_;
};

// Append-only block log: header (magic, version, chain seed, account count)
// followed by u32-length-prefixed canonical block encodings.
struct BlockLog {
  std::uint64_t chain_seed = 0;
  std::uint32_t account_count = 0;
  std::vector<Block> blocks;
};

class BlockLogWriter {
 public:
  // Creates the file with a header, truncating any existing file.
  BlockLogWriter(const std::filesystem::path& path, std::uint64_t chain_seed,
                 std::uint32_t account_count);
  void append(const Block& block);

 private:
  std::ofstream out_;
};

void write_block_log(const std::filesystem::path& path, const Ledger& ledger);
// Throws Error(kLogCorrupt) naming the height of the first undecodable block.
BlockLog read_block_log(const std::filesystem::path& path);
BlockLog parse_block_log(ByteView bytes);

}  // namespace veryfl::ledger
