#include "veryfl/ledger.hpp"

#include <algorithm>
#include <iterator>

#include "veryfl/sha256.hpp"

namespace veryfl::ledger {
namespace {

constexpr std::string_view kLogMagic = "VFLCHAIN";
constexpr std::uint32_t kLogVersion = 1;
constexpr std::uint32_t kMaxLogAccounts = 1u << 16;

void encode(Encoder& enc, const Receipt& r) {
  enc.boolean(r.ok).u32(static_cast<std::uint32_t>(r.error));
}

Receipt decode_receipt(Decoder& dec) {
  Receipt r;
  r.ok = dec.boolean();
  const auto raw = dec.u32();
  r.error = static_cast<ErrorCode>(raw);
  if (to_string(r.error) == "Unknown") throw Error(ErrorCode::kParseError, "unknown error code in receipt");
  if (r.ok != (r.error == ErrorCode::kOk)) throw Error(ErrorCode::kParseError, "inconsistent receipt");
  return r;
}

}  // namespace

void encode(Encoder& enc, const Transaction& tx) {
  enc.u64(tx.nonce)
      .address(tx.sender)
      .str(tx.contract)
      .str(tx.method)
      .bytes(tx.payload)
      .u64(tx.round_tag);
}

Transaction decode_transaction(Decoder& dec) {
  Transaction tx;
  tx.nonce = dec.u64();
  tx.sender = dec.address();
  tx.contract = dec.str();
  tx.method = dec.str();
  tx.payload = dec.bytes();
  tx.round_tag = dec.u64();
  return tx;
}

Digest tx_digest(const IncludedTx& itx) {
  Encoder enc;
  encode(enc, itx.tx);
  encode(enc, itx.receipt);
  return sha256(enc.buffer());
}

Digest compute_block_hash(const Block& block) {
  Encoder enc;
  enc.u64(block.index).digest(block.prev_hash).u32(static_cast<std::uint32_t>(block.txs.size()));
  for (const auto& itx : block.txs) enc.digest(tx_digest(itx));
  enc.digest(block.state_root);
  return sha256(enc.buffer());
}

Bytes encode(const Block& block) {
  Encoder enc;
  enc.u64(block.index).digest(block.prev_hash).u32(static_cast<std::uint32_t>(block.txs.size()));
  for (const auto& itx : block.txs) {
    encode(enc, itx.tx);
    encode(enc, itx.receipt);
  }
  enc.digest(block.state_root).digest(block.block_hash);
  return std::move(enc).take();
}

Block decode_block(ByteView bytes) {
  Decoder dec(bytes);
  Block b;
  b.index = dec.u64();
  b.prev_hash = dec.digest();
  const auto n = dec.u32();
  // Each transaction needs well over 32 bytes; reject absurd counts early.
  if (n > dec.remaining() / 32) throw Error(ErrorCode::kParseError, "transaction count exceeds block size");
  b.txs.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    IncludedTx itx;
    itx.tx = decode_transaction(dec);
    itx.receipt = decode_receipt(dec);
    b.txs.push_back(std::move(itx));
  }
  b.state_root = dec.digest();
  b.block_hash = dec.digest();
  dec.expect_done();
  return b;
}

Address derive_address(std::uint64_t chain_seed, std::uint64_t index) {
  Encoder enc;
  enc.raw(as_bytes("veryfl.account")).u64(chain_seed).u64(index);
  return Address{sha256(enc.buffer())};
}

Digest compute_state_root(std::span<const Address> accounts,
                          const std::map<std::string, Bytes, std::less<>>& contract_states) {
  Encoder enc;
  enc.u32(static_cast<std::uint32_t>(accounts.size()));
  for (const auto& a : accounts) enc.address(a);
  enc.u32(static_cast<std::uint32_t>(contract_states.size()));
  for (const auto& [name, state] : contract_states) enc.str(name).bytes(state);
  return sha256(enc.buffer());
}

Ledger::Ledger(std::uint64_t chain_seed, std::unique_ptr<ContractHost> host,
               std::size_t account_count)
    : chain_seed_(chain_seed), host_(std::move(host)) {
  if (!host_) throw Error(ErrorCode::kInvalidArgument, "ledger requires a contract host");
  if (account_count < kDefaultAccounts) {
    throw Error(ErrorCode::kInvalidArgument, "account count must be at least 10");
  }
  accounts_.reserve(account_count);
  for (std::size_t i = 0; i < account_count; ++i) {
    accounts_.push_back(derive_address(chain_seed, i));
    next_nonce_.emplace(accounts_.back(), 0);
  }
  chain_.push_back(build_next_block());
}

bool Ledger::has_account(const Address& a) const { return next_nonce_.contains(a); }

std::uint64_t Ledger::next_nonce(const Address& a) const {
  auto it = next_nonce_.find(a);
  if (it == next_nonce_.end()) throw Error(ErrorCode::kUnknownSender, to_hex(a));
  return it->second;
}

std::size_t Ledger::submit(Transaction tx) {
  auto it = next_nonce_.find(tx.sender);
  if (it == next_nonce_.end()) throw Error(ErrorCode::kUnknownSender, to_hex(tx.sender));
  if (tx.nonce != it->second) {
    throw Error(ErrorCode::kBadNonce, "expected " + std::to_string(it->second) + ", got " +
                                          std::to_string(tx.nonce));
  }
  host_->check_schema(tx.contract, tx.method, tx.payload);
  ++it->second;
  pending_.push_back(std::move(tx));
  return pending_.size() - 1;
}

Block Ledger::build_next_block() {
  Block b;
  b.index = chain_.size();
  if (!chain_.empty()) b.prev_hash = chain_.back().block_hash;
  b.txs.reserve(pending_.size());
  for (auto& tx : pending_) {
    ExecContext ctx{tx.sender, b.index, b.prev_hash, tx.round_tag, accounts_.front()};
    Receipt receipt;
    try {
      host_->apply(tx, ctx);
    } catch (const Error& e) {
      receipt = Receipt{false, e.code()};
    }
    b.txs.push_back(IncludedTx{std::move(tx), receipt});
  }
  pending_.clear();
  b.state_root = current_state_root();
  b.block_hash = compute_block_hash(b);
  return b;
}

const Block& Ledger::seal() {
  chain_.push_back(build_next_block());
  return chain_.back();
}

const Block& Ledger::block(std::uint64_t index) const {
  if (index >= chain_.size()) throw Error(ErrorCode::kNotFound, "block " + std::to_string(index));
  return chain_[index];
}

Bytes Ledger::state(std::string_view contract) const {
  auto states = host_->states();
  auto it = states.find(contract);
  if (it == states.end()) throw Error(ErrorCode::kNotFound, "contract " + std::string(contract));
  return std::move(it->second);
}

Digest Ledger::current_state_root() const { return compute_state_root(accounts_, host_->states()); }

Ledger Ledger::replay(std::span<const Block> blocks, std::uint64_t chain_seed,
                      std::size_t account_count, std::unique_ptr<ContractHost> host) {
  Ledger ledger(chain_seed, std::move(host), account_count);
  if (blocks.empty()) throw Error(ErrorCode::kBrokenHashChain, "no genesis block", 0);

  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& stored = blocks[i];
    const Digest expected_prev = i == 0 ? Digest{} : ledger.tip().block_hash;
    if (stored.index != i || stored.prev_hash != expected_prev ||
        compute_block_hash(stored) != stored.block_hash) {
      throw Error(ErrorCode::kBrokenHashChain, "hash chain broken", i);
    }
    if (i == 0) {
      if (!stored.txs.empty()) throw Error(ErrorCode::kBrokenHashChain, "genesis has transactions", 0);
      if (stored.state_root != ledger.chain_[0].state_root) {
        throw Error(ErrorCode::kStateRootMismatch, "genesis state differs", 0);
      }
      continue;
    }
    for (const auto& itx : stored.txs) {
      try {
        ledger.submit(itx.tx);
      } catch (const Error& e) {
        throw Error(ErrorCode::kReceiptMismatch,
                    std::string("transaction not admissible: ") + e.what(), i);
      }
    }
    Block rebuilt = ledger.build_next_block();
    for (std::size_t t = 0; t < stored.txs.size(); ++t) {
      if (rebuilt.txs[t].receipt != stored.txs[t].receipt) {
        throw Error(ErrorCode::kReceiptMismatch,
                    "transaction " + std::to_string(t) + " outcome differs", i);
      }
    }
    if (rebuilt.state_root != stored.state_root) {
      throw Error(ErrorCode::kStateRootMismatch, "state root differs", i);
    }
    ledger.chain_.push_back(std::move(rebuilt));
  }
  return ledger;
}

BlockLogWriter::BlockLogWriter(const std::filesystem::path& path, std::uint64_t chain_seed,
                               std::uint32_t account_count)
    : out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::kInvalidArgument, "cannot open block log " + path.string());
  Encoder enc;
  enc.raw(as_bytes(kLogMagic)).u32(kLogVersion).u64(chain_seed).u32(account_count);
  out_.write(reinterpret_cast<const char*>(enc.buffer().data()),
             static_cast<std::streamsize>(enc.buffer().size()));
  out_.flush();
}

void BlockLogWriter::append(const Block& block) {
  Encoder enc;
  enc.bytes(encode(block));
  out_.write(reinterpret_cast<const char*>(enc.buffer().data()),
             static_cast<std::streamsize>(enc.buffer().size()));
  out_.flush();
  if (!out_) throw Error(ErrorCode::kInvalidArgument, "block log write failed");
}

void write_block_log(const std::filesystem::path& path, const Ledger& ledger) {
  BlockLogWriter writer(path, ledger.chain_seed(), static_cast<std::uint32_t>(ledger.accounts().size()));
  for (const auto& b : ledger.chain()) writer.append(b);
}

BlockLog parse_block_log(ByteView bytes) {
  BlockLog log;
  Decoder dec(bytes);
  try {
    const auto magic = dec.raw(kLogMagic.size());
    if (!std::equal(magic.begin(), magic.end(), kLogMagic.begin())) {
      throw Error(ErrorCode::kParseError, "bad magic");
    }
    if (dec.u32() != kLogVersion) throw Error(ErrorCode::kParseError, "unsupported version");
    log.chain_seed = dec.u64();
    log.account_count = dec.u32();
    if (log.account_count < Ledger::kDefaultAccounts || log.account_count > kMaxLogAccounts) {
      throw Error(ErrorCode::kParseError, "account count out of range");
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::kLogCorrupt, std::string("header: ") + e.what(), 0);
  }
  while (!dec.done()) {
    const auto height = log.blocks.size();
    try {
      const auto len = dec.u32();
      log.blocks.push_back(decode_block(dec.raw(len)));
    } catch (const Error& e) {
      throw Error(ErrorCode::kLogCorrupt, e.what(), height);
    }
  }
  return log;
}

BlockLog read_block_log(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kNotFound, "cannot open block log " + path.string());
  const Bytes data{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_block_log(data);
}

}  // namespace veryfl::ledger
