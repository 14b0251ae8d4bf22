#pragma once

// Native contract state machines executed by the ledger: client registry,
// per-round training records, aggregator election, incentive settlement and
// the watermark / model-token registry.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "veryfl/bytes.hpp"
#include "veryfl/ledger.hpp"

namespace veryfl::contracts {

inline constexpr std::string_view kSystem = "system";
inline constexpr std::string_view kRegistry = "registry";
inline constexpr std::string_view kTraining = "training";
inline constexpr std::string_view kElection = "election";
inline constexpr std::string_view kIncentive = "incentive";
inline constexpr std::string_view kModelToken = "model_token";

// Metrics on chain are micro-units.
inline constexpr std::uint64_t kMicro = 1'000'000;

using ledger::ExecContext;
using SignBits = std::vector<std::int8_t>;  // each entry +1 or -1

struct ClientRecord {
  Address address;
  std::string client_id;
  std::uint64_t registered_at = 0;

  bool operator==(const ClientRecord&) const = default;
};

struct RoundRecord {
  std::uint64_t round = 0;
  Address client;
  std::uint64_t accuracy = 0;  // micro-units, <= 1e6
  std::uint64_t loss = 0;      // micro-units
  std::uint64_t dataset_size = 0;

  bool operator==(const RoundRecord&) const = default;
};

struct ElectionResult {
  std::uint64_t round = 0;
  Address aggregator;
  Digest seed_digest{};
  std::uint64_t elected_at = 0;  // block index

  bool operator==(const ElectionResult&) const = default;
};

struct Settlement {
  std::uint64_t budget = 0;
  std::map<Address, std::uint64_t> rewards;

  bool operator==(const Settlement&) const = default;
};

struct WatermarkSpec {
  std::string model_id;
  SignBits bits;
  std::uint64_t key_seed = 0;
  std::uint64_t issued_at = 0;

  bool operator==(const WatermarkSpec&) const = default;
};

struct TokenTransfer {
  Address from;
  Address to;
  std::uint64_t height = 0;

  bool operator==(const TokenTransfer&) const = default;
};

struct ModelToken {
  std::uint64_t token_id = 0;
  Address owner;
  std::string model_id;
  Digest commitment{};
  std::vector<TokenTransfer> history;

  bool operator==(const ModelToken&) const = default;
};

// ---- method catalog -------------------------------------------------------

enum class ArgType { kU64, kString, kDigest, kAddress };

struct ArgSpec {
  std::string_view name;
  ArgType type;
};

enum class Signer { kServer, kClient };

struct MethodSpec {
  std::string_view contract;
  std::string_view method;
  std::vector<ArgSpec> args;
  Signer signer;
  std::vector<ErrorCode> errors;
};

const std::vector<MethodSpec>& method_catalog();
const MethodSpec* find_method(std::string_view contract, std::string_view method);
// JSON rendering of the catalog; the checked-in manifest file is this output.
std::string manifest_json();

// Payload builders, one per catalog entry.
namespace payload {
Bytes deploy(std::uint64_t watermark_bits);
Bytes register_client(std::string_view client_id);
Bytes record_training(std::uint64_t round, std::uint64_t accuracy, std::uint64_t loss,
                      std::uint64_t dataset_size);
Bytes elect_aggregator(std::uint64_t round);
Bytes distribute_incentives(std::uint64_t round, std::uint64_t budget);
Bytes issue_watermark(std::string_view model_id);
Bytes mint_model_token(std::string_view model_id, const Digest& commitment);
Bytes transfer_token(std::uint64_t token_id, const Address& to);
}  // namespace payload

// ---- pure rules ------------------------------------------------------------

// SHA-256(prev_hash || u64be(round)).
Digest election_seed(const Digest& prev_hash, std::uint64_t round);

// Index i chosen with probability weights[i] / sum(weights). Draws are the
// first 8 bytes (big-endian) of SHA-256(seed || u64be(j)) for j = 0, 1, ...,
// rejected while >= 2^64 - (2^64 mod total) and reduced modulo total.
// Requires a positive total weight.
std::size_t weighted_draw(const Digest& seed, std::span<const std::uint64_t> weights);

// Exact proportional split of `budget` by `sizes` with largest-remainder
// rounding; equal remainders go to the lower position. Sum equals budget.
std::vector<std::uint64_t> largest_remainder(std::uint64_t budget,
                                             std::span<const std::uint64_t> sizes);

// bit i = +1 iff bit (i mod 256), MSB first, of
// SHA-256(model_id || prev_hash || "bits" || u64be(i / 256)) is set.
SignBits derive_watermark_bits(std::string_view model_id, const Digest& prev_hash,
                               std::size_t k);
// First 8 bytes (big-endian) of SHA-256(model_id || prev_hash || "seed").
std::uint64_t derive_key_seed(std::string_view model_id, const Digest& prev_hash);

// SHA-256 over one byte per bit (0x01 for +1, 0x00 for -1) then u64be(seed).
Digest ownership_commitment(std::span<const std::int8_t> bits, std::uint64_t key_seed);

// ---- contract host ----------------------------------------------------------

class ContractSet final : public ledger::ContractHost {
 public:
  ContractSet() = default;

  // ContractHost
  void check_schema(std::string_view contract, std::string_view method,
                    ByteView payload) const override;
  void apply(const ledger::Transaction& tx, const ExecContext& ctx) override;
  std::map<std::string, Bytes, std::less<>> states() const override;
  std::unique_ptr<ledger::ContractHost> fresh() const override;

  // Typed operations. Each either succeeds or throws veryfl::Error leaving
  // state unchanged. The sender in `ctx` is the caller's address.
  void deploy(const ExecContext& ctx, std::uint64_t watermark_bits);
  ClientRecord register_client(const ExecContext& ctx, std::string_view client_id);
  RoundRecord record_training(const ExecContext& ctx, std::uint64_t round, std::uint64_t accuracy,
                              std::uint64_t loss, std::uint64_t dataset_size);
  ElectionResult elect_aggregator(const ExecContext& ctx, std::uint64_t round);
  std::map<Address, std::uint64_t> distribute_incentives(const ExecContext& ctx, std::uint64_t round,
                                                         std::uint64_t budget);
  WatermarkSpec issue_watermark(const ExecContext& ctx, std::string_view model_id);
  ModelToken mint_model_token(const ExecContext& ctx, std::string_view model_id,
                              const Digest& commitment);
  ModelToken transfer_token(const ExecContext& ctx, std::uint64_t token_id, const Address& to);

  // Queries.
  bool deployed() const { return state_.has_value(); }
  std::uint64_t watermark_bits() const;
  const ClientRecord* client(const Address& a) const;
  const ClientRecord* client_by_id(std::string_view client_id) const;
  // Ascending client_id.
  std::vector<ClientRecord> clients() const;
  std::vector<RoundRecord> records_for_round(std::uint64_t round) const;
  std::vector<RoundRecord> records_for_client(const Address& a) const;
  std::size_t record_count() const;
  std::optional<ElectionResult> election(std::uint64_t round) const;
  std::vector<ElectionResult> elections() const;
  // Candidates (ascending client_id) and their weights for electing `round`.
  std::vector<std::pair<Address, std::uint64_t>> election_weights(std::uint64_t round) const;
  std::uint64_t balance(const Address& a) const;
  std::map<Address, std::uint64_t> balances() const;
  std::uint64_t total_minted() const;
  std::optional<Settlement> settlement(std::uint64_t round) const;
  std::optional<WatermarkSpec> watermark_spec(std::string_view model_id) const;
  std::optional<ModelToken> token(std::uint64_t token_id) const;
  std::vector<ModelToken> tokens() const;
  // Pure read. Throws UnknownToken.
  bool verify_ownership(std::uint64_t token_id, std::span<const std::int8_t> claimed_bits,
                        std::uint64_t claimed_seed) const;

  // Canonical bytes of a single contract state. Throws NotFound when undeployed.
  Bytes contract_state(std::string_view contract) const;

 private:
  struct State {
    std::uint64_t watermark_bits = 0;
    std::map<Address, ClientRecord> clients;
    std::map<std::string, Address, std::less<>> client_ids;
    std::map<std::pair<std::uint64_t, Address>, RoundRecord> records;
    std::map<std::uint64_t, ElectionResult> elections;
    std::map<Address, std::uint64_t> balances;
    std::uint64_t total_minted = 0;
    std::map<std::uint64_t, Settlement> settlements;
    std::map<std::string, WatermarkSpec, std::less<>> specs;
    std::map<std::uint64_t, ModelToken> tokens;
    std::map<std::string, std::uint64_t, std::less<>> token_by_model;
    std::uint64_t next_token_id = 1;
  };

  const State& live() const;
  // Runs `fn` against a copy of the state and commits it only on success.
  template <typename Fn>
  auto transact(Fn&& fn);

  static Bytes encode_registry(const State& s);
  static Bytes encode_training(const State& s);
  static Bytes encode_election(const State& s);
  static Bytes encode_incentive(const State& s);
  static Bytes encode_model_token(const State& s);

  std::optional<State> state_;
};

// Typed view of the ContractSet behind a ledger. Throws if the ledger was
// built with a different host.
const ContractSet& contracts_of(const ledger::Ledger& ledger);

}  // namespace veryfl::contracts
