#pragma once

// Bridge between the FL engine and the ledger. The session owns the ledger,
// signs every contract call with the right account, tracks the round tag and
// seals exactly one block per bridge operation.
//
// The session is the serialization point: mutating calls must not overlap.
// An overlapping call throws ConcurrentMutation instead of blocking.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "veryfl/contracts.hpp"
#include "veryfl/ledger.hpp"
#include "veryfl/watermark.hpp"

namespace veryfl::chainproxy {

struct ContractConfig {
  std::uint64_t watermark_bits = 32;
  std::size_t account_count = ledger::Ledger::kDefaultAccounts;
};

struct ClientRoundMetrics {
  std::string client_id;
  std::uint64_t accuracy = 0;  // micro-units
  std::uint64_t loss = 0;      // micro-units
  std::uint64_t dataset_size = 0;
};

struct RoundOutcome {
  contracts::ElectionResult next_election;
  std::map<Address, std::uint64_t> rewards;
  Digest block_hash{};
};

struct FinalizeOutcome {
  contracts::ModelToken token;
  contracts::WatermarkSpec spec;
  watermark::WatermarkBits extracted;
  Digest block_hash{};
};

// Receives the watermark that will be issued on chain and returns the bits
// extracted from the model after embedding it.
using Embedder = std::function<watermark::WatermarkBits(const contracts::WatermarkSpec&)>;

class BridgeSession {
 public:
  // Initialises the chain, deploys the contracts from accounts[0] and seals
  // the setup block (height 2 afterwards).
  static BridgeSession open(std::uint64_t chain_seed, const ContractConfig& config = {});

  // Rebuilds a session from a block log; bindings and the round tag are
  // recovered from contract state.
  static BridgeSession resume(const ledger::BlockLog& log);

  // Client i (in list order, after any existing bindings) is bound to
  // accounts[i + 1]; registrations and the round-1 election are sealed in
  // one block. Throws TooManyClients / DuplicateClient.
  std::map<std::string, Address> bind_clients(std::span<const std::string> client_ids);

  // Records every client's metrics (ascending client_id), settles `budget`
  // for the round and elects the aggregator of round + 1, all in one block.
  // Throws OutOfOrderRound unless round == current_round() + 1.
  RoundOutcome submit_round(std::uint64_t round, std::span<const ClientRoundMetrics> metrics,
                            std::uint64_t budget);

  // Issues the watermark for `model_id`, runs `embed`, commits to the
  // extracted bits and mints the token to the owner; one block.
  FinalizeOutcome finalize_model(const std::string& model_id, const std::string& owner_client_id,
                                 const Embedder& embed);

  // Transfers a token between two bound clients; one block.
  contracts::ModelToken transfer_token(std::uint64_t token_id, const std::string& from_client_id,
                                       const std::string& to_client_id);

  const ledger::Ledger& ledger() const { return *ledger_; }
  const contracts::ContractSet& contracts() const { return contracts::contracts_of(*ledger_); }
  const std::map<std::string, Address>& bindings() const { return bindings_; }
  const Address& address_of(const std::string& client_id) const;
  // Reverse lookup; empty string when the address is not bound.
  std::string client_of(const Address& a) const;
  std::uint64_t current_round() const { return round_tag_; }

 private:
  explicit BridgeSession(std::unique_ptr<ledger::Ledger> ledger);

  void submit(const Address& sender, std::string_view contract, std::string_view method, Bytes payload);
  // Seals and throws the first failed receipt's error, if any.
  const ledger::Block& seal_checked(const std::string& what);

  std::unique_ptr<ledger::Ledger> ledger_;
  std::map<std::string, Address> bindings_;
  std::uint64_t round_tag_ = 0;
  std::unique_ptr<std::mutex> busy_;
};

}  // namespace veryfl::chainproxy
