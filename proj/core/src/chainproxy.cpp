#include "veryfl/chainproxy.hpp"

#include <algorithm>
#include <set>

#include "veryfl/errors.hpp"

namespace veryfl::chainproxy {
namespace {

class MutationGuard {
 public:
  explicit MutationGuard(std::mutex& m) : lock_(m, std::try_to_lock) {
    if (!lock_.owns_lock()) throw Error(ErrorCode::kConcurrentMutation, "bridge session already in use");
  }

 private:
  std::unique_lock<std::mutex> lock_;
};

}  // namespace

BridgeSession::BridgeSession(std::unique_ptr<ledger::Ledger> ledger)
    : ledger_(std::move(ledger)), busy_(std::make_unique<std::mutex>()) {}

BridgeSession BridgeSession::open(std::uint64_t chain_seed, const ContractConfig& config) {
  BridgeSession s(std::make_unique<ledger::Ledger>(chain_seed, std::make_unique<contracts::ContractSet>(),
                                                   config.account_count));
  s.submit(s.ledger_->server(), contracts::kSystem, "deploy", contracts::payload::deploy(config.watermark_bits));
  s.seal_checked("deploy");
  return s;
}

BridgeSession BridgeSession::resume(const ledger::BlockLog& log) {
  auto replayed = ledger::Ledger::replay(log.blocks, log.chain_seed, log.account_count,
                                         std::make_unique<contracts::ContractSet>());
  BridgeSession s(std::make_unique<ledger::Ledger>(std::move(replayed)));
  const auto& c = s.contracts();
  if (!c.deployed()) throw Error(ErrorCode::kNotDeployed, "block log has no deployment");
  for (const auto& rec : c.clients()) s.bindings_.emplace(rec.client_id, rec.address);
  while (c.settlement(s.round_tag_ + 1)) ++s.round_tag_;
  return s;
}

const Address& BridgeSession::address_of(const std::string& client_id) const {
  auto it = bindings_.find(client_id);
  if (it == bindings_.end()) throw Error(ErrorCode::kUnboundClient, client_id);
  return it->second;
}

std::string BridgeSession::client_of(const Address& a) const {
  for (const auto& [id, addr] : bindings_) {
    if (addr == a) return id;
  }
  return {};
}

void BridgeSession::submit(const Address& sender, std::string_view contract, std::string_view method,
                           Bytes payload) {
  ledger::Transaction tx;
  tx.nonce = ledger_->next_nonce(sender);
  tx.sender = sender;
  tx.contract = std::string(contract);
  tx.method = std::string(method);
  tx.payload = std::move(payload);
  tx.round_tag = round_tag_;
  ledger_->submit(std::move(tx));
}

const ledger::Block& BridgeSession::seal_checked(const std::string& what) {
  const ledger::Block& b = ledger_->seal();
  for (std::size_t i = 0; i < b.txs.size(); ++i) {
    const auto& r = b.txs[i].receipt;
    if (!r.ok) {
      throw Error(r.error, what + ": " + b.txs[i].tx.contract + "." + b.txs[i].tx.method + " rejected in block " +
                               std::to_string(b.index));
    }
  }
  return b;
}

std::map<std::string, Address> BridgeSession::bind_clients(std::span<const std::string> client_ids) {
  MutationGuard guard(*busy_);
  const std::size_t available = ledger_->accounts().size() - 1 - bindings_.size();
  if (client_ids.size() > available) {
    throw Error(ErrorCode::kTooManyClients, std::to_string(client_ids.size()) + " clients, " +
                                                std::to_string(available) + " free accounts");
  }
  std::set<std::string> seen;
  for (const auto& id : client_ids) {
    if (id.empty()) throw Error(ErrorCode::kInvalidArgument, "empty client id");
    if (!seen.insert(id).second || bindings_.contains(id)) throw Error(ErrorCode::kDuplicateClient, id);
  }

  std::map<std::string, Address> added;
  std::size_t next_account = 1 + bindings_.size();
  for (const auto& id : client_ids) {
    const Address& addr = ledger_->accounts()[next_account++];
    submit(addr, contracts::kRegistry, "register_client", contracts::payload::register_client(id));
    added.emplace(id, addr);
  }
  const bool first_bind = !contracts().election(1).has_value();
  if (first_bind) {
    submit(ledger_->server(), contracts::kElection, "elect_aggregator", contracts::payload::elect_aggregator(1));
  }
  seal_checked("bind_clients");
  bindings_.insert(added.begin(), added.end());
  return added;
}

RoundOutcome BridgeSession::submit_round(std::uint64_t round, std::span<const ClientRoundMetrics> metrics,
                                         std::uint64_t budget) {
  MutationGuard guard(*busy_);
  if (round != round_tag_ + 1) {
    throw Error(ErrorCode::kOutOfOrderRound,
                "expected round " + std::to_string(round_tag_ + 1) + ", got " + std::to_string(round));
  }
  std::vector<const ClientRoundMetrics*> ordered;
  ordered.reserve(metrics.size());
  for (const auto& m : metrics) {
    if (!bindings_.contains(m.client_id)) throw Error(ErrorCode::kUnboundClient, m.client_id);
    ordered.push_back(&m);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const auto* a, const auto* b) { return a->client_id < b->client_id; });

  const std::uint64_t saved_tag = round_tag_;
  round_tag_ = round;
  try {
    for (const auto* m : ordered) {
      submit(bindings_.at(m->client_id), contracts::kTraining, "record_training",
             contracts::payload::record_training(round, m->accuracy, m->loss, m->dataset_size));
    }
    submit(ledger_->server(), contracts::kIncentive, "distribute_incentives",
           contracts::payload::distribute_incentives(round, budget));
    submit(ledger_->server(), contracts::kElection, "elect_aggregator",
           contracts::payload::elect_aggregator(round + 1));
    const auto& block = seal_checked("round " + std::to_string(round));

    RoundOutcome out;
    out.next_election = *contracts().election(round + 1);
    out.rewards = contracts().settlement(round)->rewards;
    out.block_hash = block.block_hash;
    return out;
  } catch (...) {
    round_tag_ = saved_tag;
    throw;
  }
}

FinalizeOutcome BridgeSession::finalize_model(const std::string& model_id, const std::string& owner_client_id,
                                              const Embedder& embed) {
  MutationGuard guard(*busy_);
  const Address owner = address_of(owner_client_id);
  if (contracts().watermark_spec(model_id)) throw Error(ErrorCode::kDuplicateModelId, model_id);

  // Issuance executes in the next block, whose prev_hash is the current tip.
  contracts::WatermarkSpec preview;
  preview.model_id = model_id;
  preview.bits = contracts::derive_watermark_bits(model_id, ledger_->tip().block_hash, contracts().watermark_bits());
  preview.key_seed = contracts::derive_key_seed(model_id, ledger_->tip().block_hash);
  preview.issued_at = ledger_->height();

  watermark::WatermarkBits extracted = embed(preview);
  const Digest commitment = watermark::commitment(extracted, preview.key_seed);

  submit(ledger_->server(), contracts::kModelToken, "issue_watermark", contracts::payload::issue_watermark(model_id));
  submit(owner, contracts::kModelToken, "mint_model_token", contracts::payload::mint_model_token(model_id, commitment));
  const auto& block = seal_checked("finalize " + model_id);

  FinalizeOutcome out;
  out.spec = *contracts().watermark_spec(model_id);
  for (const auto& t : contracts().tokens()) {
    if (t.model_id == model_id) out.token = t;
  }
  out.extracted = std::move(extracted);
  out.block_hash = block.block_hash;
  return out;
}

contracts::ModelToken BridgeSession::transfer_token(std::uint64_t token_id, const std::string& from_client_id,
                                                    const std::string& to_client_id) {
  MutationGuard guard(*busy_);
  const Address from = address_of(from_client_id);
  const Address to = address_of(to_client_id);
  submit(from, contracts::kModelToken, "transfer_token", contracts::payload::transfer_token(token_id, to));
  seal_checked("transfer token " + std::to_string(token_id));
  return *contracts().token(token_id);
}

}  // namespace veryfl::chainproxy
