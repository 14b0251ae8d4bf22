#include "veryfl/contracts.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "veryfl/sha256.hpp"

namespace veryfl::contracts {
namespace {

constexpr std::uint64_t kMaxWatermarkBits = 1u << 16;

using E = ErrorCode;

[[noreturn]] void fail(ErrorCode code, const std::string& detail = {}) { throw Error(code, detail); }

std::uint64_t be64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | p[i];
  return v;
}

void require_server(const ExecContext& ctx) {
  if (ctx.sender != ctx.server) fail(E::kNotServerAccount, to_hex(ctx.sender));
}

Bytes encode_bits(std::span<const std::int8_t> bits) {
  Bytes out;
  out.reserve(bits.size());
  for (auto b : bits) out.push_back(b > 0 ? 0x01 : 0x00);
  return out;
}

const char* arg_type_name(ArgType t) {
  switch (t) {
    case ArgType::kU64: return "u64";
    case ArgType::kString: return "string";
    case ArgType::kDigest: return "digest32";
    case ArgType::kAddress: return "address32";
  }
  return "?";
}

void skip_arg(Decoder& dec, ArgType t) {
  switch (t) {
    case ArgType::kU64: dec.u64(); break;
    case ArgType::kString: dec.str(); break;
    case ArgType::kDigest:
    case ArgType::kAddress: dec.digest(); break;
  }
}

}  // namespace

// ---- catalog -----------------------------------------------------------------

const std::vector<MethodSpec>& method_catalog() {
  static const std::vector<MethodSpec> catalog = {
      {kSystem, "deploy", {{"watermark_bits", ArgType::kU64}}, Signer::kServer,
       {E::kNotServerAccount, E::kAlreadyDeployed, E::kBadDimensions}},
      {kRegistry, "register_client", {{"client_id", ArgType::kString}}, Signer::kClient,
       {E::kNotDeployed, E::kDuplicateAddress, E::kDuplicateClientId, E::kInvalidArgument}},
      {kTraining, "record_training",
       {{"round", ArgType::kU64}, {"accuracy", ArgType::kU64}, {"loss", ArgType::kU64},
        {"dataset_size", ArgType::kU64}},
       Signer::kClient,
       {E::kNotDeployed, E::kUnregisteredClient, E::kDuplicateRecord, E::kInvalidMetric}},
      {kElection, "elect_aggregator", {{"round", ArgType::kU64}}, Signer::kServer,
       {E::kNotDeployed, E::kNotServerAccount, E::kInvalidArgument, E::kNoRegisteredClients,
        E::kAlreadyElected, E::kRoundNotRecorded}},
      {kIncentive, "distribute_incentives", {{"round", ArgType::kU64}, {"budget", ArgType::kU64}},
       Signer::kServer,
       {E::kNotDeployed, E::kNotServerAccount, E::kInvalidArgument, E::kRoundNotRecorded,
        E::kAlreadySettled}},
      {kModelToken, "issue_watermark", {{"model_id", ArgType::kString}}, Signer::kServer,
       {E::kNotDeployed, E::kNotServerAccount, E::kInvalidArgument, E::kDuplicateModelId}},
      {kModelToken, "mint_model_token",
       {{"model_id", ArgType::kString}, {"commitment", ArgType::kDigest}}, Signer::kClient,
       {E::kNotDeployed, E::kUnregisteredOwner, E::kNoWatermarkIssued, E::kAlreadyTokenized,
        E::kCommitmentMismatch}},
      {kModelToken, "transfer_token", {{"token_id", ArgType::kU64}, {"to", ArgType::kAddress}},
       Signer::kClient,
       {E::kNotDeployed, E::kUnknownToken, E::kNotOwner, E::kUnregisteredRecipient}},
  };
  return catalog;
}

const MethodSpec* find_method(std::string_view contract, std::string_view method) {
  for (const auto& m : method_catalog()) {
    if (m.contract == contract && m.method == method) return &m;
  }
  return nullptr;
}

std::string manifest_json() {
  nlohmann::ordered_json methods = nlohmann::ordered_json::array();
  for (const auto& m : method_catalog()) {
    nlohmann::ordered_json args = nlohmann::ordered_json::array();
    for (const auto& a : m.args) {
      args.push_back({{"name", a.name}, {"type", arg_type_name(a.type)}});
    }
    nlohmann::ordered_json errors = nlohmann::ordered_json::array();
    for (auto e : m.errors) errors.push_back(to_string(e));
    methods.push_back({{"contract", m.contract},
                       {"method", m.method},
                       {"signer", m.signer == Signer::kServer ? "server" : "client"},
                       {"args", args},
                       {"errors", errors}});
  }
  nlohmann::ordered_json doc = {{"encoding", "big-endian u64; u32 length-prefixed strings; raw 32-byte digests"},
                                {"methods", methods}};
  return doc.dump(2) + "\n";
}

namespace payload {
Bytes deploy(std::uint64_t watermark_bits) { return Encoder{}.u64(watermark_bits).buffer(); }
Bytes register_client(std::string_view client_id) { return Encoder{}.str(client_id).buffer(); }
Bytes record_training(std::uint64_t round, std::uint64_t accuracy, std::uint64_t loss,
                      std::uint64_t dataset_size) {
  return Encoder{}.u64(round).u64(accuracy).u64(loss).u64(dataset_size).buffer();
}
Bytes elect_aggregator(std::uint64_t round) { return Encoder{}.u64(round).buffer(); }
Bytes distribute_incentives(std::uint64_t round, std::uint64_t budget) {
  return Encoder{}.u64(round).u64(budget).buffer();
}
Bytes issue_watermark(std::string_view model_id) { return Encoder{}.str(model_id).buffer(); }
Bytes mint_model_token(std::string_view model_id, const Digest& commitment) {
  return Encoder{}.str(model_id).digest(commitment).buffer();
}
Bytes transfer_token(std::uint64_t token_id, const Address& to) {
  return Encoder{}.u64(token_id).address(to).buffer();
}
}  // namespace payload

// ---- pure rules ----------------------------------------------------------------

Digest election_seed(const Digest& prev_hash, std::uint64_t round) {
  return sha256(Encoder{}.digest(prev_hash).u64(round).buffer());
}

std::size_t weighted_draw(const Digest& seed, std::span<const std::uint64_t> weights) {
  std::uint64_t total = 0;
  for (auto w : weights) {
    if (w > std::numeric_limits<std::uint64_t>::max() - total) fail(E::kInvalidArgument, "weight overflow");
    total += w;
  }
  if (total == 0) fail(E::kInvalidArgument, "total weight is zero");

  // 2^64 mod total, computed without 128-bit arithmetic.
  const std::uint64_t excess = (0 - total) % total;
  std::uint64_t value = 0;
  for (std::uint64_t j = 0;; ++j) {
    const Digest h = sha256(Encoder{}.digest(seed).u64(j).buffer());
    const std::uint64_t draw = be64(h.data());
    if (excess == 0 || draw <= std::numeric_limits<std::uint64_t>::max() - excess) {
      value = draw % total;
      break;
    }
  }
  std::uint64_t cumulative = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    cumulative += weights[i];
    if (value < cumulative) return i;
  }
  return weights.size() - 1;  // unreachable
}

std::vector<std::uint64_t> largest_remainder(std::uint64_t budget,
                                             std::span<const std::uint64_t> sizes) {
  __extension__ using u128 = unsigned __int128;
  u128 total = 0;
  for (auto s : sizes) total += s;
  if (total == 0) fail(E::kInvalidArgument, "dataset sizes sum to zero");

  std::vector<std::uint64_t> shares(sizes.size());
  std::vector<u128> remainders(sizes.size());
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    const u128 scaled = static_cast<u128>(budget) * sizes[i];
    shares[i] = static_cast<std::uint64_t>(scaled / total);
    remainders[i] = scaled % total;
    assigned += shares[i];
  }
  std::vector<std::size_t> order(sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainders[a] > remainders[b]; });
  // Leftover is strictly less than the number of participants.
  for (std::uint64_t k = 0; k < budget - assigned; ++k) ++shares[order[k]];
  return shares;
}

SignBits derive_watermark_bits(std::string_view model_id, const Digest& prev_hash, std::size_t k) {
  SignBits bits(k);
  Digest chunk{};
  for (std::size_t i = 0; i < k; ++i) {
    if (i % 256 == 0) {
      chunk = Sha256{}
                  .update(model_id)
                  .update(prev_hash)
                  .update(std::string_view{"bits"})
                  .update(Encoder{}.u64(i / 256).buffer())
                  .finish();
    }
    const std::size_t bit = i % 256;
    const bool set = (chunk[bit / 8] >> (7 - bit % 8)) & 1u;
    bits[i] = set ? 1 : -1;
  }
  return bits;
}

std::uint64_t derive_key_seed(std::string_view model_id, const Digest& prev_hash) {
  const Digest h = Sha256{}.update(model_id).update(prev_hash).update(std::string_view{"seed"}).finish();
  return be64(h.data());
}

Digest ownership_commitment(std::span<const std::int8_t> bits, std::uint64_t key_seed) {
  return Sha256{}.update(encode_bits(bits)).update(Encoder{}.u64(key_seed).buffer()).finish();
}

// ---- host plumbing ---------------------------------------------------------------

void ContractSet::check_schema(std::string_view contract, std::string_view method,
                               ByteView bytes) const {
  const MethodSpec* spec = find_method(contract, method);
  if (spec == nullptr) {
    throw Error(E::kSchemaViolation, "unknown method " + std::string(contract) + "." + std::string(method));
  }
  try {
    Decoder dec(bytes);
    for (const auto& a : spec->args) skip_arg(dec, a.type);
    dec.expect_done();
  } catch (const Error& e) {
    throw Error(E::kSchemaViolation, std::string(method) + ": " + e.what());
  }
}

void ContractSet::apply(const ledger::Transaction& tx, const ExecContext& ctx) {
  check_schema(tx.contract, tx.method, tx.payload);
  Decoder dec(tx.payload);
  const std::string_view m = tx.method;
  if (m == "deploy") {
    deploy(ctx, dec.u64());
  } else if (m == "register_client") {
    register_client(ctx, dec.str());
  } else if (m == "record_training") {
    const auto round = dec.u64();
    const auto acc = dec.u64();
    const auto loss = dec.u64();
    const auto size = dec.u64();
    record_training(ctx, round, acc, loss, size);
  } else if (m == "elect_aggregator") {
    elect_aggregator(ctx, dec.u64());
  } else if (m == "distribute_incentives") {
    const auto round = dec.u64();
    const auto budget = dec.u64();
    distribute_incentives(ctx, round, budget);
  } else if (m == "issue_watermark") {
    issue_watermark(ctx, dec.str());
  } else if (m == "mint_model_token") {
    const auto model_id = dec.str();
    const auto commitment = dec.digest();
    mint_model_token(ctx, model_id, commitment);
  } else if (m == "transfer_token") {
    const auto token_id = dec.u64();
    const auto to = dec.address();
    transfer_token(ctx, token_id, to);
  }
}

std::unique_ptr<ledger::ContractHost> ContractSet::fresh() const { return std::make_unique<ContractSet>(); }

std::map<std::string, Bytes, std::less<>> ContractSet::states() const {
  std::map<std::string, Bytes, std::less<>> out;
  if (!state_) return out;
  out.emplace(kRegistry, encode_registry(*state_));
  out.emplace(kTraining, encode_training(*state_));
  out.emplace(kElection, encode_election(*state_));
  out.emplace(kIncentive, encode_incentive(*state_));
  out.emplace(kModelToken, encode_model_token(*state_));
  return out;
}

Bytes ContractSet::contract_state(std::string_view contract) const {
  if (!state_) throw Error(E::kNotFound, "contracts not deployed");
  if (contract == kRegistry) return encode_registry(*state_);
  if (contract == kTraining) return encode_training(*state_);
  if (contract == kElection) return encode_election(*state_);
  if (contract == kIncentive) return encode_incentive(*state_);
  if (contract == kModelToken) return encode_model_token(*state_);
  throw Error(E::kNotFound, "contract " + std::string(contract));
}

const ContractSet::State& ContractSet::live() const {
  if (!state_) fail(E::kNotDeployed);
  return *state_;
}

template <typename Fn>
auto ContractSet::transact(Fn&& fn) {
  State draft = live();
  auto result = fn(draft);
  state_ = std::move(draft);
  return result;
}

// ---- canonical encodings -----------------------------------------------------------

Bytes ContractSet::encode_registry(const State& s) {
  Encoder enc;
  enc.u32(static_cast<std::uint32_t>(s.clients.size()));
  for (const auto& [addr, rec] : s.clients) enc.address(addr).str(rec.client_id).u64(rec.registered_at);
  return std::move(enc).take();
}

Bytes ContractSet::encode_training(const State& s) {
  Encoder enc;
  enc.u32(static_cast<std::uint32_t>(s.records.size()));
  for (const auto& [key, r] : s.records) {
    enc.u64(r.round).address(r.client).u64(r.accuracy).u64(r.loss).u64(r.dataset_size);
  }
  return std::move(enc).take();
}

Bytes ContractSet::encode_election(const State& s) {
  Encoder enc;
  enc.u32(static_cast<std::uint32_t>(s.elections.size()));
  for (const auto& [round, e] : s.elections) {
    enc.u64(e.round).address(e.aggregator).digest(e.seed_digest).u64(e.elected_at);
  }
  return std::move(enc).take();
}

Bytes ContractSet::encode_incentive(const State& s) {
  Encoder enc;
  enc.u64(s.total_minted).u32(static_cast<std::uint32_t>(s.balances.size()));
  for (const auto& [addr, bal] : s.balances) enc.address(addr).u64(bal);
  enc.u32(static_cast<std::uint32_t>(s.settlements.size()));
  for (const auto& [round, st] : s.settlements) {
    enc.u64(round).u64(st.budget).u32(static_cast<std::uint32_t>(st.rewards.size()));
    for (const auto& [addr, r] : st.rewards) enc.address(addr).u64(r);
  }
  return std::move(enc).take();
}

Bytes ContractSet::encode_model_token(const State& s) {
  Encoder enc;
  enc.u64(s.watermark_bits).u64(s.next_token_id).u32(static_cast<std::uint32_t>(s.specs.size()));
  for (const auto& [id, spec] : s.specs) {
    enc.str(spec.model_id).bytes(encode_bits(spec.bits)).u64(spec.key_seed).u64(spec.issued_at);
  }
  enc.u32(static_cast<std::uint32_t>(s.tokens.size()));
  for (const auto& [id, t] : s.tokens) {
    enc.u64(t.token_id).address(t.owner).str(t.model_id).digest(t.commitment);
    enc.u32(static_cast<std::uint32_t>(t.history.size()));
    for (const auto& h : t.history) enc.address(h.from).address(h.to).u64(h.height);
  }
  return std::move(enc).take();
}

// ---- operations ------------------------------------------------------------------

void ContractSet::deploy(const ExecContext& ctx, std::uint64_t watermark_bits) {
  require_server(ctx);
  if (state_) fail(E::kAlreadyDeployed);
  if (watermark_bits == 0 || watermark_bits > kMaxWatermarkBits) {
    fail(E::kBadDimensions, "watermark bit length " + std::to_string(watermark_bits));
  }
  State s;
  s.watermark_bits = watermark_bits;
  state_ = std::move(s);
}

ClientRecord ContractSet::register_client(const ExecContext& ctx, std::string_view client_id) {
  return transact([&](State& s) {
    if (client_id.empty()) fail(E::kInvalidArgument, "empty client_id");
    if (s.clients.contains(ctx.sender)) fail(E::kDuplicateAddress, to_hex(ctx.sender));
    if (s.client_ids.contains(client_id)) fail(E::kDuplicateClientId, std::string(client_id));
    ClientRecord rec{ctx.sender, std::string(client_id), ctx.height};
    s.clients.emplace(ctx.sender, rec);
    s.client_ids.emplace(std::string(client_id), ctx.sender);
    return rec;
  });
}

RoundRecord ContractSet::record_training(const ExecContext& ctx, std::uint64_t round,
                                         std::uint64_t accuracy, std::uint64_t loss,
                                         std::uint64_t dataset_size) {
  return transact([&](State& s) {
    if (!s.clients.contains(ctx.sender)) fail(E::kUnregisteredClient, to_hex(ctx.sender));
    if (s.records.contains({round, ctx.sender})) fail(E::kDuplicateRecord, "round " + std::to_string(round));
    if (round == 0 || accuracy > kMicro || dataset_size == 0) fail(E::kInvalidMetric);
    RoundRecord rec{round, ctx.sender, accuracy, loss, dataset_size};
    s.records.emplace(std::pair{round, ctx.sender}, rec);
    return rec;
  });
}

std::vector<std::pair<Address, std::uint64_t>> ContractSet::election_weights(std::uint64_t round) const {
  const State& s = live();
  std::vector<std::pair<Address, std::uint64_t>> out;
  out.reserve(s.client_ids.size());
  for (const auto& [id, addr] : s.client_ids) {
    std::uint64_t w = 1;
    if (round > 1) {
      auto it = s.records.find({round - 1, addr});
      w = it == s.records.end() ? 0 : it->second.dataset_size;
    }
    out.emplace_back(addr, w);
  }
  return out;
}

ElectionResult ContractSet::elect_aggregator(const ExecContext& ctx, std::uint64_t round) {
  return transact([&](State& s) {
    require_server(ctx);
    if (round == 0) fail(E::kInvalidArgument, "round must be positive");
    if (s.elections.contains(round)) fail(E::kAlreadyElected, "round " + std::to_string(round));
    if (s.clients.empty()) fail(E::kNoRegisteredClients);
    const auto candidates = election_weights(round);
    std::vector<std::uint64_t> weights;
    weights.reserve(candidates.size());
    for (const auto& [addr, w] : candidates) weights.push_back(w);
    if (std::all_of(weights.begin(), weights.end(), [](auto w) { return w == 0; })) {
      fail(E::kRoundNotRecorded, "no records for round " + std::to_string(round - 1));
    }
    ElectionResult res;
    res.round = round;
    res.seed_digest = election_seed(ctx.prev_hash, round);
    res.aggregator = candidates[weighted_draw(res.seed_digest, weights)].first;
    res.elected_at = ctx.height;
    s.elections.emplace(round, res);
    return res;
  });
}

std::map<Address, std::uint64_t> ContractSet::distribute_incentives(const ExecContext& ctx,
                                                                    std::uint64_t round,
                                                                    std::uint64_t budget) {
  return transact([&](State& s) {
    require_server(ctx);
    if (budget == 0) fail(E::kInvalidArgument, "budget must be positive");
    if (s.settlements.contains(round)) fail(E::kAlreadySettled, "round " + std::to_string(round));
    // Participants ordered by ascending client_id for the tie-break.
    std::vector<Address> participants;
    std::vector<std::uint64_t> sizes;
    for (const auto& [id, addr] : s.client_ids) {
      auto it = s.records.find({round, addr});
      if (it == s.records.end()) continue;
      participants.push_back(addr);
      sizes.push_back(it->second.dataset_size);
    }
    if (participants.empty()) fail(E::kRoundNotRecorded, "round " + std::to_string(round));
    const auto shares = largest_remainder(budget, sizes);
    Settlement st{budget, {}};
    for (std::size_t i = 0; i < participants.size(); ++i) {
      st.rewards[participants[i]] = shares[i];
      s.balances[participants[i]] += shares[i];
    }
    s.total_minted += budget;
    s.settlements.emplace(round, st);
    return st.rewards;
  });
}

WatermarkSpec ContractSet::issue_watermark(const ExecContext& ctx, std::string_view model_id) {
  return transact([&](State& s) {
    require_server(ctx);
    if (model_id.empty()) fail(E::kInvalidArgument, "empty model_id");
    if (s.specs.contains(model_id)) fail(E::kDuplicateModelId, std::string(model_id));
    WatermarkSpec spec;
    spec.model_id = std::string(model_id);
    spec.bits = derive_watermark_bits(model_id, ctx.prev_hash, s.watermark_bits);
    spec.key_seed = derive_key_seed(model_id, ctx.prev_hash);
    spec.issued_at = ctx.height;
    s.specs.emplace(spec.model_id, spec);
    return spec;
  });
}

ModelToken ContractSet::mint_model_token(const ExecContext& ctx, std::string_view model_id,
                                         const Digest& commitment) {
  return transact([&](State& s) {
    if (!s.clients.contains(ctx.sender)) fail(E::kUnregisteredOwner, to_hex(ctx.sender));
    auto spec = s.specs.find(model_id);
    if (spec == s.specs.end()) fail(E::kNoWatermarkIssued, std::string(model_id));
    if (s.token_by_model.contains(model_id)) fail(E::kAlreadyTokenized, std::string(model_id));
    if (ownership_commitment(spec->second.bits, spec->second.key_seed) != commitment) {
      fail(E::kCommitmentMismatch, std::string(model_id));
    }
    ModelToken t;
    t.token_id = s.next_token_id++;
    t.owner = ctx.sender;
    t.model_id = std::string(model_id);
    t.commitment = commitment;
    s.tokens.emplace(t.token_id, t);
    s.token_by_model.emplace(t.model_id, t.token_id);
    return t;
  });
}

ModelToken ContractSet::transfer_token(const ExecContext& ctx, std::uint64_t token_id, const Address& to) {
  return transact([&](State& s) {
    auto it = s.tokens.find(token_id);
    if (it == s.tokens.end()) fail(E::kUnknownToken, std::to_string(token_id));
    if (it->second.owner != ctx.sender) fail(E::kNotOwner, to_hex(ctx.sender));
    if (!s.clients.contains(to)) fail(E::kUnregisteredRecipient, to_hex(to));
    it->second.history.push_back({ctx.sender, to, ctx.height});
    it->second.owner = to;
    return it->second;
  });
}

// ---- queries -----------------------------------------------------------------

std::uint64_t ContractSet::watermark_bits() const { return live().watermark_bits; }

const ClientRecord* ContractSet::client(const Address& a) const {
  const State& s = live();
  auto it = s.clients.find(a);
  return it == s.clients.end() ? nullptr : &it->second;
}

const ClientRecord* ContractSet::client_by_id(std::string_view client_id) const {
  const State& s = live();
  auto it = s.client_ids.find(client_id);
  return it == s.client_ids.end() ? nullptr : &s.clients.at(it->second);
}

std::vector<ClientRecord> ContractSet::clients() const {
  const State& s = live();
  std::vector<ClientRecord> out;
  for (const auto& [id, addr] : s.client_ids) out.push_back(s.clients.at(addr));
  return out;
}

std::vector<RoundRecord> ContractSet::records_for_round(std::uint64_t round) const {
  const State& s = live();
  std::vector<RoundRecord> out;
  for (auto it = s.records.lower_bound({round, Address{}}); it != s.records.end() && it->first.first == round; ++it) {
    out.push_back(it->second);
  }
  return out;
}

std::vector<RoundRecord> ContractSet::records_for_client(const Address& a) const {
  std::vector<RoundRecord> out;
  for (const auto& [key, r] : live().records) {
    if (key.second == a) out.push_back(r);
  }
  return out;
}

std::size_t ContractSet::record_count() const { return live().records.size(); }

std::optional<ElectionResult> ContractSet::election(std::uint64_t round) const {
  const State& s = live();
  auto it = s.elections.find(round);
  if (it == s.elections.end()) return std::nullopt;
  return it->second;
}

std::vector<ElectionResult> ContractSet::elections() const {
  std::vector<ElectionResult> out;
  for (const auto& [round, e] : live().elections) out.push_back(e);
  return out;
}

std::uint64_t ContractSet::balance(const Address& a) const {
  const State& s = live();
  auto it = s.balances.find(a);
  return it == s.balances.end() ? 0 : it->second;
}

std::map<Address, std::uint64_t> ContractSet::balances() const { return live().balances; }

std::uint64_t ContractSet::total_minted() const { return live().total_minted; }

std::optional<Settlement> ContractSet::settlement(std::uint64_t round) const {
  const State& s = live();
  auto it = s.settlements.find(round);
  if (it == s.settlements.end()) return std::nullopt;
  return it->second;
}

std::optional<WatermarkSpec> ContractSet::watermark_spec(std::string_view model_id) const {
  const State& s = live();
  auto it = s.specs.find(model_id);
  if (it == s.specs.end()) return std::nullopt;
  return it->second;
}

std::optional<ModelToken> ContractSet::token(std::uint64_t token_id) const {
  const State& s = live();
  auto it = s.tokens.find(token_id);
  if (it == s.tokens.end()) return std::nullopt;
  return it->second;
}

std::vector<ModelToken> ContractSet::tokens() const {
  std::vector<ModelToken> out;
  for (const auto& [id, t] : live().tokens) out.push_back(t);
  return out;
}

bool ContractSet::verify_ownership(std::uint64_t token_id, std::span<const std::int8_t> claimed_bits,
                                   std::uint64_t claimed_seed) const {
  const auto t = token(token_id);
  if (!t) fail(E::kUnknownToken, std::to_string(token_id));
  return ownership_commitment(claimed_bits, claimed_seed) == t->commitment;
}

const ContractSet& contracts_of(const ledger::Ledger& ledger) {
  const auto* set = dynamic_cast<const ContractSet*>(&ledger.host());
  if (set == nullptr) throw Error(E::kInvalidArgument, "ledger host is not a ContractSet");
  return *set;
}

}  // namespace veryfl::contracts
