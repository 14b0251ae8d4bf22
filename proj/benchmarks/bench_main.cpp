#include <benchmark/benchmark.h>

#include "veryfl/chainproxy.hpp"
#include "veryfl/fl/dataset.hpp"
#include "veryfl/fl/model.hpp"
#include "veryfl/fl/trainer.hpp"
#include "veryfl/sha256.hpp"
#include "veryfl/task.hpp"

using namespace veryfl;

namespace {

std::vector<chainproxy::ClientRoundMetrics> round_metrics(const std::vector<std::string>& ids) {
  std::vector<chainproxy::ClientRoundMetrics> m;
  for (std::size_t i = 0; i < ids.size(); ++i) m.push_back({ids[i], 900'000 + i, 100'000 + i, 500 + i});
  return m;
}

chainproxy::BridgeSession session_with_rounds(std::size_t rounds) {
  auto s = chainproxy::BridgeSession::open(7, {32, 11});
  const auto ids = make_client_ids(10);
  s.bind_clients(ids);
  const auto m = round_metrics(ids);
  for (std::uint64_t r = 1; r <= rounds; ++r) s.submit_round(r, m, 1000);
  return s;
}

}  // namespace

static void BM_Sha256(benchmark::State& state) {
  const Bytes data(static_cast<std::size_t>(state.range(0)), 0x5a);
  for (auto _ : state) benchmark::DoNotOptimize(sha256(data));
  state.SetBytesProcessed(static_cast<std::int64_t>(state.iterations()) * state.range(0));
}
BENCHMARK(BM_Sha256)->Arg(64)->Arg(4096);

// One round block: ten training records, a settlement and an election.
static void BM_SealRound(benchmark::State& state) {
  auto s = session_with_rounds(0);
  const auto m = round_metrics(make_client_ids(10));
  std::uint64_t round = 0;
  for (auto _ : state) benchmark::DoNotOptimize(s.submit_round(++round, m, 1000));
}
BENCHMARK(BM_SealRound);

static void BM_Replay(benchmark::State& state) {
  const auto s = session_with_rounds(static_cast<std::size_t>(state.range(0)));
  const ledger::BlockLog log{7, static_cast<std::uint32_t>(s.ledger().accounts().size()), s.ledger().chain()};
  for (auto _ : state) benchmark::DoNotOptimize(chainproxy::BridgeSession::resume(log).ledger().height());
  state.counters["blocks"] = static_cast<double>(log.blocks.size());
}
BENCHMARK(BM_Replay)->Arg(10)->Arg(100);

static void BM_LocalTrain(benchmark::State& state) {
  const auto data = fl::make_blobs({1000, 20, 4, 1.0}, 1);
  const auto global = fl::init_model("mlp_1hidden", 20, 4, 2, static_cast<std::size_t>(state.range(0)));
  fl::TrainArgs args;
  args.learning_rate = 0.05;
  for (auto _ : state) benchmark::DoNotOptimize(fl::local_train(global, data, args, fl::Algorithm::kFedAvg, 3));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * data.size()));
}
BENCHMARK(BM_LocalTrain)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

static void BM_Aggregate(benchmark::State& state) {
  const auto global = fl::init_model("mlp_1hidden", 20, 4, 2, 256);
  std::vector<fl::ModelUpdate> updates(static_cast<std::size_t>(state.range(0)));
  for (std::size_t i = 0; i < updates.size(); ++i) updates[i] = {global, {}, 100 + i};
  for (auto _ : state) benchmark::DoNotOptimize(fl::aggregate(updates));
}
BENCHMARK(BM_Aggregate)->Arg(10)->Arg(100);
BENCHMARK_MAIN();
