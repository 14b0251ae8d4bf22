#include <doctest.h>

#include <algorithm>

#include "veryfl/errors.hpp"
#include "veryfl/fl/dataset.hpp"
#include "veryfl/fl/trainer.hpp"
#include "veryfl/task.hpp"

using namespace veryfl;

namespace {

fl::TaskConfig small_config(std::size_t clients, std::size_t rounds, std::uint64_t seed = 5) {
  auto c = fl::default_benchmark();
  c.global_args.model = "linear";
  c.global_args.client_number = clients;
  c.global_args.communication_rounds = rounds;
  c.global_args.seed = seed;
  c.global_args.samples = 600;
  c.global_args.features = 20;
  c.global_args.classes = 2;
  c.train_args.watermark.k = 16;
  return c;
}

struct Run {
  chainproxy::BridgeSession session;
  TaskReport report;
};

Run run(const fl::TaskConfig& c) {
  auto s = chainproxy::BridgeSession::open(c.global_args.seed, contract_config_for(c));
  auto r = run_task(c, s);
  return {std::move(s), std::move(r)};
}

}  // namespace

TEST_SUITE("task") {
  TEST_CASE("client ids sort in index order") {
    const auto ids = make_client_ids(12);
    CHECK(ids.front() == "client_01");
    CHECK(ids.back() == "client_12");
    CHECK(std::is_sorted(ids.begin(), ids.end()));
  }

  TEST_CASE("derived seeds separate tags") {
    CHECK(derive_seed(1, {2}) == derive_seed(1, {2}));
    CHECK(derive_seed(1, {2}) != derive_seed(1, {3}));
    CHECK(derive_seed(1, {4, 1, 0}) != derive_seed(1, {4, 0, 1}));
  }

  TEST_CASE("five rounds over ten clients leave the expected chain") {
    auto [s, rep] = run(small_config(10, 5));
    CHECK(rep.rounds.size() == 5);
    CHECK(s.contracts().record_count() == 50);
    CHECK(s.contracts().tokens().size() == 1);
    // genesis + deploy + registration + one per round + finalize
    CHECK(s.ledger().height() == 2 + 1 + 5 + 1);
    CHECK(rep.block_height == s.ledger().height());
    CHECK(rep.detection_rate == 1.0);
    CHECK(rep.token_id == 1u);
    CHECK(s.contracts().token(1)->owner == s.address_of("client_01"));
  }

  TEST_CASE("every elected aggregator is a registered client") {
    auto [s, rep] = run(small_config(6, 4));
    for (const auto& r : rep.rounds) {
      CHECK(s.contracts().client(r.aggregator) != nullptr);
      CHECK(s.contracts().election(r.round)->aggregator == r.aggregator);
    }
  }

  TEST_CASE("on-chain metrics are the trainers' metrics in micro-units") {
    auto c = small_config(4, 2);
    auto [s, rep] = run(c);
    for (const auto& r : rep.rounds) {
      double acc = 0.0;
      for (const auto& rec : s.contracts().records_for_round(r.round)) acc += static_cast<double>(rec.accuracy);
      CHECK(acc / 4.0 / contracts::kMicro == doctest::Approx(r.mean_accuracy).epsilon(1e-6));
    }
  }

  TEST_CASE("identical config and seed give identical chains") {
    const auto c = small_config(3, 2, 77);
    auto a = run(c);
    auto b = run(c);
    CHECK(a.report.state_root == b.report.state_root);
    CHECK(a.session.ledger().chain() == b.session.ledger().chain());
    CHECK(a.report.final_model == b.report.final_model);
  }

  TEST_CASE("parallel workers do not change the result") {
    auto c = small_config(5, 2, 8);
    const auto serial = run(c);
    c.global_args.workers = 4;
    const auto parallel = run(c);
    CHECK(serial.report.state_root == parallel.report.state_root);
  }

  TEST_CASE("one client and one round reproduce that client's update") {
    auto c = small_config(1, 1, 3);
    c.train_args.watermark.enabled = false;
    c.train_args.batch_size = 10000;
    const auto [s, rep] = run(c);

    fl::GlobalArgs g = c.global_args;
    const auto data = fl::load_dataset(g, derive_seed(g.seed, {1}));
    const auto arch = fl::make_architecture(g.model, data.n_features, data.n_classes, g.hidden_units);
    const auto init = fl::init_model(arch, derive_seed(g.seed, {3}));
    const auto up = fl::local_train(init, data, c.train_args, c.algorithm, derive_seed(g.seed, {4, 1, 0}));
    CHECK(rep.final_model.values == up.params.values);
    CHECK(s.contracts().tokens().empty());
    CHECK(s.ledger().height() == 2 + 1 + 1);
  }

  TEST_CASE("watermark bit count beyond the slice is rejected") {
    auto c = small_config(2, 1);
    c.train_args.watermark.k = 41;  // linear 20x2 final weights hold 40
    auto s = chainproxy::BridgeSession::open(1, contract_config_for(c));
    CHECK_THROWS_WITH_AS(run_task(c, s), doctest::Contains("BadDimensions"), Error);
  }

  TEST_CASE("an unknown owner is refused") {
    auto c = small_config(2, 1);
    c.global_args.owner = "client_09";
    auto s = chainproxy::BridgeSession::open(1, contract_config_for(c));
    CHECK_THROWS_WITH_AS(run_task(c, s), doctest::Contains("UnboundClient"), Error);
  }

  TEST_CASE("report JSON carries rounds and the final token") {
    const auto [s, rep] = run(small_config(2, 2));
    const auto j = to_json(rep);
    CHECK(j.find("\"rounds\"") != std::string::npos);
    CHECK(j.find("\"token_id\": 1") != std::string::npos);
  }
}
