#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>

#include "veryfl/chainproxy.hpp"
#include "veryfl/contracts.hpp"
#include "veryfl/errors.hpp"
#include "veryfl/fl/config.hpp"
#include "veryfl/fl/model.hpp"
#include "veryfl/ledger.hpp"
#include "veryfl/task.hpp"
#include "veryfl/watermark.hpp"

namespace veryfl::cli {
namespace {

namespace fs = std::filesystem;

struct RunOptions {
  std::string config;
  std::string out_dir;
};

struct LedgerOptions {
  std::string log;
  std::optional<std::uint64_t> block;
  std::optional<std::uint64_t> records;
  bool balances = false;
  bool tokens = false;
};

struct VerifyOptions {
  std::string model;
  std::string log;
  std::uint64_t token = 0;
  std::uint64_t seed = 0;
};

std::string micro(std::uint64_t v) {
  std::ostringstream ss;
  ss << v / contracts::kMicro << '.' << std::setw(6) << std::setfill('0') << v % contracts::kMicro;
  return ss.str();
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

// Replays a log; on failure prints the bad height and returns nullopt.
std::optional<chainproxy::BridgeSession> replay_log(const std::string& path, std::ostream& err) {
  try {
    return chainproxy::BridgeSession::resume(ledger::read_block_log(path));
  } catch (const Error& e) {
    err << "replay failed";
    if (e.height()) err << " at height " << *e.height();
    err << ": " << e.what() << '\n';
  }
  return std::nullopt;
}

std::string client_label(const chainproxy::BridgeSession& s, const Address& a) {
  auto id = s.client_of(a);
  if (!id.empty()) return id;
  return a == s.ledger().server() ? "server" : to_hex(a).substr(0, 16);
}

int cmd_run(const RunOptions& opt, std::ostream& out, std::ostream& err) {
  fl::TaskConfig config;
  try {
    config = fl::load_config(opt.config);
  } catch (const Error& e) {
    err << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  try {
    fs::create_directories(opt.out_dir);
    auto session = chainproxy::BridgeSession::open(config.global_args.seed, contract_config_for(config));
    const TaskReport report = run_task(config, session);

    for (const auto& r : report.rounds) {
      out << "round " << r.round << " aggregator=" << r.aggregator_client << " mean_accuracy=" << fixed(r.mean_accuracy)
          << " mean_loss=" << fixed(r.mean_loss) << " global_accuracy=" << fixed(r.global_accuracy)
          << " rewards=" << r.rewards_paid << " block=" << to_hex(r.block_hash) << '\n';
    }
    if (report.watermarked) {
      out << "token_id=" << report.token_id.value_or(0) << " owner=" << report.owner << " model_id=" << report.model_id
          << " key_seed=" << report.key_seed << " detection_rate=" << fixed(report.detection_rate) << '\n';
    }
    out << "final_accuracy=" << fixed(report.final_accuracy) << " height=" << report.block_height
        << " state_root=" << to_hex(report.state_root) << '\n';

    const fs::path dir(opt.out_dir);
    std::ofstream(dir / "report.json") << to_json(report);
    ledger::write_block_log(dir / "chain.log", session.ledger());
    fl::save_model(dir / "model.bin", report.final_model, report.slice);
    out << "wrote " << (dir / "report.json").string() << ", " << (dir / "chain.log").string() << ", "
        << (dir / "model.bin").string() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "run failed: " << e.what() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    err << "run failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

void print_block(const ledger::Block& b, const chainproxy::BridgeSession& s, std::ostream& out) {
  out << "index: " << b.index << '\n'
      << "prev_hash: " << to_hex(b.prev_hash) << '\n'
      << "state_root: " << to_hex(b.state_root) << '\n'
      << "block_hash: " << to_hex(b.block_hash) << '\n'
      << "txs: " << b.txs.size() << '\n';
  for (std::size_t i = 0; i < b.txs.size(); ++i) {
    const auto& itx = b.txs[i];
    out << "tx " << i << ": " << itx.tx.contract << '.' << itx.tx.method << " sender=" << client_label(s, itx.tx.sender)
        << " nonce=" << itx.tx.nonce << " round_tag=" << itx.tx.round_tag << " status="
        << (itx.receipt.ok ? std::string("ok") : "failed(" + std::string(to_string(itx.receipt.error)) + ")") << '\n';
  }
}

int cmd_ledger(const LedgerOptions& opt, std::ostream& out, std::ostream& err) {
  auto session = replay_log(opt.log, err);
  if (!session) return kExitFailure;
  const auto& l = session->ledger();
  try {
    if (opt.block) {
      print_block(l.block(*opt.block), *session, out);
      return kExitOk;
    }
    const auto& c = session->contracts();
    if (opt.records) {
      out << "client accuracy loss dataset_size\n";
      std::map<std::string, contracts::RoundRecord> rows;
      for (const auto& r : c.records_for_round(*opt.records)) rows.emplace(client_label(*session, r.client), r);
      for (const auto& [label, r] : rows) {
        out << label << ' ' << micro(r.accuracy) << ' ' << micro(r.loss) << ' ' << r.dataset_size << '\n';
      }
      return kExitOk;
    }
    if (opt.balances) {
      out << "client address balance\n";
      for (const auto& [addr, bal] : c.balances()) {
        out << client_label(*session, addr) << ' ' << to_hex(addr) << ' ' << bal << '\n';
      }
      out << "total_minted " << c.total_minted() << '\n';
      return kExitOk;
    }
    if (opt.tokens) {
      out << "token_id owner model_id commitment transfers\n";
      for (const auto& t : c.tokens()) {
        out << t.token_id << ' ' << client_label(*session, t.owner) << ' ' << t.model_id << ' ' << to_hex(t.commitment)
            << ' ' << t.history.size() << '\n';
      }
      return kExitOk;
    }
    out << "height: " << l.height() << '\n'
        << "tip: " << to_hex(l.tip().block_hash) << '\n'
        << "state_root: " << to_hex(l.tip().state_root) << '\n'
        << "clients: " << c.clients().size() << '\n'
        << "records: " << c.record_count() << '\n'
        << "tokens: " << c.tokens().size() << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << e.what() << '\n';
    return kExitFailure;
  }
}

int cmd_verify(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  auto session = replay_log(opt.log, err);
  if (!session) return kExitFailure;
  try {
    const auto mf = fl::load_model(opt.model);
    const auto& c = session->contracts();
    const auto token = c.token(opt.token);
    if (!token) throw Error(ErrorCode::kUnknownToken, std::to_string(opt.token));
    const auto spec = c.watermark_spec(token->model_id);
    if (!spec) throw Error(ErrorCode::kNoWatermarkIssued, token->model_id);

    const auto key = watermark::WatermarkKey::derive(opt.seed, spec->bits.size(), mf.slice.length);
    const auto extracted = watermark::extract(mf.slice.view(std::span<const double>(mf.params.values)), key);
    const double rate = watermark::detection_rate(extracted, watermark::WatermarkBits{spec->bits});
    const bool owned = c.verify_ownership(opt.token, extracted.bits, opt.seed);

    out << "token_id: " << token->token_id << '\n'
        << "model_id: " << token->model_id << '\n'
        << "owner: " << client_label(*session, token->owner) << '\n'
        << "detection_rate: " << fixed(rate) << '\n'
        << "verdict: " << (owned ? "OWNED" : "NOT-OWNED") << '\n';
    return owned ? kExitOk : kExitNotOwned;
  } catch (const Error& e) {
    err << "verify failed: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"veryfl: federated learning on a replayable in-process ledger"};
  app.require_subcommand(1);

  RunOptions run_opt;
  auto* run_cmd = app.add_subcommand("run", "Run a federated task from a config file");
  run_cmd->add_option("--config", run_opt.config, "Config file (JSON)")->required();
  run_cmd->add_option("--out", run_opt.out_dir, "Output directory")->required();

  LedgerOptions led_opt;
  auto* led_cmd = app.add_subcommand("ledger", "Replay a block log and print a view");
  led_cmd->add_option("--log", led_opt.log, "Block log")->required();
  auto* o_block = led_cmd->add_option("--block", led_opt.block, "Print block N");
  auto* o_records = led_cmd->add_option("--records", led_opt.records, "Print training records of ROUND");
  auto* o_bal = led_cmd->add_flag("--balances", led_opt.balances, "Print incentive balances");
  auto* o_tok = led_cmd->add_flag("--tokens", led_opt.tokens, "Print model tokens");
  o_block->excludes(o_records, o_bal, o_tok);
  o_records->excludes(o_bal, o_tok);
  o_bal->excludes(o_tok);

  VerifyOptions ver_opt;
  auto* ver_cmd = app.add_subcommand("verify", "Check model ownership against a token");
  ver_cmd->add_option("--model", ver_opt.model, "Model file")->required();
  ver_cmd->add_option("--log", ver_opt.log, "Block log")->required();
  ver_cmd->add_option("--token", ver_opt.token, "Token id")->required();
  ver_cmd->add_option("--seed", ver_opt.seed, "Watermark key seed")->required();

  auto* man_cmd = app.add_subcommand("manifest", "Print the contract method manifest");
  auto* cfg_cmd = app.add_subcommand("default-config", "Print the default benchmark config");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return kExitConfig;
  }

  if (run_cmd->parsed()) return cmd_run(run_opt, out, err);
  if (led_cmd->parsed()) return cmd_ledger(led_opt, out, err);
  if (ver_cmd->parsed()) return cmd_verify(ver_opt, out, err);
  if (man_cmd->parsed()) {
    out << contracts::manifest_json();
    return kExitOk;
  }
  if (cfg_cmd->parsed()) {
    out << fl::to_json(fl::default_benchmark());
    return kExitOk;
  }
  return kExitConfig;
}

}  // namespace veryfl::cli
