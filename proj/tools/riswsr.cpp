// SPDX-License-Identifier: Apache-2.0
//
// riswsr <generate|train|evaluate|baselines|validate> --config <path>
//        [--out DIR] [--seed-override N] [--threads K]

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "riswsr/config.hpp"
#include "riswsr/error.hpp"
#include "riswsr/io.hpp"
#include "riswsr/kernels.hpp"
#include "riswsr/training.hpp"
#include "riswsr/validation.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace riswsr;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Context {
  std::string command;
  config::RunConfig cfg;
  fs::path out;
  std::size_t threads = 1;
};

void report(const char* kind, const std::string& message) {
  std::cerr << json{{"error", kind}, {"message", message}}.dump() << '\n';
}

std::string num(double x) {
  std::ostringstream ss;
  ss.precision(17);
  ss << x;
  return ss.str();
}

std::pair<training::Dataset, training::Dataset> datasets(const Context& ctx) {
  if (!ctx.cfg.dataset_path.empty()) {
    const fs::path base = ctx.cfg.dataset_path;
    return {io::load_dataset(base / "train"), io::load_dataset(base / "test")};
  }
  return training::build_dataset(ctx.cfg.geometry, ctx.cfg.regime, ctx.cfg.sizes, ctx.cfg.seed,
                                 ctx.cfg.generator);
}

json stats_json(const training::EvalStats& s) {
  return {{"mean", s.mean}, {"stddev", s.stddev}, {"samples", s.per_sample.size()}};
}

int cmd_generate(const Context& ctx) {
  const auto [train, test] = training::build_dataset(ctx.cfg.geometry, ctx.cfg.regime, ctx.cfg.sizes,
                                                     ctx.cfg.seed, ctx.cfg.generator);
  io::save_dataset(train, ctx.out / "train");
  io::save_dataset(test, ctx.out / "test");
  std::cout << "generated " << train.size() << " train and " << test.size() << " test samples\n";
  return kOk;
}

int cmd_train(const Context& ctx) {
  const auto [train, test] = datasets(ctx);
  training::TrainConfig tc = ctx.cfg.train_config();
  tc.threads = ctx.threads;
  const auto specs = ctx.cfg.layer_specs();
  training::TrainResult res = training::train_ao(train, test, specs, tc, [](const training::EpochRecord& e) {
    std::cout << "epoch " << e.epoch << " train " << num(e.train_wsr) << " test " << num(e.test_wsr) << '\n';
  });
  const fs::path ckpt = ctx.out / "checkpoint";
  io::save_checkpoint(res.params, ckpt);
  res.record.checkpoint = ckpt.string();
  res.record.config_echo = config::echo(ctx.cfg);
  io::write_run_record_csv(res.record, ctx.out / "run_record.csv");
  io::write_run_record_json(res.record, ctx.out / "run_record.json");
  return kOk;
}

int cmd_evaluate(const Context& ctx) {
  if (ctx.cfg.checkpoint_path.empty()) throw ConfigError("evaluate.checkpoint: required for evaluate");
  const risnet::NetworkParams params = io::load_checkpoint(ctx.cfg.checkpoint_path);
  const auto data = datasets(ctx);
  const training::EvalStats s =
      training::evaluate(params, data.second, ctx.cfg.train.csi, ctx.cfg.train.wmmse, ctx.threads);
  io::write_text(ctx.out / "evaluate.json",
                 json{{"split", "test"}, {"checkpoint", ctx.cfg.checkpoint_path}, {"wsr", stats_json(s)}}.dump(2));
  std::string csv = "sample,wsr\n";
  for (std::size_t i = 0; i < s.per_sample.size(); ++i) csv += std::to_string(i) + "," + num(s.per_sample[i]) + "\n";
  io::write_text(ctx.out / "evaluate.csv", csv);
  std::cout << "test wsr mean " << num(s.mean) << " stddev " << num(s.stddev) << '\n';
  return kOk;
}

int cmd_baselines(const Context& ctx) {
  const auto data = datasets(ctx);
  const training::Dataset& test = data.second;
  const training::EvalStats random =
      training::random_phase_stats(test, ctx.cfg.baseline_seed, ctx.cfg.train.wmmse, ctx.threads);
  const std::size_t n = test.geometry.elements();
  const training::EvalStats identity = training::evaluate_phases(
      test, [n](std::size_t) { return std::vector<double>(n, 0.0); }, ctx.cfg.train.wmmse, ctx.threads);
  io::write_text(ctx.out / "baselines.json",
                 json{{"split", "test"},
                      {"random_phase", stats_json(random)},
                      {"identity_phase", stats_json(identity)}}
                     .dump(2));
  std::string csv = "baseline,mean,stddev\n";
  csv += "random_phase," + num(random.mean) + "," + num(random.stddev) + "\n";
  csv += "identity_phase," + num(identity.mean) + "," + num(identity.stddev) + "\n";
  io::write_text(ctx.out / "baselines.csv", csv);
  std::cout << csv;
  return kOk;
}

int cmd_validate(const Context& ctx) {
  const std::vector<validation::CheckResult> results = validation::run_all(ctx.cfg.seed);
  json arr = json::array();
  bool all = true;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << '\n';
    arr.push_back({{"name", r.name}, {"passed", r.passed}, {"detail", r.detail}, {"seconds", r.seconds}});
    all = all && r.passed;
  }
  io::write_text(ctx.out / "validate.json",
                 json{{"kernels", kernels::active().name}, {"passed", all}, {"checks", arr}}.dump(2));
  return all ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RIS phase and precoder optimization driver"};
  app.require_subcommand(1, 1);
  std::string config_path;
  std::string out_dir = "riswsr_out";
  std::optional<std::uint64_t> seed_override;
  std::size_t threads = 1;
  for (const char* name : {"generate", "train", "evaluate", "baselines", "validate"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--seed-override", seed_override, "replace the master seed");
    sub->add_option("--threads", threads, "worker threads for per-sample work")->check(CLI::PositiveNumber);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  Context ctx;
  ctx.command = app.get_subcommands().front()->get_name();
  ctx.out = out_dir;
  ctx.threads = threads;
  try {
    ctx.cfg = config::load_config(config_path);
    if (seed_override) ctx.cfg.seed = *seed_override;
    ctx.cfg.validate();
  } catch (const std::exception& e) {
    report("config", e.what());
    return kUsage;
  }

  const fs::path marker = ctx.out / "INCOMPLETE";
  int code = kFailure;
  try {
    fs::create_directories(ctx.out);
    io::write_text(marker, ctx.command + " did not finish\n");
    io::write_text(ctx.out / "config.json", config::echo(ctx.cfg));
    if (ctx.command == "generate") code = cmd_generate(ctx);
    else if (ctx.command == "train") code = cmd_train(ctx);
    else if (ctx.command == "evaluate") code = cmd_evaluate(ctx);
    else if (ctx.command == "baselines") code = cmd_baselines(ctx);
    else code = cmd_validate(ctx);
  } catch (const ConfigError& e) {
    report("config", e.what());
    return kUsage;
  } catch (const std::exception& e) {
    report("runtime", e.what());
    return kFailure;
  }
  if (code == kOk) fs::remove(marker);
  return code;
}
