// lom: offline-RL experiment harness.
//
//   lom gen-data    --env reach2d --episodes 1000 --seed 7 --out data.lomd
//   lom train       --config run.cfg [--seed N] [--out DIR] [--learner L] [--modes M]
//   lom eval        --checkpoint PATH --env reach2d --episodes 100 --seed 0
//   lom sweep-modes --config run.cfg --modes 2,4,10,20,50 [--out DIR]
//   lom verify      [--instances 100] [--seed 0]
//
// Exit codes: 0 success, 1 usage, 2 runtime error, 3 verification failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "lom/config.hpp"
#include "lom/envs.hpp"
#include "lom/errors.hpp"
#include "lom/pipeline.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;
constexpr int kExitVerify = 3;

void setup_logging() {
  auto logger = spdlog::stderr_color_mt("lom");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%H:%M:%S] [%l] %v");
  const char* env = std::getenv("LOM_LOG_LEVEL");
  const std::string level = env ? env : "info";
  if (level == "error") spdlog::set_level(spdlog::level::err);
  else if (level == "debug") spdlog::set_level(spdlog::level::debug);
  else if (level == "info") spdlog::set_level(spdlog::level::info);
  else throw lom::UsageError("LOM_LOG_LEVEL must be one of error, info, debug (got '" + level + "')");
}

nlohmann::json report_json(const lom::learners::EvalReport& r) {
  return {{"policy", r.policy_name}, {"seed", r.seed},          {"episodes", r.episodes},
          {"mean_return", r.mean_return}, {"std_error", r.std_error()}, {"returns", r.returns}};
}

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> env;
  std::optional<std::size_t> episodes;
  std::optional<std::string> learner;
  std::string modes;
};

lom::config::RunConfig resolve(const Overrides& o) {
  auto cfg = o.config.empty() ? lom::config::RunConfig{} : lom::config::load(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.out) cfg.out = *o.out;
  if (o.env) cfg.env = *o.env;
  if (o.episodes) cfg.eval_episodes = *o.episodes;
  if (o.learner) cfg.learner = *o.learner;
  return cfg;
}

std::vector<std::size_t> parse_modes(const std::string& text) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto next = text.find(',', pos);
    const auto item = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      throw lom::UsageError("--modes: bad mode count '" + item + "'");
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"offline RL with one-mode weighted imitation"};
  app.require_subcommand(1);

  Overrides o;
  std::string env_name = "reach2d", out_path, checkpoint;
  std::size_t episodes = 1000;
  std::uint64_t seed = 0;
  std::size_t instances = 100;

  auto* gen = app.add_subcommand("gen-data", "collect a multi-modal expert dataset");
  gen->add_option("--env", env_name, "environment name")->capture_default_str();
  gen->add_option("--episodes", episodes, "episodes to collect")->capture_default_str();
  gen->add_option("--seed", seed, "root seed")->capture_default_str();
  gen->add_option("--out", out_path, "output dataset file")->required();

  auto* train = app.add_subcommand("train", "train one learner and write a run directory");
  auto add_overrides = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "key = value config file");
    sub->add_option("--seed", o.seed, "root seed");
    sub->add_option("--out", o.out, "output directory");
    sub->add_option("--env", o.env, "environment name");
    sub->add_option("--episodes", o.episodes, "evaluation episodes");
    sub->add_option("--learner", o.learner, "lom, bc, mdn or awac");
  };
  add_overrides(train);
  std::optional<std::size_t> train_modes;
  train->add_option("--modes", train_modes, "mixture component count M");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, JSON report on stdout");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file or run directory")->required();
  eval->add_option("--env", env_name, "environment name")->capture_default_str();
  eval->add_option("--episodes", episodes, "episodes")->capture_default_str();
  eval->add_option("--seed", seed, "evaluation seed")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep-modes", "train LOM for several mode counts");
  add_overrides(sweep);
  sweep->add_option("--modes", o.modes, "comma-separated mode counts")->required();

  auto* verify = app.add_subcommand("verify", "exact tabular checks, JSON report on stdout");
  verify->add_option("--instances", instances, "random instances")->capture_default_str();
  verify->add_option("--seed", seed, "first instance seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    setup_logging();
    if (gen->parsed()) {
      if (episodes == 0) throw lom::UsageError("--episodes must be >= 1");
      const auto env = lom::envs::Env::make(env_name);
      lom::config::RunConfig cfg;
      cfg.env = env_name;
      cfg.train.seed = seed;
      cfg.dataset_episodes = episodes;
      const auto data = lom::pipeline::make_dataset(cfg, env);
      lom::envs::save_dataset(data, out_path);
      spdlog::info("wrote {} transitions to {}", data.size(), out_path);
    } else if (train->parsed()) {
      auto cfg = resolve(o);
      if (train_modes) cfg.train.num_modes = *train_modes;
      const auto report = lom::pipeline::run_training(cfg);
      std::cout << report_json(report).dump(2) << "\n";
    } else if (eval->parsed()) {
      const auto report = lom::pipeline::evaluate_checkpoint(checkpoint, env_name, episodes, seed);
      std::cout << report_json(report).dump(2) << "\n";
    } else if (sweep->parsed()) {
      auto cfg = resolve(o);
      cfg.learner = "lom";
      cfg.validate();
      const auto modes = parse_modes(o.modes);
      std::filesystem::create_directories(cfg.out);
      const auto csv_path = std::filesystem::path(cfg.out) / "sweep.csv";
      std::ofstream csv(csv_path, std::ios::trunc);
      if (!csv) throw lom::Error("cannot write '" + csv_path.string() + "'");
      csv << lom::pipeline::kSweepHeader << "\n";
      const auto rows = lom::pipeline::sweep_modes(cfg, modes, [&](const auto& row) {
        csv << lom::pipeline::to_csv(row) << "\n" << std::flush;
        std::cout << lom::pipeline::to_csv(row) << "\n";
      });
      for (const auto& r : rows)
        if (!r.ok) return kExitRuntime;
    } else if (verify->parsed()) {
      const auto outcome = lom::pipeline::verify_theorems(instances, seed);
      std::cout << outcome.report.dump(2) << "\n";
      return outcome.all_passed ? 0 : kExitVerify;
    }
  } catch (const lom::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const lom::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
