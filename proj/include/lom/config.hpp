#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "lom/learners.hpp"

namespace lom::config {

// Everything a training run needs. Serialised as a flat `key = value` file;
// lines starting with '#' are comments and unknown keys are rejected.
//
//   env               reach2d | onestep | four_cluster
//   dataset           path to a dataset file; empty means generate one
//   dataset_episodes  episodes to generate when dataset is empty
//   out               run directory
//   learner           lom | bc | mdn | awac
//   eval_episodes     evaluation rollouts at the end of training
//   seed              root seed
//   seeds             comma list used by sweep-modes (defaults to seed)
//   beta clip polyak update_delay modes gamma iters_mdn iters_main
//   mc_samples batch_size hidden lr   training hyperparameters
//   log_every         metrics row interval in steps
//   eval_every        intermediate evaluation interval (0 = final only)
struct RunConfig {
  learners::TrainConfig train;
  std::string env = "reach2d";
  std::string dataset;
  std::size_t dataset_episodes = 2000;
  std::string out = "runs/default";
  std::string learner = "lom";
  std::size_t eval_episodes = 100;
  std::vector<std::uint64_t> seeds;
  std::size_t log_every = 500;
  std::size_t eval_every = 0;

  void validate() const;
};

const std::vector<std::string>& learner_names();

// Applies one key/value pair; throws ConfigError on unknown keys or bad values.
void apply(RunConfig& cfg, std::string_view key, std::string_view value);
RunConfig parse(std::string_view text);
RunConfig load(const std::filesystem::path& path);
// Inverse of parse: parse(to_text(c)) reproduces c.
std::string to_text(const RunConfig& cfg);

}  // namespace lom::config
