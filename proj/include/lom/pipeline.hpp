#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lom/config.hpp"
#include "lom/envs.hpp"
#include "lom/hyperq.hpp"
#include "lom/learners.hpp"
#include "lom/mdn.hpp"
#include "lom/valuefn.hpp"

namespace lom::pipeline {

inline constexpr const char* kArtifactVersion = "1.0.0";
inline constexpr double kDivergenceLoss = 1e6;
inline constexpr std::size_t kDivergencePatience = 10;

// One row of metrics.csv. Losses that were not computed at a step are NaN and
// written as empty fields.
struct MetricsRow {
  std::size_t step = 0;
  double loss_mdn;
  double loss_q;
  double loss_hyperq;
  double loss_policy;
  double eval_mean_return;
  std::uint64_t seed = 0;

  MetricsRow();
};

inline constexpr const char* kMetricsHeader =
    "step,loss_mdn,loss_q,loss_hyperq,loss_policy,eval_mean_return,seed";

std::string to_csv(const MetricsRow& row);
// Parses a metrics file, checking the header and every field. Throws FormatError.
std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);

// Trained networks of one run. Only the pieces the requested learners need
// are present.
struct Models {
  std::optional<mdn::MdnNet> mdn;
  std::optional<valuefn::QNet> q;
  std::optional<valuefn::QNet> q_target;
  std::optional<hyperq::HyperQNet> hq;
  std::map<std::string, learners::GaussianPolicy> policies;  // lom, bc, awac
};

struct TrainHooks {
  // Called for every logged metrics row.
  std::function<void(const MetricsRow&)> on_row;
  // Called after the MDN phase and at every log step with the current models;
  // used to keep a last-good checkpoint on disk.
  std::function<void(const Models&, std::size_t step)> on_checkpoint;
  // Intermediate evaluation of the primary learner (eval_every > 0).
  std::function<double(const Models&, std::size_t step)> on_eval;
};

struct TrainResult {
  Models models;
  std::vector<MetricsRow> metrics;
  std::size_t target_updates = 0;
};

// Runs the phases in order: the MDN for iters_mdn steps (then frozen), then
// iters_main interleaved steps of critic, hyper Q-function and policy
// updates, with a polyak target update every update_delay steps.
//
// Several learners can be trained from one call: they share the MDN, the
// critic and the mini-batch stream, and each policy has its own RNG
// substream, so a learner's result does not depend on which other learners
// are trained with it. Metrics record the first learner's policy loss.
//
// Throws DivergenceError when some loss is non-finite or above 1e6 for 10
// consecutive steps.
TrainResult train_models(const envs::Dataset& data, const envs::Env& env,
                         const config::RunConfig& cfg, const std::vector<std::string>& learners,
                         const TrainHooks& hooks = {});

// The dataset the config describes: loaded from `dataset` when set, otherwise
// generated from the root seed's dataset substream.
envs::Dataset make_dataset(const config::RunConfig& cfg, const envs::Env& env);

learners::PolicyFn policy_for(const Models& models, const std::string& learner);

// Evaluates one learner on the eval substream of `seed`; the stream depends
// only on (seed, learner), not on the episode count of other evaluations.
learners::EvalReport evaluate_learner(const Models& models, const std::string& learner,
                                      const envs::Env& env, std::size_t episodes,
                                      std::uint64_t seed);

// Writes config.txt, metrics.csv, checkpoints/ and manifest.json under
// cfg.out, then evaluates the learner. On divergence the last checkpoints
// written stay in place and the error propagates.
learners::EvalReport run_training(const config::RunConfig& cfg);

// Reloads a checkpoint written by run_training and evaluates it.
learners::EvalReport evaluate_checkpoint(const std::filesystem::path& checkpoint,
                                         const std::string& env_name, std::size_t episodes,
                                         std::uint64_t seed);

// States near the middle of the state space, used to read off the selected
// component's spread.
std::vector<std::vector<double>> centre_states(const envs::Env& env);

// Mean over centre states and action dimensions of sigma of the mode the
// hyper Q-function selects.
double selected_sigma(const mdn::MdnNet& mdn, const hyperq::HyperQNet& hq,
                      const envs::Env& env);

struct SweepRow {
  std::size_t num_modes = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  double mean_return = 0.0;
  double std_error = 0.0;
  double selected_sigma = 0.0;
  std::string error;
};

inline constexpr const char* kSweepHeader = "modes,seed,status,mean_return,std_error,selected_sigma,error";
std::string to_csv(const SweepRow& row);

// Trains and evaluates LOM for every distinct M (in first-seen order) and
// every seed. A failing run is recorded and the sweep continues.
std::vector<SweepRow> sweep_modes(const config::RunConfig& cfg, std::vector<std::size_t> modes,
                                  const std::function<void(const SweepRow&)>& on_row = {});

// Runs the tabular checks on `instances` random instances with seeds
// first_seed, first_seed + 1, ... and aggregates them.
struct VerifyOutcome {
  nlohmann::json report;
  bool all_passed = false;
};
VerifyOutcome verify_theorems(std::size_t instances, std::uint64_t first_seed);

}  // namespace lom::pipeline
