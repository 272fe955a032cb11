#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lom/numkit/matrix.hpp"
#include "lom/numkit/rng.hpp"

namespace lom::envs {

enum class EnvKind { reach2d, onestep, four_cluster };

struct StepResult {
  std::vector<double> state;
  double reward = 0.0;
  bool done = false;
};

// Synthetic environments with multi-modal expert data. An Env is a small value
// type; copies are independent.
//
//   reach2d       planar point agent, four goals at 0.8*(+-1, +-1); the
//                 first-quadrant goal pays 2, the others 1. Actions are
//                 displacements in [-0.2, 0.2]^2.
//   onestep       x ~ U[-1, 1], action y in [-1, 1], reward 1 iff x*y > 0.
//   four_cluster  one-step task whose expert actions form four tight clusters
//                 at (+-1, +-1); an action within 0.25 of (1, 1) pays 2, within
//                 0.25 of any other centre pays 1.
class Env {
 public:
  static constexpr double kReachArena = 1.5;
  static constexpr double kReachMaxStep = 0.2;
  static constexpr double kReachGoalScale = 0.8;
  // reach2d starts are uniform over this square, minus discs of twice the
  // goal radius around each goal.
  static constexpr double kReachStartExtent = 1.5;
  static constexpr double kClusterRewardRadius = 0.25;
  static constexpr double kClusterActionBound = 1.5;

  static Env reach2d(double goal_radius = 0.15, std::size_t horizon = 40);
  static Env onestep();
  static Env four_cluster();
  // Throws UsageError listing the valid names.
  static Env make(std::string_view name);
  static std::vector<std::string> names();

  EnvKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t horizon() const { return horizon_; }
  double goal_radius() const { return goal_radius_; }
  const std::vector<double>& action_low() const { return action_low_; }
  const std::vector<double>& action_high() const { return action_high_; }
  double max_reward() const { return kind_ == EnvKind::onestep ? 1.0 : 2.0; }

  // Goal (reach2d) or cluster centre (four_cluster) positions; the first one
  // pays reward 2.
  std::vector<std::array<double, 2>> targets() const;

  std::vector<double> reset(numkit::Rng& rng);
  // Places the agent at an explicit state with a fresh step counter.
  void reset_to(std::span<const double> state);
  StepResult step(std::span<const double> action);

  const std::vector<double>& state() const { return state_; }
  std::size_t steps_taken() const { return t_; }

  std::vector<double> clip_action(std::span<const double> action) const;

 private:
  Env() = default;

  double reach_reward(bool& done) const;

  EnvKind kind_ = EnvKind::reach2d;
  std::string name_;
  std::size_t state_dim_ = 0;
  std::size_t action_dim_ = 0;
  std::size_t horizon_ = 1;
  double goal_radius_ = 0.0;
  std::vector<double> action_low_;
  std::vector<double> action_high_;
  std::vector<double> state_;
  std::size_t t_ = 0;
};

struct Transition {
  std::vector<double> s;
  std::vector<double> a;
  double r = 0.0;
  std::vector<double> s_next;
  std::vector<double> a_next;  // zero vector when done
  bool done = false;

  friend bool operator==(const Transition&, const Transition&) = default;
};

struct Dataset {
  std::size_t state_dim = 0;
  std::size_t action_dim = 0;
  std::vector<Transition> transitions;
  std::string provenance;

  std::size_t size() const { return transitions.size(); }
  // Throws FormatError when empty or dimension-inconsistent.
  void validate() const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Mini-batch views gathered from a dataset by row index.
struct Batch {
  numkit::Matrix s, a, s_next, a_next;
  std::vector<double> r;
  std::vector<bool> done;
};

Batch gather(const Dataset& d, std::span<const std::size_t> rows);
std::vector<std::size_t> sample_rows(const Dataset& d, std::size_t batch, numkit::Rng& rng);

// Expert constants for the scripted reach2d controller.
inline constexpr double kExpertGain = 0.15;
inline constexpr double kExpertNoise = 0.02;
// Spread of each four_cluster expert cluster.
inline constexpr double kClusterSigma = 0.05;

// Rolls the environment's scripted multi-modal expert for `episodes` episodes.
// Throws UsageError when episodes == 0.
Dataset collect_multimodal_dataset(const Env& env, std::size_t episodes, numkit::Rng& rng);

// The scripted reach2d expert's action toward goal `goal` (noise-free when rng
// is null).
std::vector<double> reach_expert_action(const Env& env, std::size_t goal, numkit::Rng* rng);

// Binary dataset format, little-endian:
//   "LOMD" | u32 version | u32 state_dim | u32 action_dim | u64 count |
//   u32 provenance length | provenance bytes |
//   count x ( f64 s[sd] a[ad] r s_next[sd] a_next[ad] | u8 done )
inline constexpr std::uint32_t kDatasetVersion = 1;

void save_dataset(const Dataset& d, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace lom::envs
