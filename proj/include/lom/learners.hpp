#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "lom/envs.hpp"
#include "lom/hyperq.hpp"
#include "lom/mdn.hpp"
#include "lom/numkit/loss.hpp"
#include "lom/numkit/matrix.hpp"
#include "lom/numkit/mlp.hpp"
#include "lom/numkit/rng.hpp"
#include "lom/valuefn.hpp"

// Policy learners: LOM (advantage-weighted imitation of the greedy mode) and
// the BC, MDN and AWAC comparison learners, plus the shared evaluator.
namespace lom::learners {

struct TrainConfig {
  double beta = 5.0;          // advantage temperature
  double clip = 50.0;         // exp_clip upper bound C
  double polyak = 0.995;      // target averaging coefficient rho
  std::size_t update_delay = 2;
  std::size_t num_modes = 4;  // M
  double gamma = 0.99;
  std::size_t iters_mdn = 20000;   // I_M
  std::size_t iters_main = 50000;  // I_G
  std::size_t mc_samples = 8;      // K
  std::size_t batch_size = 256;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{64, 64};
  double lr = 3e-4;

  // Throws ConfigError on an out-of-range field.
  void validate() const;
};

struct EvalReport {
  std::string policy_name;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  double mean_return = 0.0;
  std::vector<double> returns;

  // Standard error of the mean return.
  double std_error() const;
};

// Diagonal Gaussian policy: state -> [mean (d), log-std (d)].
class GaussianPolicy {
 public:
  static constexpr double kLogStdMin = -5.0;
  static constexpr double kLogStdMax = 2.0;

  GaussianPolicy() = default;
  GaussianPolicy(std::size_t state_dim, std::size_t action_dim,
                 const std::vector<std::size_t>& hidden, std::vector<double> action_low,
                 std::vector<double> action_high,
                 numkit::Activation act = numkit::Activation::relu);
  GaussianPolicy(numkit::MlpNet net, std::vector<double> action_low,
                 std::vector<double> action_high);

  std::size_t state_dim() const { return net_.input_width(); }
  std::size_t action_dim() const { return net_.output_width() / 2; }

  // Clipped mean action, used for evaluation.
  std::vector<double> mean_action(std::span<const double> s) const;
  std::vector<double> sample(std::span<const double> s, numkit::Rng& rng) const;
  double log_prob(std::span<const double> s, std::span<const double> a) const;

  numkit::MlpNet& net() { return net_; }
  const numkit::MlpNet& net() const { return net_; }
  const std::vector<double>& action_low() const { return low_; }
  const std::vector<double>& action_high() const { return high_; }

 private:
  numkit::MlpNet net_;
  std::vector<double> low_;
  std::vector<double> high_;
};

// -mean_i(w_i * log N(a_i; mean(s_i), std(s_i))); weights are constants.
numkit::LossGrad weighted_nll(const GaussianPolicy& pi, const numkit::Matrix& states,
                              const numkit::Matrix& actions, std::span<const double> weights);

// min(exp(x), c), evaluated without overflow for large x.
double exp_clip(double x, double c);

// Q(s, a_hat) - Q(s, mu_u): the selected mode's mean stands in for the
// expectation over that mode.
double lom_advantage(const valuefn::CriticFn& critic, const mdn::GmmParams& p,
                     std::span<const double> s, std::span<const double> a_hat, std::size_t u);
double lom_advantage(const valuefn::QNet& q, const mdn::GmmParams& p, std::span<const double> s,
                     std::span<const double> a_hat, std::size_t u);

// The LOM objective on one batch of states: imitate a fresh draw from the
// greedy mode, weighted by exp_clip(advantage / beta, C).
numkit::LossGrad lom_policy_update(const GaussianPolicy& pi, const hyperq::GreedyPolicy& gp,
                                   const valuefn::QNet& q, const numkit::Matrix& states,
                                   const TrainConfig& cfg, numkit::Rng& rng);

numkit::LossGrad bc_update(const GaussianPolicy& pi, const numkit::Matrix& states,
                           const numkit::Matrix& actions);

// Weighted imitation of dataset actions with advantage
// Q(s, a) - sum_i alpha_i(s) Q(s, mu_i(s)).
numkit::LossGrad awac_update(const GaussianPolicy& pi, const valuefn::QNet& q,
                             const mdn::MdnNet& mdn, const numkit::Matrix& states,
                             const numkit::Matrix& actions, const TrainConfig& cfg);

using PolicyFn = std::function<std::vector<double>(std::span<const double>, numkit::Rng&)>;

// Full-mixture imitation: draw i ~ alpha(s), then a ~ component i.
PolicyFn mdn_policy_eval_adapter(const mdn::MdnNet& mdn);
PolicyFn mean_action_policy(const GaussianPolicy& pi);
PolicyFn greedy_mode_policy(const hyperq::GreedyPolicy& gp);

// Undiscounted returns of `episodes` rollouts. Deterministic given rng.
EvalReport evaluate_policy(const envs::Env& env, const PolicyFn& policy, std::size_t episodes,
                           numkit::Rng& rng, std::string policy_name = {});

}  // namespace lom::learners
