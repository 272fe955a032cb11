#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

// Exact tabular machinery for the hyper-MDP. Modes are categorical action
// distributions here instead of Gaussians; none of the hyper-MDP algebra
// depends on the component family.
namespace lom::oracle {

// Row s is a distribution over actions.
using TabularPolicy = Eigen::MatrixXd;
// Row s is a distribution over modes.
using HyperPolicy = Eigen::MatrixXd;

struct TabularHMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  std::size_t num_modes = 0;
  double gamma = 0.9;
  std::vector<Eigen::MatrixXd> P;    // P[s](a, s') = P(s' | s, a)
  Eigen::MatrixXd R;                 // R(s, a)
  std::vector<Eigen::MatrixXd> phi;  // phi[s](u, a) = phi^u(a | s)
  Eigen::MatrixXd alpha;             // alpha(s, u)

  // Throws UsageError when any distribution is off by more than 1e-12.
  void validate() const;
};

// Dirichlet(1) rows for P, phi and alpha; rewards uniform in [0, 1].
TabularHMdp random_instance(std::uint64_t seed, std::size_t n_states = 5, std::size_t n_actions = 4,
                            std::size_t num_modes = 3, double gamma = 0.9);

// Solves (I - gamma P^pi) V = r^pi with a direct LU solve.
Eigen::VectorXd exact_v(const TabularHMdp& mdp, const TabularPolicy& pi);
// Q(s, a) = r(s, a) + gamma sum_s' P(s'|s, a) V(s'). Throws UsageError for gamma >= 1.
Eigen::MatrixXd exact_q(const TabularHMdp& mdp, const TabularPolicy& pi);
// max |Q - (R + gamma P (pi . Q))|
double bellman_residual(const TabularHMdp& mdp, const TabularPolicy& pi, const Eigen::MatrixXd& q);
Eigen::MatrixXd advantage(const TabularHMdp& mdp, const TabularPolicy& pi);

// Row s0 is the (1 - gamma)-normalised discounted state occupancy from s0.
Eigen::MatrixXd occupancy(const TabularHMdp& mdp, const TabularPolicy& pi);

// pi_zeta(a | s) = sum_u zeta(u | s) phi^u(a | s)
TabularPolicy composite_policy(const TabularHMdp& mdp, const HyperPolicy& zeta);

struct HyperQ {
  Eigen::MatrixXd lifted;   // evaluated in the lifted MDP over modes
  Eigen::MatrixXd mixture;  // sum_a phi^u(a|s) Q^{pi_zeta}(s, a)
  double max_abs_diff = 0.0;
};

HyperQ exact_hyper_q(const TabularHMdp& mdp, const HyperPolicy& zeta);

// One-hot hyper-policy on argmax_u Q_H^{alpha}(s, u), ties to the lowest index.
HyperPolicy greedy_hyper_policy(const TabularHMdp& mdp);

// pi*(a|s) proportional to pi(a|s) exp(A^pi(s, a) / beta).
TabularPolicy lagrangian_policy(const TabularHMdp& mdp, const TabularPolicy& pi, double beta);

struct Theorem1Report {
  bool passed = true;
  Eigen::VectorXd gap;  // V^{pi_g} - V^{pi_b}
  double min_gap = 0.0;
  double max_gap = 0.0;
  std::string instance;  // serialised only on failure
};

struct Theorem2Report {
  bool passed = true;
  double beta = 0.0;
  Eigen::VectorXd star_minus_greedy;      // V^{pi*} - V^{pi_g}
  Eigen::VectorXd greedy_minus_behaviour; // V^{pi_g} - V^{pi_b}
  double max_violation = 0.0;
  std::string instance;
};

struct Theorem3Report {
  bool passed = true;
  bool skipped = false;
  std::string skip_reason;
  double beta = 0.0;
  Eigen::VectorXd lhs;  // V^{pi*}(s) - V^{pi_g}(s)
  Eigen::VectorXd rhs;  // eta_hat / (1-gamma) - A_max / (1-gamma) * sqrt(KL / 2)
  Eigen::VectorXd eta_hat;
  Eigen::VectorXd kl;
  double a_max = 0.0;
  double min_slack = 0.0;  // min over s of lhs - rhs
  std::string instance;
};

inline constexpr double kTheoremTolerance = 1e-9;

Theorem1Report verify_theorem1(const TabularHMdp& mdp);
Theorem2Report verify_theorem2(const TabularHMdp& mdp, double beta);
// The occupancies are taken per start state, so every state gets its own
// eta_hat and KL term.
Theorem3Report verify_theorem3(const TabularHMdp& mdp, double beta);

// JSON dump of an instance for triage.
std::string serialize(const TabularHMdp& mdp);

}  // namespace lom::oracle
