#include "lom/oracle.hpp"

#include <cmath>
#include <limits>

#include <nlohmann/json.hpp>

#include "lom/errors.hpp"
#include "lom/numkit/rng.hpp"

namespace lom::oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr double kSumTolerance = 1e-12;

void check_rows(const MatrixXd& m, const char* what) {
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    if ((m.row(r).array() < 0.0).any() || std::abs(m.row(r).sum() - 1.0) > kSumTolerance)
      throw UsageError(std::string(what) + ": row " + std::to_string(r) +
                       " is not a probability distribution");
  }
}

VectorXd dirichlet1(numkit::Rng& rng, std::size_t n) {
  VectorXd v(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = rng.exponential();
  return v / v.sum();
}

// P^pi(s, s') = sum_a pi(a|s) P(s'|s, a)
MatrixXd policy_transition(const TabularHMdp& mdp, const TabularPolicy& pi) {
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  MatrixXd pp(n, n);
  for (Eigen::Index s = 0; s < n; ++s) pp.row(s) = pi.row(s) * mdp.P[static_cast<std::size_t>(s)];
  return pp;
}

VectorXd policy_reward(const TabularHMdp& mdp, const TabularPolicy& pi) {
  return (pi.array() * mdp.R.array()).rowwise().sum();
}

void check_gamma(const TabularHMdp& mdp) {
  if (!(mdp.gamma >= 0.0 && mdp.gamma < 1.0))
    throw UsageError("exact evaluation needs gamma in [0, 1); the system is singular at gamma = 1");
}

void check_policy(const TabularHMdp& mdp, const TabularPolicy& pi) {
  if (pi.rows() != static_cast<Eigen::Index>(mdp.n_states) ||
      pi.cols() != static_cast<Eigen::Index>(mdp.n_actions))
    throw UsageError("policy table shape does not match the MDP");
}

nlohmann::json to_json(const MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row;
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

void TabularHMdp::validate() const {
  const auto ns = static_cast<Eigen::Index>(n_states);
  const auto na = static_cast<Eigen::Index>(n_actions);
  const auto nm = static_cast<Eigen::Index>(num_modes);
  if (P.size() != n_states || phi.size() != n_states || R.rows() != ns || R.cols() != na ||
      alpha.rows() != ns || alpha.cols() != nm)
    throw UsageError("TabularHMdp: table shapes inconsistent");
  if (!R.allFinite()) throw UsageError("TabularHMdp: non-finite reward");
  for (std::size_t s = 0; s < n_states; ++s) {
    if (P[s].rows() != na || P[s].cols() != ns || phi[s].rows() != nm || phi[s].cols() != na)
      throw UsageError("TabularHMdp: table shapes inconsistent");
    check_rows(P[s], "P");
    check_rows(phi[s], "phi");
  }
  check_rows(alpha, "alpha");
}

TabularHMdp random_instance(std::uint64_t seed, std::size_t n_states, std::size_t n_actions,
                            std::size_t num_modes, double gamma) {
  numkit::Rng rng(seed);
  TabularHMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.num_modes = num_modes;
  m.gamma = gamma;
  const auto ns = static_cast<Eigen::Index>(n_states);
  const auto na = static_cast<Eigen::Index>(n_actions);
  const auto nm = static_cast<Eigen::Index>(num_modes);
  m.R.resize(ns, na);
  m.alpha.resize(ns, nm);
  for (Eigen::Index s = 0; s < ns; ++s) {
    MatrixXd p(na, ns);
    for (Eigen::Index a = 0; a < na; ++a) p.row(a) = dirichlet1(rng, n_states).transpose();
    m.P.push_back(p);
    for (Eigen::Index a = 0; a < na; ++a) m.R(s, a) = rng.uniform();
    MatrixXd ph(nm, na);
    for (Eigen::Index u = 0; u < nm; ++u) ph.row(u) = dirichlet1(rng, n_actions).transpose();
    m.phi.push_back(ph);
    m.alpha.row(s) = dirichlet1(rng, num_modes).transpose();
  }
  return m;
}

VectorXd exact_v(const TabularHMdp& mdp, const TabularPolicy& pi) {
  check_gamma(mdp);
  check_policy(mdp, pi);
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  const MatrixXd a = MatrixXd::Identity(n, n) - mdp.gamma * policy_transition(mdp, pi);
  return a.partialPivLu().solve(policy_reward(mdp, pi));
}

MatrixXd exact_q(const TabularHMdp& mdp, const TabularPolicy& pi) {
  const VectorXd v = exact_v(mdp, pi);
  MatrixXd q = mdp.R;
  for (std::size_t s = 0; s < mdp.n_states; ++s)
    q.row(static_cast<Eigen::Index>(s)) += mdp.gamma * (mdp.P[s] * v).transpose();
  return q;
}

double bellman_residual(const TabularHMdp& mdp, const TabularPolicy& pi, const MatrixXd& q) {
  const VectorXd v = (pi.array() * q.array()).rowwise().sum();
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    const VectorXd backup = mdp.R.row(si).transpose() + mdp.gamma * (mdp.P[s] * v);
    worst = std::max(worst, (q.row(si).transpose() - backup).cwiseAbs().maxCoeff());
  }
  return worst;
}

MatrixXd advantage(const TabularHMdp& mdp, const TabularPolicy& pi) {
  const MatrixXd q = exact_q(mdp, pi);
  const VectorXd v = (pi.array() * q.array()).rowwise().sum();
  return q.colwise() - v;
}

MatrixXd occupancy(const TabularHMdp& mdp, const TabularPolicy& pi) {
  check_gamma(mdp);
  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  const MatrixXd a = MatrixXd::Identity(n, n) - mdp.gamma * policy_transition(mdp, pi);
  return (1.0 - mdp.gamma) * a.partialPivLu().inverse();
}

TabularPolicy composite_policy(const TabularHMdp& mdp, const HyperPolicy& zeta) {
  check_rows(zeta, "zeta");
  TabularPolicy pi(static_cast<Eigen::Index>(mdp.n_states), static_cast<Eigen::Index>(mdp.n_actions));
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    pi.row(si) = zeta.row(si) * mdp.phi[s];
  }
  return pi;
}

HyperQ exact_hyper_q(const TabularHMdp& mdp, const HyperPolicy& zeta) {
  check_gamma(mdp);
  const auto ns = static_cast<Eigen::Index>(mdp.n_states);
  const auto nm = static_cast<Eigen::Index>(mdp.num_modes);
  HyperQ out;

  // lifted MDP: actions are modes, P_H = phi^u P, r_H = phi^u r
  std::vector<MatrixXd> ph(mdp.n_states);
  MatrixXd rh(ns, nm);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    ph[s] = mdp.phi[s] * mdp.P[s];
    rh.row(si) = (mdp.phi[s] * mdp.R.row(si).transpose()).transpose();
  }
  MatrixXd pz(ns, ns);
  VectorXd rz(ns);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    pz.row(si) = zeta.row(si) * ph[s];
    rz(si) = zeta.row(si).dot(rh.row(si));
  }
  const VectorXd vh =
      (MatrixXd::Identity(ns, ns) - mdp.gamma * pz).partialPivLu().solve(rz);
  out.lifted.resize(ns, nm);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    out.lifted.row(si) = rh.row(si) + mdp.gamma * (ph[s] * vh).transpose();
  }

  // mixture route: expectation of the base Q under each mode
  const MatrixXd q = exact_q(mdp, composite_policy(mdp, zeta));
  out.mixture.resize(ns, nm);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const auto si = static_cast<Eigen::Index>(s);
    out.mixture.row(si) = (mdp.phi[s] * q.row(si).transpose()).transpose();
  }
  out.max_abs_diff = (out.lifted - out.mixture).cwiseAbs().maxCoeff();
  return out;
}

HyperPolicy greedy_hyper_policy(const TabularHMdp& mdp) {
  const MatrixXd qh = exact_hyper_q(mdp, mdp.alpha).lifted;
  HyperPolicy g = HyperPolicy::Zero(qh.rows(), qh.cols());
  for (Eigen::Index s = 0; s < qh.rows(); ++s) {
    Eigen::Index best = 0;
    for (Eigen::Index u = 1; u < qh.cols(); ++u)
      if (qh(s, u) > qh(s, best)) best = u;
    g(s, best) = 1.0;
  }
  return g;
}

TabularPolicy lagrangian_policy(const TabularHMdp& mdp, const TabularPolicy& pi, double beta) {
  if (!(beta > 0.0)) throw UsageError("lagrangian_policy: beta must be > 0");
  const MatrixXd adv = advantage(mdp, pi);
  TabularPolicy out = pi;
  for (Eigen::Index s = 0; s < pi.rows(); ++s) {
    // shift by the row max so small beta cannot overflow
    double hi = -std::numeric_limits<double>::infinity();
    for (Eigen::Index a = 0; a < pi.cols(); ++a)
      if (pi(s, a) > 0.0) hi = std::max(hi, adv(s, a) / beta);
    double z = 0.0;
    for (Eigen::Index a = 0; a < pi.cols(); ++a) {
      out(s, a) = pi(s, a) > 0.0 ? pi(s, a) * std::exp(adv(s, a) / beta - hi) : 0.0;
      z += out(s, a);
    }
    out.row(s) /= z;
  }
  return out;
}

Theorem1Report verify_theorem1(const TabularHMdp& mdp) {
  Theorem1Report rep;
  const TabularPolicy pb = composite_policy(mdp, mdp.alpha);
  const TabularPolicy pg = composite_policy(mdp, greedy_hyper_policy(mdp));
  rep.gap = exact_v(mdp, pg) - exact_v(mdp, pb);
  rep.min_gap = rep.gap.minCoeff();
  rep.max_gap = rep.gap.maxCoeff();
  rep.passed = rep.min_gap >= -kTheoremTolerance;
  if (!rep.passed) rep.instance = serialize(mdp);
  return rep;
}

Theorem2Report verify_theorem2(const TabularHMdp& mdp, double beta) {
  Theorem2Report rep;
  rep.beta = beta;
  const TabularPolicy pb = composite_policy(mdp, mdp.alpha);
  const TabularPolicy pg = composite_policy(mdp, greedy_hyper_policy(mdp));
  const TabularPolicy ps = lagrangian_policy(mdp, pg, beta);
  const VectorXd vb = exact_v(mdp, pb);
  const VectorXd vg = exact_v(mdp, pg);
  const VectorXd vs = exact_v(mdp, ps);
  rep.star_minus_greedy = vs - vg;
  rep.greedy_minus_behaviour = vg - vb;
  const double worst = std::min(rep.star_minus_greedy.minCoeff(), rep.greedy_minus_behaviour.minCoeff());
  rep.max_violation = std::max(0.0, -worst);
  rep.passed = worst >= -kTheoremTolerance;
  if (!rep.passed) rep.instance = serialize(mdp);
  return rep;
}

Theorem3Report verify_theorem3(const TabularHMdp& mdp, double beta) {
  Theorem3Report rep;
  rep.beta = beta;
  const double g = mdp.gamma;
  const TabularPolicy pg = composite_policy(mdp, greedy_hyper_policy(mdp));
  const TabularPolicy ps = lagrangian_policy(mdp, pg, beta);
  const MatrixXd adv = advantage(mdp, pg);
  rep.a_max = adv.cwiseAbs().maxCoeff();
  // f(s) = E_{a ~ pi*}[A^{pi_g}(s, a)]
  const VectorXd f = (ps.array() * adv.array()).rowwise().sum();
  const MatrixXd dg = occupancy(mdp, pg);
  const MatrixXd ds = occupancy(mdp, ps);
  const VectorXd vg = exact_v(mdp, pg);
  const VectorXd vs = exact_v(mdp, ps);

  const auto n = static_cast<Eigen::Index>(mdp.n_states);
  rep.lhs = vs - vg;
  rep.rhs.resize(n);
  rep.eta_hat.resize(n);
  rep.kl.resize(n);
  for (Eigen::Index s0 = 0; s0 < n; ++s0) {
    double kl = 0.0;
    for (Eigen::Index s = 0; s < n; ++s) {
      const double p = ds(s0, s);
      const double q = dg(s0, s);
      if (p <= 0.0) continue;
      if (q <= 0.0) {
        rep.skipped = true;
        rep.skip_reason = "occupancy of the greedy policy has zero mass where pi* visits";
        return rep;
      }
      kl += p * std::log(p / q);
    }
    rep.kl(s0) = std::max(kl, 0.0);
    rep.eta_hat(s0) = dg.row(s0).dot(f);
    rep.rhs(s0) = rep.eta_hat(s0) / (1.0 - g) -
                  rep.a_max / (1.0 - g) * std::sqrt(0.5 * rep.kl(s0));
  }
  rep.min_slack = (rep.lhs - rep.rhs).minCoeff();
  rep.passed = rep.min_slack >= -kTheoremTolerance;
  if (!rep.passed) rep.instance = serialize(mdp);
  return rep;
}

std::string serialize(const TabularHMdp& mdp) {
  nlohmann::json j;
  j["n_states"] = mdp.n_states;
  j["n_actions"] = mdp.n_actions;
  j["num_modes"] = mdp.num_modes;
  j["gamma"] = mdp.gamma;
  j["R"] = to_json(mdp.R);
  j["alpha"] = to_json(mdp.alpha);
  j["P"] = nlohmann::json::array();
  j["phi"] = nlohmann::json::array();
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    j["P"].push_back(to_json(mdp.P[s]));
    j["phi"].push_back(to_json(mdp.phi[s]));
  }
  return j.dump();
}

}  // namespace lom::oracle
