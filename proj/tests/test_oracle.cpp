#include <doctest.h>

#include <cmath>

#include <nlohmann/json.hpp>

#include "lom/errors.hpp"
#include "lom/oracle.hpp"

using namespace lom;
using namespace lom::oracle;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// Every action keeps the agent where it is.
TabularHMdp self_loops(std::size_t ns, std::size_t na, std::size_t m, double gamma) {
  TabularHMdp mdp;
  mdp.n_states = ns;
  mdp.n_actions = na;
  mdp.num_modes = m;
  mdp.gamma = gamma;
  for (std::size_t s = 0; s < ns; ++s) {
    MatrixXd p = MatrixXd::Zero(na, ns);
    p.col(s).setOnes();
    mdp.P.push_back(p);
    mdp.phi.push_back(MatrixXd::Constant(m, na, 1.0 / na));
  }
  mdp.R = MatrixXd::Zero(ns, na);
  mdp.alpha = MatrixXd::Constant(ns, m, 1.0 / m);
  return mdp;
}

// Value iteration for Q^pi, run to a fixed point.
MatrixXd value_iteration_q(const TabularHMdp& mdp, const TabularPolicy& pi) {
  MatrixXd q = MatrixXd::Zero(mdp.n_states, mdp.n_actions);
  for (int it = 0; it < 2000; ++it) {
    const VectorXd v = (pi.array() * q.array()).rowwise().sum();
    MatrixXd next(mdp.n_states, mdp.n_actions);
    for (std::size_t s = 0; s < mdp.n_states; ++s) next.row(s) = mdp.R.row(s) + mdp.gamma * (mdp.P[s] * v).transpose();
    const double change = (next - q).cwiseAbs().maxCoeff();
    q = next;
    if (change == 0.0) break;
  }
  return q;
}

MatrixXd one_hot_rows(std::size_t rows, std::size_t cols, std::size_t hot) {
  MatrixXd z = MatrixXd::Zero(rows, cols);
  z.col(hot).setOnes();
  return z;
}

}  // namespace

TEST_CASE("random instances are valid") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto mdp = random_instance(seed);
    CHECK_NOTHROW(mdp.validate());
    CHECK(mdp.R.minCoeff() >= 0.0);
    CHECK(mdp.R.maxCoeff() <= 1.0);
    CHECK(mdp.alpha.minCoeff() > 0.0);
  }
  auto bad = random_instance(1);
  bad.alpha(0, 0) += 1e-6;
  CHECK_THROWS_AS(bad.validate(), UsageError);
  CHECK(serialize(random_instance(1)) == serialize(random_instance(1)));
  CHECK(serialize(random_instance(1)) != serialize(random_instance(2)));
}

TEST_CASE("exact_q examples") {
  SUBCASE("gamma zero gives the rewards") {
    auto mdp = random_instance(3);
    mdp.gamma = 0.0;
    const auto pi = composite_policy(mdp, mdp.alpha);
    CHECK(exact_q(mdp, pi) == mdp.R);
  }
  SUBCASE("one absorbing state") {
    auto mdp = self_loops(1, 1, 1, 0.9);
    mdp.R(0, 0) = 1.0;
    const MatrixXd pi = MatrixXd::Ones(1, 1);
    CHECK(exact_v(mdp, pi)(0) == doctest::Approx(10.0).epsilon(1e-13));
    CHECK(exact_q(mdp, pi)(0, 0) == doctest::Approx(10.0).epsilon(1e-13));
  }
  SUBCASE("matches value iteration") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto mdp = random_instance(seed, 5, 3, 3, 0.9);
      const auto pi = composite_policy(mdp, mdp.alpha);
      const MatrixXd q = exact_q(mdp, pi);
      CHECK((q - value_iteration_q(mdp, pi)).cwiseAbs().maxCoeff() < 1e-12);
      CHECK(bellman_residual(mdp, pi, q) < 1e-10);
    }
  }
  SUBCASE("gamma one is singular") {
    auto mdp = random_instance(4);
    mdp.gamma = 1.0;
    CHECK_THROWS_AS(exact_q(mdp, composite_policy(mdp, mdp.alpha)), UsageError);
  }
}

TEST_CASE("occupancies are distributions") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto mdp = random_instance(seed);
    const auto d = occupancy(mdp, composite_policy(mdp, mdp.alpha));
    CHECK(d.minCoeff() >= 0.0);
    for (Eigen::Index s = 0; s < d.rows(); ++s) CHECK(std::abs(d.row(s).sum() - 1.0) < 1e-10);
  }
}

TEST_CASE("composite policy examples") {
  const auto mdp = random_instance(5);
  for (std::size_t u = 0; u < mdp.num_modes; ++u) {
    const auto pi = composite_policy(mdp, one_hot_rows(mdp.n_states, mdp.num_modes, u));
    for (std::size_t s = 0; s < mdp.n_states; ++s)
      CHECK((pi.row(s) - mdp.phi[s].row(u)).cwiseAbs().maxCoeff() < 1e-15);
  }
  const auto pb = composite_policy(mdp, mdp.alpha);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const VectorXd mix = mdp.phi[s].transpose() * mdp.alpha.row(s).transpose();
    CHECK((pb.row(s).transpose() - mix).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(std::abs(pb.row(s).sum() - 1.0) < 1e-12);
  }

  const auto single = random_instance(6, 5, 4, 1);
  const MatrixXd zeta = MatrixXd::Ones(5, 1);
  const auto p1 = composite_policy(single, zeta);
  for (std::size_t s = 0; s < 5; ++s) CHECK((p1.row(s) - single.phi[s].row(0)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("hyper Q-function examples") {
  SUBCASE("gamma zero gives the mode rewards both ways") {
    auto mdp = random_instance(7);
    mdp.gamma = 0.0;
    const auto h = exact_hyper_q(mdp, mdp.alpha);
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      const VectorXd rh = mdp.phi[s] * mdp.R.row(s).transpose();
      for (std::size_t u = 0; u < mdp.num_modes; ++u) {
        CHECK(h.lifted(s, u) == doctest::Approx(rh(u)).epsilon(1e-13));
        CHECK(h.mixture(s, u) == doctest::Approx(rh(u)).epsilon(1e-13));
      }
    }
  }
  SUBCASE("one mode gives the behaviour value") {
    const auto mdp = random_instance(8, 5, 4, 1);
    const auto h = exact_hyper_q(mdp, mdp.alpha);
    const VectorXd vb = exact_v(mdp, composite_policy(mdp, mdp.alpha));
    CHECK((h.lifted.col(0) - vb).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((h.mixture.col(0) - vb).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("lifted and mixture forms agree on random instances") {
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto mdp = random_instance(seed);
      const auto h = exact_hyper_q(mdp, mdp.alpha);
      CHECK(h.max_abs_diff < 1e-9);
      CHECK((h.lifted - h.mixture).cwiseAbs().maxCoeff() == doctest::Approx(h.max_abs_diff));
    }
  }
}

TEST_CASE("greedy hyper-policy and Lagrangian policy shapes") {
  const auto mdp = random_instance(9);
  const auto zg = greedy_hyper_policy(mdp);
  const auto h = exact_hyper_q(mdp, mdp.alpha);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    Eigen::Index best;
    h.mixture.row(s).maxCoeff(&best);
    CHECK(zg(s, best) == 1.0);
    CHECK(zg.row(s).sum() == 1.0);
  }
  const auto pg = composite_policy(mdp, zg);
  const auto ps = lagrangian_policy(mdp, pg, 2.0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) CHECK(std::abs(ps.row(s).sum() - 1.0) < 1e-12);
  CHECK_THROWS_AS(lagrangian_policy(mdp, pg, 0.0), UsageError);
}

TEST_CASE("greedy mode selection never loses to the behaviour policy") {
  SUBCASE("identical modes give no gap") {
    auto mdp = random_instance(10);
    for (std::size_t s = 0; s < mdp.n_states; ++s)
      for (std::size_t u = 1; u < mdp.num_modes; ++u) mdp.phi[s].row(u) = mdp.phi[s].row(0);
    const auto rep = verify_theorem1(mdp);
    CHECK(rep.passed);
    CHECK(rep.gap.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("a dominating mode gives a strict gap where it is not already certain") {
    // two absorbing states; mode 1 always plays the paying action
    auto mdp = self_loops(2, 2, 2, 0.9);
    mdp.R << 0.0, 1.0, 0.0, 1.0;
    for (std::size_t s = 0; s < 2; ++s) mdp.phi[s] << 1.0, 0.0, 0.0, 1.0;
    mdp.alpha << 0.5, 0.5, 0.0, 1.0;
    mdp.validate();
    const auto rep = verify_theorem1(mdp);
    CHECK(rep.passed);
    CHECK(rep.gap(0) == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(std::abs(rep.gap(1)) < 1e-12);
    CHECK(rep.instance.empty());
  }
  SUBCASE("random instances") {
    double best = 0.0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const auto rep = verify_theorem1(random_instance(seed));
      CHECK(rep.passed);
      best = std::max(best, rep.max_gap);
    }
    CHECK(best > 0.01);
  }
}

TEST_CASE("the Lagrangian policy improves on the greedy one") {
  SUBCASE("random instances") {
    for (double beta : {0.5, 5.0, 50.0})
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto rep = verify_theorem2(random_instance(seed), beta);
        CHECK(rep.passed);
        CHECK(rep.max_violation == 0.0);
      }
  }
  SUBCASE("large beta recovers the greedy policy") {
    for (std::uint64_t seed = 0; seed < 20; ++seed)
      CHECK(verify_theorem2(random_instance(seed), 1e6).star_minus_greedy.cwiseAbs().maxCoeff() < 1e-3);
  }
  SUBCASE("flat advantage leaves the policy unchanged") {
    auto mdp = self_loops(3, 3, 2, 0.9);
    mdp.R.setConstant(0.4);
    mdp.phi[1] << 0.2, 0.3, 0.5, 0.6, 0.2, 0.2;
    mdp.validate();
    const auto pg = composite_policy(mdp, greedy_hyper_policy(mdp));
    CHECK(advantage(mdp, pg).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((lagrangian_policy(mdp, pg, 0.5) - pg).cwiseAbs().maxCoeff() < 1e-12);
    const auto rep = verify_theorem2(mdp, 0.5);
    CHECK(rep.star_minus_greedy.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("the improvement bound holds") {
  SUBCASE("flat advantage makes both sides vanish") {
    auto mdp = self_loops(3, 3, 2, 0.9);
    mdp.R.setConstant(0.7);
    const auto rep = verify_theorem3(mdp, 5.0);
    CHECK(rep.passed);
    CHECK(rep.lhs.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(rep.rhs.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random instances") {
    for (double beta : {0.5, 5.0, 50.0})
      for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto rep = verify_theorem3(random_instance(seed), beta);
        CHECK_FALSE(rep.skipped);
        CHECK(rep.passed);
        CHECK(rep.kl.minCoeff() >= 0.0);
        // eta_hat is an expected advantage of pi* under pi_g, so it is nonnegative
        CHECK(rep.eta_hat.minCoeff() >= -1e-12);
      }
  }
}

TEST_CASE("serialised instances round-trip through JSON") {
  const auto mdp = random_instance(12);
  const auto j = nlohmann::json::parse(serialize(mdp));
  CHECK(j["n_states"] == 5);
  CHECK(j["num_modes"] == 3);
  CHECK(j["P"].size() == 5);
  CHECK(j["R"][2][1].get<double>() == mdp.R(2, 1));
}
