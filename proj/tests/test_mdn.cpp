#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fd.hpp"
#include "lom/envs.hpp"
#include "lom/errors.hpp"
#include "lom/mdn.hpp"
#include "lom/numkit/adam.hpp"

using namespace lom;
using mdn::GmmParams;
using numkit::Matrix;
using numkit::Rng;

namespace {

GmmParams make_gmm(std::vector<double> alphas, std::vector<double> mus, std::vector<double> sigmas,
                   std::size_t d) {
  GmmParams p;
  p.num_modes = alphas.size();
  p.action_dim = d;
  p.alphas = std::move(alphas);
  p.mus = std::move(mus);
  p.sigmas = std::move(sigmas);
  return p;
}

}  // namespace

TEST_CASE("decode examples") {
  const std::size_t m = 3, d = 2;
  std::vector<double> raw(mdn::MdnNet::head_width(m, d), 0.0);
  SUBCASE("equal logits give uniform alphas, zero log-sigma gives sigma 1") {
    const auto p = mdn::decode_head(raw, m, d);
    for (double a : p.alphas) CHECK(a == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    for (double s : p.sigmas) CHECK(s == 1.0);
  }
  SUBCASE("very negative log-sigma clamps to the floor") {
    raw[m * d + 1] = -100.0;
    const auto p = mdn::decode_head(raw, m, d);
    CHECK(p.sigmas[1] == mdn::kSigmaFloor);
  }
  SUBCASE("means are copied mode-major") {
    raw[2] = 0.25;  // mode 1, dim 0
    const auto p = mdn::decode_head(raw, m, d);
    CHECK(p.mu(1)[0] == 0.25);
    CHECK(mdn::mode_mean(p, 1)[0] == 0.25);
  }
  SUBCASE("non-finite output is a corrupt model") {
    raw[0] = std::nan("");
    CHECK_THROWS_AS(mdn::decode_head(raw, m, d), ModelCorruptError);
  }
}

TEST_CASE("decode always yields a valid mixture") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> raw(mdn::MdnNet::head_width(4, 2));
    for (double& v : raw) v = 30.0 * rng.normal();
    const auto p = mdn::decode_head(raw, 4, 2);
    double sum = 0.0;
    for (double a : p.alphas) sum += a;
    CHECK(std::abs(sum - 1.0) < 1e-9);
    for (double s : p.sigmas) CHECK(s >= mdn::kSigmaFloor);
  }
}

TEST_CASE("component density examples") {
  const auto p1 = make_gmm({1.0}, {0.3}, {1.0}, 1);
  const std::vector<double> a1{0.3};
  CHECK(mdn::component_density(p1, 0, a1) == doctest::Approx(1.0 / std::sqrt(2.0 * std::numbers::pi)).epsilon(1e-12));

  const auto p2 = make_gmm({1.0}, {0.1, -0.2}, {1.0}, 2);
  const std::vector<double> a2{0.1, -0.2};
  CHECK(mdn::component_density(p2, 0, a2) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-12));

  // quadrature over +-8 sigma
  const double mu = 0.7, sig = 1.0;
  const auto p3 = make_gmm({1.0}, {mu}, {sig}, 1);
  const int n = 20000;
  const double lo = mu - 8 * sig, hi = mu + 8 * sig, h = (hi - lo) / n;
  double total = 0.0;
  for (int i = 0; i <= n; ++i) {
    const std::vector<double> a{lo + i * h};
    const double w = (i == 0 || i == n) ? 0.5 : 1.0;
    total += w * mdn::component_density(p3, 0, a);
  }
  CHECK(std::abs(total * h - 1.0) < 1e-6);
}

TEST_CASE("mixture log density examples") {
  const std::vector<double> a{0.2, -0.4};
  const auto single = make_gmm({1.0}, {0.0, 0.1}, {0.3}, 2);
  CHECK(mdn::mixture_log_density(single, a) ==
        doctest::Approx(mdn::component_log_density(single, 0, a)).epsilon(1e-12));

  const auto twin = make_gmm({0.5, 0.5}, {0.0, 0.1, 0.0, 0.1}, {0.3, 0.3}, 2);
  CHECK(mdn::mixture_log_density(twin, a) ==
        doctest::Approx(mdn::mixture_log_density(single, a)).epsilon(1e-12));

  // direct summation oracle
  const auto fx = make_gmm({0.3, 0.7}, {-1.0, 1.0}, {0.5, 0.5}, 1);
  const std::vector<double> zero{0.0};
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * 0.5);
  const double direct = 0.3 * norm * std::exp(-1.0 / (2 * 0.25)) + 0.7 * norm * std::exp(-1.0 / (2 * 0.25));
  CHECK(mdn::mixture_log_density(fx, zero) == doctest::Approx(std::log(direct)).epsilon(1e-12));

  // far-away action: no underflow to -inf
  const std::vector<double> far{500.0};
  CHECK(std::isfinite(mdn::mixture_log_density(fx, far)));
}

TEST_CASE("mixture log density is permutation invariant") {
  Rng rng(6);
  for (int t = 0; t < 20; ++t) {
    const std::size_t m = 4, d = 2;
    std::vector<double> raw(mdn::MdnNet::head_width(m, d));
    for (double& v : raw) v = rng.normal();
    const auto p = mdn::decode_head(raw, m, d);
    GmmParams q = p;
    const std::size_t perm[] = {2, 0, 3, 1};
    for (std::size_t i = 0; i < m; ++i) {
      q.alphas[i] = p.alphas[perm[i]];
      q.sigmas[i] = p.sigmas[perm[i]];
      for (std::size_t k = 0; k < d; ++k) q.mus[i * d + k] = p.mus[perm[i] * d + k];
    }
    const std::vector<double> a{rng.normal(), rng.normal()};
    CHECK(mdn::mixture_log_density(p, a) == doctest::Approx(mdn::mixture_log_density(q, a)).epsilon(1e-12));
  }
}

TEST_CASE("mdn loss examples") {
  Rng rng(3);
  mdn::MdnNet net(2, 1, 1, {4});
  net.init(rng, 1.0);

  SUBCASE("spike at the action gives the batch minimum") {
    const auto last = net.net().num_layers() - 1;
    for (double& w : net.net().weights(last)) w = 0.0;
    auto b = net.net().biases(last);
    b[net.mean_index(0, 0)] = 0.4;
    b[net.log_sigma_index(0)] = -50.0;  // clamped to the floor
    Matrix s(1, 2), a(1, 1);
    a(0, 0) = 0.4;
    const auto lg = mdn::mdn_loss(net, s, a);
    const double spike = -std::log(1.0 / (std::sqrt(2.0 * std::numbers::pi) * mdn::kSigmaFloor));
    CHECK(lg.loss == doctest::Approx(spike).epsilon(1e-12));
    // any other action scores worse
    a(0, 0) = 0.401;
    CHECK(mdn::mdn_loss(net, s, a).loss > spike);
  }
  SUBCASE("duplicating the batch keeps the mean loss") {
    Matrix s(3, 2), a(3, 1), s2(6, 2), a2(6, 1);
    for (std::size_t i = 0; i < 3; ++i) {
      s(i, 0) = rng.normal();
      s(i, 1) = rng.normal();
      a(i, 0) = rng.normal();
      for (std::size_t r : {i, i + 3}) {
        s2(r, 0) = s(i, 0);
        s2(r, 1) = s(i, 1);
        a2(r, 0) = a(i, 0);
      }
    }
    const auto l1 = mdn::mdn_loss(net, s, a);
    const auto l2 = mdn::mdn_loss(net, s2, a2);
    CHECK(l1.loss == doctest::Approx(l2.loss).epsilon(1e-12));
    for (std::size_t k = 0; k < l1.grad.size(); ++k)
      CHECK(l1.grad[k] == doctest::Approx(l2.grad[k]).epsilon(1e-10));
  }
  SUBCASE("empty batch is rejected") {
    CHECK_THROWS(mdn::mdn_loss(net, Matrix(0, 2), Matrix(0, 1)));
  }
}

TEST_CASE("mdn loss gradient matches finite differences") {
  Rng rng(17);
  mdn::MdnNet net(3, 2, 3, {6, 6}, numkit::Activation::tanh);
  net.init(rng, 1.0);
  Matrix s(10, 3), a(10, 2);
  for (double& v : s.data()) v = rng.normal();
  for (double& v : a.data()) v = rng.normal();
  const auto lg = mdn::mdn_loss(net, s, a);
  const auto fd = testing::check_gradient(net.net().params(), lg.grad,
                                          [&] { return mdn::mdn_loss(net, s, a).loss; }, 60, 2);
  CHECK(fd.probes == 60);
  CHECK(fd.max_rel_error < 1e-4);
}

TEST_CASE("sample_component moments") {
  Rng rng(8);
  const auto p = make_gmm({0.5, 0.5}, {0.3, -0.6, 1.0, 2.0}, {0.2, 0.5}, 2);
  const int n = 100000;
  double m0 = 0, m1 = 0, v0 = 0, v1 = 0;
  for (int i = 0; i < n; ++i) {
    const auto a = mdn::sample_component(p, 0, rng);
    m0 += a[0];
    m1 += a[1];
    v0 += (a[0] - 0.3) * (a[0] - 0.3);
    v1 += (a[1] + 0.6) * (a[1] + 0.6);
  }
  CHECK(std::abs(m0 / n - 0.3) < 5 * 0.2 / std::sqrt(n));
  CHECK(std::abs(m1 / n + 0.6) < 5 * 0.2 / std::sqrt(n));
  CHECK(v0 / n == doctest::Approx(0.04).epsilon(0.05));
  CHECK(v1 / n == doctest::Approx(0.04).epsilon(0.05));

  const auto spike = make_gmm({1.0}, {0.25}, {mdn::kSigmaFloor}, 1);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(mdn::sample_component(spike, 0, rng)[0] - 0.25) < 0.01);
  CHECK_THROWS_AS(mdn::mode_mean(spike, 1), UsageError);
  CHECK_THROWS_AS(mdn::sample_component(spike, 1, rng), UsageError);
}

TEST_CASE("sample_mode follows alpha") {
  Rng rng(9);
  const auto p = make_gmm({0.1, 0.2, 0.7}, {0, 0, 0}, {1, 1, 1}, 1);
  const int n = 10000;
  std::vector<int> counts(3, 0);
  for (int i = 0; i < n; ++i) ++counts[mdn::sample_mode(p, rng)];
  for (std::size_t i = 0; i < 3; ++i) {
    const double sd = std::sqrt(n * p.alphas[i] * (1 - p.alphas[i]));
    CHECK(std::abs(counts[i] - n * p.alphas[i]) < 3 * sd);
  }
}

TEST_CASE("mdn loss decreases on the one-step data") {
  Rng rng(5);
  const auto env = envs::Env::onestep();
  const auto data = envs::collect_multimodal_dataset(env, 4000, rng);
  mdn::MdnNet net(1, 1, 4, {32, 32});
  net.init(rng, 1.0);
  numkit::AdamState adam(net.net().num_params(), {1e-3});
  std::vector<double> windows;
  double acc = 0.0;
  for (int step = 1; step <= 1000; ++step) {
    const auto b = envs::gather(data, envs::sample_rows(data, 64, rng));
    const auto lg = mdn::mdn_loss(net, b.s, b.a);
    numkit::adam_step(adam, net.net().params(), lg.grad);
    acc += lg.loss;
    if (step % 50 == 0) {
      windows.push_back(acc / 50.0);
      acc = 0.0;
    }
  }
  CHECK(windows.back() < windows.front() - 0.5);
  // smoothed curve: no window sits noticeably above an earlier one
  double best = windows.front();
  for (double w : windows) {
    CHECK(w < best + 0.1);
    best = std::min(best, w);
  }
}

TEST_CASE("mdn recovers well separated modes") {
  // two modes 1.2 apart with sigma 0.05 (24 sigma separation), state-independent
  Rng rng(10);
  const std::size_t n = 4000;
  envs::Dataset data;
  data.state_dim = 1;
  data.action_dim = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = rng.uniform() < 0.4 ? -0.6 : 0.6;
    data.transitions.push_back({{rng.uniform(-1, 1)}, {c + 0.05 * rng.normal()}, 0.0, {0.0}, {0.0}, true});
  }
  mdn::MdnNet net(1, 1, 2, {16, 16});
  net.init(rng, 1.0);
  numkit::AdamState adam(net.net().num_params(), {3e-3});
  for (int step = 0; step < 2000; ++step) {
    const auto b = envs::gather(data, envs::sample_rows(data, 128, rng));
    numkit::adam_step(adam, net.net().params(), mdn::mdn_loss(net, b.s, b.a).grad);
  }
  const std::vector<double> s{0.1};
  const auto p = mdn::decode(net, s);
  const double m0 = p.mu(0)[0], m1 = p.mu(1)[0];
  const double lo = std::min(m0, m1), hi = std::max(m0, m1);
  CHECK(std::abs(lo + 0.6) < 0.1);
  CHECK(std::abs(hi - 0.6) < 0.1);
  const double alpha_hi = m0 > m1 ? p.alphas[0] : p.alphas[1];
  CHECK(alpha_hi == doctest::Approx(0.6).epsilon(0.1));
}
