#include <doctest.h>

#include <cmath>
#include <omp.h>

#include "fd.hpp"
#include "lom/errors.hpp"
#include "lom/numkit/adam.hpp"
#include "lom/numkit/kernels.hpp"
#include "lom/numkit/mathx.hpp"
#include "lom/numkit/matrix.hpp"
#include "lom/numkit/mlp.hpp"
#include "lom/numkit/rng.hpp"

using namespace lom;
using numkit::Activation;
using numkit::Matrix;
using numkit::MlpNet;
using numkit::Rng;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

std::vector<double> random_vector(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return v;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("matrix is row-major and zero-filled") {
  Matrix m(2, 3);
  CHECK(m.size() == 6);
  m(1, 2) = 5.0;
  CHECK(m.data()[5] == 5.0);
  CHECK(m.row(1)[2] == 5.0);
  CHECK(m.all_finite());
  m(0, 0) = std::nan("");
  CHECK_FALSE(m.all_finite());
  const std::vector<double> v{1, 2, 3};
  const auto r = Matrix::from_row(v);
  CHECK(r.rows() == 1);
  CHECK(r.cols() == 3);
  CHECK(r(0, 1) == 2.0);
}

TEST_CASE("openmp kernels agree with the serial reference") {
  Rng rng(3);
  // small shapes stay serial, the last ones cross the parallel threshold
  const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {17, 9, 4}, {256, 64, 64}, {512, 130, 67}};
  for (const auto& s : shapes) {
    const auto [batch, in, out] = std::tuple{s[0], s[1], s[2]};
    const Matrix x = random_matrix(batch, in, rng);
    const Matrix dy = random_matrix(batch, out, rng);
    const auto w = random_vector(in * out, rng);
    const auto b = random_vector(out, rng);

    Matrix y1, y2;
    numkit::kernels::affine_forward(x, w, b, y1);
    numkit::reference::affine_forward(x, w, b, y2);
    CHECK(max_abs_diff(y1.data(), y2.data()) < 1e-12);

    std::vector<double> gw1(in * out, 0.5), gb1(out, 0.5), gw2(in * out, 0.5), gb2(out, 0.5);
    numkit::kernels::affine_backward_params(x, dy, gw1, gb1);
    numkit::reference::affine_backward_params(x, dy, gw2, gb2);
    CHECK(max_abs_diff(gw1, gw2) < 1e-10);
    CHECK(max_abs_diff(gb1, gb2) < 1e-10);

    Matrix dx1, dx2;
    numkit::kernels::affine_backward_input(dy, w, dx1);
    numkit::reference::affine_backward_input(dy, w, dx2);
    CHECK(max_abs_diff(dx1.data(), dx2.data()) < 1e-10);
  }
}

TEST_CASE("kernel results do not depend on the thread count") {
  Rng rng(4);
  const Matrix x = random_matrix(512, 96, rng);
  const Matrix dy = random_matrix(512, 80, rng);
  const auto w = random_vector(96 * 80, rng);
  const auto b = random_vector(80, rng);
  auto run = [&](int threads) {
    omp_set_num_threads(threads);
    Matrix y, dx;
    std::vector<double> gw(96 * 80, 0.0), gb(80, 0.0);
    numkit::kernels::affine_forward(x, w, b, y);
    numkit::kernels::affine_backward_params(x, dy, gw, gb);
    numkit::kernels::affine_backward_input(dy, w, dx);
    return std::tuple{y, dx, gw, gb};
  };
  const auto one = run(1);
  const auto four = run(4);
  omp_set_num_threads(1);
  CHECK(one == four);
}

TEST_CASE("rng streams are reproducible and splits ignore consumption") {
  Rng a(42), b(42);
  for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
  Rng c(42);
  const auto before = c.split("dataset");
  for (int i = 0; i < 10; ++i) c.normal();
  auto after = c.split("dataset");
  auto before_copy = before;
  CHECK(before_copy.next_u64() == after.next_u64());
  auto d1 = Rng(42).split("dataset");
  auto d2 = Rng(42).split("train");
  CHECK(d1.next_u64() != d2.next_u64());
  CHECK(Rng(1).split(std::uint64_t{3}).next_u64() != Rng(1).split(std::uint64_t{4}).next_u64());
}

TEST_CASE("rng distributions have the right moments") {
  Rng rng(9);
  const int n = 200000;
  double su = 0, sn = 0, sn2 = 0, se = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    CHECK_UNARY(u >= 0.0);
    CHECK_UNARY(u < 1.0);
    su += u;
    const double z = rng.normal();
    sn += z;
    sn2 += z * z;
    se += rng.exponential();
  }
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sn / n) < 5.0 / std::sqrt(n));
  CHECK(sn2 / n == doctest::Approx(1.0).epsilon(0.02));
  CHECK(se / n == doctest::Approx(1.0).epsilon(0.02));
  std::vector<int> counts(7, 0);
  for (int i = 0; i < 70000; ++i) ++counts[rng.index(7)];
  for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("softmax examples") {
  const std::vector<double> equal(5, 0.3);
  for (double p : numkit::softmax(equal)) CHECK(p == doctest::Approx(0.2).epsilon(1e-12));

  const std::vector<double> two{std::log(2.0), 0.0};
  const auto p = numkit::softmax(two);
  CHECK(p[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  const std::vector<double> big{1000.0, 0.0};
  const auto q = numkit::softmax(big);
  CHECK(std::isfinite(q[0]));
  CHECK(q[0] == doctest::Approx(1.0));
  CHECK(q[1] < 1e-300);
}

TEST_CASE("softmax sums to one and is shift invariant") {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    auto z = random_vector(1 + rng.index(10), rng);
    for (double& v : z) v *= 20.0;
    const auto p = numkit::softmax(z);
    double sum = 0.0;
    for (double v : p) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
    auto shifted = z;
    for (double& v : shifted) v += 123.0;
    CHECK(max_abs_diff(p, numkit::softmax(shifted)) < 1e-12);
  }
}

TEST_CASE("log_sum_exp is stable") {
  const std::vector<double> v{1000.0, 1000.0};
  CHECK(numkit::log_sum_exp(v) == doctest::Approx(1000.0 + std::log(2.0)));
  const std::vector<double> w{-1000.0, -1001.0};
  CHECK(numkit::log_sum_exp(w) == doctest::Approx(-1000.0 + std::log1p(std::exp(-1.0))));
}

TEST_CASE("mlp forward examples") {
  SUBCASE("zero weights give the bias") {
    MlpNet net({3, 4, 2});
    for (double& p : net.params()) p = 0.0;
    net.biases(1)[0] = 0.7;
    net.biases(1)[1] = -1.5;
    const auto y = net.forward(std::vector<double>{1.0, -2.0, 3.0});
    CHECK(y[0] == 0.7);
    CHECK(y[1] == -1.5);
  }
  SUBCASE("identity layer") {
    MlpNet net({3, 3});
    for (double& p : net.params()) p = 0.0;
    for (std::size_t i = 0; i < 3; ++i) net.weights(0)[i * 3 + i] = 1.0;
    const std::vector<double> x{0.5, -4.0, 2.5};
    CHECK(net.forward(x) == x);
  }
  SUBCASE("dimension mismatch") {
    MlpNet net({3, 2});
    CHECK_THROWS_AS(net.forward(std::vector<double>{1.0, 2.0}), ConfigError);
    CHECK_THROWS_AS(MlpNet({3}), ConfigError);
  }
  SUBCASE("zero input gives finite output") {
    Rng rng(2);
    MlpNet net({4, 16, 16, 3});
    net.init(rng);
    for (double v : net.forward(std::vector<double>(4, 0.0))) CHECK(std::isfinite(v));
  }
}

TEST_CASE("mlp batch forward matches per-sample forward") {
  Rng rng(8);
  MlpNet net({5, 7, 3}, Activation::tanh);
  net.init(rng);
  const Matrix x = random_matrix(6, 5, rng);
  const Matrix y = net.forward(x);
  for (std::size_t i = 0; i < 6; ++i) CHECK(max_abs_diff(y.row(i), net.forward(x.row(i))) < 1e-14);
}

TEST_CASE("mlp backward examples") {
  SUBCASE("zero upstream gradient") {
    Rng rng(1);
    MlpNet net({3, 5, 2});
    net.init(rng);
    const auto g = net.backward(std::vector<double>{1, 2, 3}, std::vector<double>{0, 0});
    for (double v : g) CHECK(v == 0.0);
  }
  SUBCASE("linear 1-1 net") {
    MlpNet net({1, 1});
    net.weights(0)[0] = 3.0;
    net.biases(0)[0] = 0.0;
    const auto g = net.backward(std::vector<double>{2.5}, std::vector<double>{1.0});
    CHECK(g[0] == 2.5);  // dy/dw = x
    CHECK(g[1] == 1.0);  // dy/db
  }
  SUBCASE("shape mismatch") {
    MlpNet net({2, 2});
    CHECK_THROWS_AS(net.backward(std::vector<double>{1, 2}, std::vector<double>{1}), ConfigError);
  }
}

TEST_CASE("mlp gradients match finite differences") {
  for (Activation act : {Activation::tanh, Activation::relu, Activation::identity}) {
    CAPTURE(numkit::to_string(act));
    Rng rng(11);
    MlpNet net({2, 4, 1}, act);
    net.init(rng);
    const Matrix x = random_matrix(8, 2, rng);
    const Matrix t = random_matrix(8, 1, rng);
    auto loss = [&] {
      const Matrix y = net.forward(x);
      double l = 0.0;
      for (std::size_t i = 0; i < 8; ++i) l += 0.5 * (y(i, 0) - t(i, 0)) * (y(i, 0) - t(i, 0));
      return l;
    };
    numkit::MlpNet::Tape tape;
    const Matrix y = net.forward(x, tape);
    Matrix dy(8, 1);
    for (std::size_t i = 0; i < 8; ++i) dy(i, 0) = y(i, 0) - t(i, 0);
    auto grad = net.zero_grad();
    net.backward(tape, dy, grad);
    const auto fd = testing::check_gradient(net.params(), grad, loss, 100, 7);
    CHECK(fd.probes == net.num_params());
    CHECK(fd.max_rel_error < 1e-4);
  }
}

TEST_CASE("mlp input gradient matches finite differences") {
  Rng rng(12);
  MlpNet net({3, 6, 6, 2}, Activation::tanh);
  net.init(rng);
  Matrix x = random_matrix(4, 3, rng);
  const Matrix w = random_matrix(4, 2, rng);
  numkit::MlpNet::Tape tape;
  net.forward(x, tape);
  auto grad = net.zero_grad();
  Matrix dx;
  net.backward(tape, w, grad, &dx);
  auto loss = [&] {
    const Matrix y = net.forward(x);
    double l = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) l += y.data()[i] * w.data()[i];
    return l;
  };
  const auto fd = testing::check_gradient(x.data(), dx.data(), loss, 12, 1);
  CHECK(fd.max_rel_error < 1e-4);
}

TEST_CASE("activation names round-trip") {
  for (Activation a : {Activation::relu, Activation::tanh, Activation::identity})
    CHECK(numkit::activation_from_string(numkit::to_string(a)) == a);
  CHECK_THROWS_AS(numkit::activation_from_string("gelu"), ConfigError);
}

TEST_CASE("adam examples") {
  SUBCASE("zero gradient leaves params alone") {
    numkit::AdamState st(3);
    std::vector<double> p{1.0, -2.0, 3.0};
    const auto before = p;
    numkit::adam_step(st, p, std::vector<double>(3, 0.0));
    CHECK(p == before);
    CHECK(st.step == 1);
  }
  SUBCASE("first step moves by lr") {
    numkit::AdamState st(1, {0.001});
    std::vector<double> p{0.0};
    numkit::adam_step(st, p, std::vector<double>{1.0});
    // m_hat = 1, v_hat = 1, so the step is lr / (1 + eps)
    CHECK(p[0] == doctest::Approx(-0.001 / (1.0 + 1e-8)).epsilon(1e-12));
  }
  SUBCASE("constant gradient moves monotonically against its sign") {
    numkit::AdamState st(2);
    std::vector<double> p{0.0, 0.0};
    double last0 = 0.0, last1 = 0.0;
    for (int i = 0; i < 200; ++i) {
      numkit::adam_step(st, p, std::vector<double>{0.3, -2.0});
      CHECK(p[0] < last0);
      CHECK(p[1] > last1);
      last0 = p[0];
      last1 = p[1];
    }
  }
  SUBCASE("non-finite gradient throws without touching state") {
    numkit::AdamState st(2);
    std::vector<double> p{1.0, 2.0};
    CHECK_THROWS_AS(numkit::adam_step(st, p, std::vector<double>{1.0, std::nan("")}),
                    DivergenceError);
    CHECK(p == std::vector<double>{1.0, 2.0});
    CHECK(st.step == 0);
  }
  SUBCASE("shape mismatch") {
    numkit::AdamState st(2);
    std::vector<double> p{1.0};
    CHECK_THROWS_AS(numkit::adam_step(st, p, std::vector<double>{1.0}), ConfigError);
  }
}

TEST_CASE("identical seeds give identical training trajectories") {
  auto train = [] {
    Rng rng(21);
    MlpNet net({2, 8, 1});
    net.init(rng);
    numkit::AdamState st(net.num_params(), {1e-2});
    for (int it = 0; it < 50; ++it) {
      Matrix x(16, 2), dy(16, 1);
      for (double& v : x.data()) v = rng.uniform(-1, 1);
      numkit::MlpNet::Tape tape;
      const Matrix y = net.forward(x, tape);
      for (std::size_t i = 0; i < 16; ++i) dy(i, 0) = y(i, 0) - x(i, 0) * x(i, 1);
      auto g = net.zero_grad();
      net.backward(tape, dy, g);
      numkit::adam_step(st, net.params(), g);
    }
    return net;
  };
  CHECK(train() == train());
}
