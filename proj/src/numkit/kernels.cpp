#include "lom/numkit/kernels.hpp"

#include <cstddef>

namespace lom::numkit {

namespace {

// Below this many multiply-adds the fork/join cost outweighs the work.
constexpr std::size_t kParallelWork = 1u << 15;

}  // namespace

namespace kernels {

void affine_forward(const Matrix& x, std::span<const double> w, std::span<const double> b,
                    Matrix& y) {
  const std::size_t batch = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out = b.size();
  y.resize(batch, out);
  const double* wp = w.data();
  const double* bp = b.data();
  const long n = static_cast<long>(batch);

#pragma omp parallel for schedule(static) if (batch * in * out > kParallelWork)
  for (long i = 0; i < n; ++i) {
    double* yr = y.row(static_cast<std::size_t>(i)).data();
    const double* xr = x.row(static_cast<std::size_t>(i)).data();
    for (std::size_t j = 0; j < out; ++j) yr[j] = bp[j];
    for (std::size_t k = 0; k < in; ++k) {
      const double xk = xr[k];
      if (xk == 0.0) continue;  // ReLU outputs are often exactly zero
      const double* wr = wp + k * out;
      for (std::size_t j = 0; j < out; ++j) yr[j] += xk * wr[j];
    }
  }
}

void affine_backward_params(const Matrix& x, const Matrix& dy, std::span<double> gw,
                            std::span<double> gb) {
  const std::size_t batch = x.rows();
  const std::size_t in = x.cols();
  const std::size_t out = dy.cols();
  double* gwp = gw.data();
  const long n_in = static_cast<long>(in);

#pragma omp parallel for schedule(static) if (batch * in * out > kParallelWork)
  for (long k = 0; k < n_in; ++k) {
    double* gr = gwp + static_cast<std::size_t>(k) * out;
    for (std::size_t i = 0; i < batch; ++i) {
      const double xk = x(i, static_cast<std::size_t>(k));
      if (xk == 0.0) continue;
      const double* dr = dy.row(i).data();
      for (std::size_t j = 0; j < out; ++j) gr[j] += xk * dr[j];
    }
  }
  for (std::size_t i = 0; i < batch; ++i) {
    const double* dr = dy.row(i).data();
    for (std::size_t j = 0; j < out; ++j) gb[j] += dr[j];
  }
}

void affine_backward_input(const Matrix& dy, std::span<const double> w, Matrix& dx) {
  const std::size_t batch = dy.rows();
  const std::size_t out = dy.cols();
  const std::size_t in = w.size() / out;
  dx.resize(batch, in);
  const double* wp = w.data();
  const long n = static_cast<long>(batch);

#pragma omp parallel for schedule(static) if (batch * in * out > kParallelWork)
  for (long i = 0; i < n; ++i) {
    const double* dr = dy.row(static_cast<std::size_t>(i)).data();
    double* xr = dx.row(static_cast<std::size_t>(i)).data();
    for (std::size_t k = 0; k < in; ++k) {
      const double* wr = wp + k * out;
      // four independent partial sums let the compiler vectorise without
      // reassociating a single accumulator
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t j = 0;
      for (; j + 4 <= out; j += 4) {
        s0 += dr[j] * wr[j];
        s1 += dr[j + 1] * wr[j + 1];
        s2 += dr[j + 2] * wr[j + 2];
        s3 += dr[j + 3] * wr[j + 3];
      }
      for (; j < out; ++j) s0 += dr[j] * wr[j];
      xr[k] = (s0 + s1) + (s2 + s3);
    }
  }
}

}  // namespace kernels

namespace reference {

void affine_forward(const Matrix& x, std::span<const double> w, std::span<const double> b,
                    Matrix& y) {
  const std::size_t in = x.cols();
  const std::size_t out = b.size();
  y.resize(x.rows(), out);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    for (std::size_t j = 0; j < out; ++j) {
      double s = b[j];
      for (std::size_t k = 0; k < in; ++k) s += x(i, k) * w[k * out + j];
      y(i, j) = s;
    }
  }
}

void affine_backward_params(const Matrix& x, const Matrix& dy, std::span<double> gw,
                            std::span<double> gb) {
  const std::size_t in = x.cols();
  const std::size_t out = dy.cols();
  for (std::size_t k = 0; k < in; ++k) {
    for (std::size_t j = 0; j < out; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < x.rows(); ++i) s += x(i, k) * dy(i, j);
      gw[k * out + j] += s;
    }
  }
  for (std::size_t j = 0; j < out; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < dy.rows(); ++i) s += dy(i, j);
    gb[j] += s;
  }
}

void affine_backward_input(const Matrix& dy, std::span<const double> w, Matrix& dx) {
  const std::size_t out = dy.cols();
  const std::size_t in = w.size() / out;
  dx.resize(dy.rows(), in);
  for (std::size_t i = 0; i < dy.rows(); ++i) {
    for (std::size_t k = 0; k < in; ++k) {
      double s = 0.0;
      for (std::size_t j = 0; j < out; ++j) s += dy(i, j) * w[k * out + j];
      dx(i, k) = s;
    }
  }
}

}  // namespace reference

}  // namespace lom::numkit
