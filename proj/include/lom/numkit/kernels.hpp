#pragma once

#include <span>

#include "lom/numkit/matrix.hpp"

// Dense kernels behind MlpNet. Weights are stored input-major: W has shape
// (in x out), so y = x W + b.
//
// The default namespace holds the OpenMP kernels. Each output element is
// written by exactly one thread and summed in a fixed order, so results do not
// depend on the thread count. lom::numkit::reference keeps plain serial loops
// that the tests and the benchmark compare against.
namespace lom::numkit::kernels {

// y(B x out) = x(B x in) * w(in x out) + b(out)
void affine_forward(const Matrix& x, std::span<const double> w, std::span<const double> b,
                    Matrix& y);

// gw(in x out) += x^T * dy ; gb(out) += column sums of dy
void affine_backward_params(const Matrix& x, const Matrix& dy, std::span<double> gw,
                            std::span<double> gb);

// dx(B x in) = dy(B x out) * w^T
void affine_backward_input(const Matrix& dy, std::span<const double> w, Matrix& dx);

}  // namespace lom::numkit::kernels

namespace lom::numkit::reference {

void affine_forward(const Matrix& x, std::span<const double> w, std::span<const double> b,
                    Matrix& y);
void affine_backward_params(const Matrix& x, const Matrix& dy, std::span<double> gw,
                            std::span<double> gb);
void affine_backward_input(const Matrix& dy, std::span<const double> w, Matrix& dx);

}  // namespace lom::numkit::reference
