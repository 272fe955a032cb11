#include "lom/numkit/mlp.hpp"

#include <cmath>
#include <string>

#include "lom/errors.hpp"
#include "lom/numkit/kernels.hpp"

namespace lom::numkit {

namespace {

void activate(Activation a, Matrix& m) {
  switch (a) {
    case Activation::relu:
      for (double& v : m.data()) v = v > 0.0 ? v : 0.0;
      break;
    case Activation::tanh:
      for (double& v : m.data()) v = std::tanh(v);
      break;
    case Activation::identity:
      break;
  }
}

// grad *= f'(pre), where post = f(pre) is the layer output.
void activation_backward(Activation a, const Matrix& pre, const Matrix& post, Matrix& grad) {
  auto g = grad.data();
  switch (a) {
    case Activation::relu: {
      auto p = pre.data();
      for (std::size_t i = 0; i < g.size(); ++i)
        if (!(p[i] > 0.0)) g[i] = 0.0;
      break;
    }
    case Activation::tanh: {
      auto y = post.data();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] *= 1.0 - y[i] * y[i];
      break;
    }
    case Activation::identity:
      break;
  }
}

}  // namespace

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::identity: return "identity";
  }
  return "relu";
}

Activation activation_from_string(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "identity") return Activation::identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

MlpNet::MlpNet(std::vector<std::size_t> widths, Activation hidden)
    : widths_(std::move(widths)), hidden_(hidden) {
  if (widths_.size() < 2) throw ConfigError("MlpNet needs at least an input and an output width");
  for (std::size_t w : widths_)
    if (w == 0) throw ConfigError("MlpNet layer widths must be positive");
  offsets_.clear();
  std::size_t total = 0;
  for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
    offsets_.push_back(total);
    total += widths_[l] * widths_[l + 1] + widths_[l + 1];
  }
  params_.assign(total, 0.0);
}

void MlpNet::init(Rng& rng) {
  for (std::size_t l = 0; l < num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
    for (double& w : weights(l)) w = rng.uniform(-bound, bound);
    for (double& b : biases(l)) b = rng.uniform(-bound, bound);
  }
}

std::span<double> MlpNet::weights(std::size_t layer) {
  return {params_.data() + weight_offset(layer), widths_[layer] * widths_[layer + 1]};
}

std::span<const double> MlpNet::weights(std::size_t layer) const {
  return {params_.data() + weight_offset(layer), widths_[layer] * widths_[layer + 1]};
}

std::span<double> MlpNet::biases(std::size_t layer) {
  return {params_.data() + weight_offset(layer) + widths_[layer] * widths_[layer + 1],
          widths_[layer + 1]};
}

std::span<const double> MlpNet::biases(std::size_t layer) const {
  return {params_.data() + weight_offset(layer) + widths_[layer] * widths_[layer + 1],
          widths_[layer + 1]};
}

std::vector<double> MlpNet::forward(std::span<const double> input) const {
  Matrix out = forward(Matrix::from_row(input));
  return {out.data().begin(), out.data().end()};
}

Matrix MlpNet::forward(const Matrix& input) const {
  Tape tape;
  return forward(input, tape);
}

Matrix MlpNet::forward(const Matrix& input, Tape& tape) const {
  if (input.cols() != input_width())
    throw ConfigError("MlpNet input width " + std::to_string(input.cols()) + " != expected " +
                      std::to_string(input_width()));
  const std::size_t layers = num_layers();
  tape.inputs.resize(layers);
  tape.preacts.resize(layers - 1);
  tape.inputs[0] = input;
  Matrix out;
  for (std::size_t l = 0; l < layers; ++l) {
    Matrix& dst = (l + 1 < layers) ? tape.preacts[l] : out;
    kernels::affine_forward(tape.inputs[l], weights(l), biases(l), dst);
    if (l + 1 < layers) {
      tape.inputs[l + 1] = dst;
      activate(hidden_, tape.inputs[l + 1]);
    }
  }
  return out;
}

void MlpNet::backward(const Tape& tape, const Matrix& output_grad, std::span<double> grad,
                      Matrix* input_grad) const {
  const std::size_t layers = num_layers();
  if (tape.inputs.size() != layers || output_grad.cols() != output_width() ||
      output_grad.rows() != tape.inputs[0].rows() || grad.size() != params_.size())
    throw ConfigError("MlpNet::backward shape mismatch");

  Matrix delta = output_grad;
  Matrix next;
  for (std::size_t l = layers; l-- > 0;) {
    const std::size_t off = weight_offset(l);
    const std::size_t nw = widths_[l] * widths_[l + 1];
    kernels::affine_backward_params(tape.inputs[l], delta, grad.subspan(off, nw),
                                    grad.subspan(off + nw, widths_[l + 1]));
    if (l > 0) {
      kernels::affine_backward_input(delta, weights(l), next);
      activation_backward(hidden_, tape.preacts[l - 1], tape.inputs[l], next);
      std::swap(delta, next);
    } else if (input_grad != nullptr) {
      kernels::affine_backward_input(delta, weights(0), *input_grad);
    }
  }
}

std::vector<double> MlpNet::backward(std::span<const double> input,
                                     std::span<const double> output_grad) const {
  if (output_grad.size() != output_width()) throw ConfigError("MlpNet::backward gradient width");
  Tape tape;
  forward(Matrix::from_row(input), tape);
  std::vector<double> grad = zero_grad();
  backward(tape, Matrix::from_row(output_grad), grad);
  return grad;
}

}  // namespace lom::numkit
