#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "lom/numkit/matrix.hpp"
#include "lom/numkit/rng.hpp"

namespace lom::numkit {

enum class Activation { relu, tanh, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

// Feed-forward network with a hidden activation and a linear output layer.
//
// All parameters live in one flat buffer. Layer l occupies W_l (in x out,
// row-major, input-major) followed by b_l (out). Gradient buffers share the
// same layout, which keeps Adam, polyak averaging and checkpointing to simple
// loops over a span.
class MlpNet {
 public:
  // Activations recorded by a forward pass for use in backward().
  struct Tape {
    std::vector<Matrix> inputs;   // inputs[l] is the input to layer l
    std::vector<Matrix> preacts;  // pre-activation of hidden layer l
  };

  MlpNet() = default;
  explicit MlpNet(std::vector<std::size_t> widths, Activation hidden = Activation::relu);

  // PyTorch-style default init: weights and biases uniform in +-1/sqrt(fan_in).
  void init(Rng& rng);

  const std::vector<std::size_t>& widths() const { return widths_; }
  Activation hidden_activation() const { return hidden_; }
  std::size_t input_width() const { return widths_.front(); }
  std::size_t output_width() const { return widths_.back(); }
  std::size_t num_layers() const { return widths_.size() - 1; }
  std::size_t num_params() const { return params_.size(); }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }
  std::span<double> weights(std::size_t layer);
  std::span<const double> weights(std::size_t layer) const;
  std::span<double> biases(std::size_t layer);
  std::span<const double> biases(std::size_t layer) const;

  std::vector<double> forward(std::span<const double> input) const;
  Matrix forward(const Matrix& input) const;
  Matrix forward(const Matrix& input, Tape& tape) const;

  // Accumulates d(loss)/d(params) into grad given d(loss)/d(output).
  // Writes d(loss)/d(input) into input_grad when it is non-null.
  void backward(const Tape& tape, const Matrix& output_grad, std::span<double> grad,
                Matrix* input_grad = nullptr) const;

  // Single-sample convenience wrapper returning a fresh gradient buffer.
  std::vector<double> backward(std::span<const double> input,
                               std::span<const double> output_grad) const;

  std::vector<double> zero_grad() const { return std::vector<double>(params_.size(), 0.0); }

  friend bool operator==(const MlpNet&, const MlpNet&) = default;

 private:
  std::size_t weight_offset(std::size_t layer) const { return offsets_[layer]; }

  std::vector<std::size_t> widths_{1, 1};
  Activation hidden_ = Activation::relu;
  std::vector<std::size_t> offsets_{0};
  std::vector<double> params_ = std::vector<double>(2, 0.0);
};

}  // namespace lom::numkit
