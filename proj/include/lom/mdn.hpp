#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lom/numkit/loss.hpp"
#include "lom/numkit/matrix.hpp"
#include "lom/numkit/mlp.hpp"
#include "lom/numkit/rng.hpp"

// Mixture-density behaviour model: state -> isotropic Gaussian mixture over
// actions. Component indices are zero-based throughout the C++ API.
namespace lom::mdn {

inline constexpr double kSigmaFloor = 1e-3;

struct GmmParams {
  std::size_t num_modes = 0;
  std::size_t action_dim = 0;
  std::vector<double> alphas;  // num_modes, sums to 1
  std::vector<double> mus;     // num_modes * action_dim
  std::vector<double> sigmas;  // num_modes, each >= kSigmaFloor

  std::span<const double> mu(std::size_t i) const {
    return {mus.data() + i * action_dim, action_dim};
  }
};

// Head layout for M modes and d action dims, M*(d+2) raw outputs:
//   [0, M*d)           means, mode-major
//   [M*d, M*d+M)       log-sigmas
//   [M*d+M, M*(d+2))   mixing logits
class MdnNet {
 public:
  MdnNet() = default;
  MdnNet(std::size_t state_dim, std::size_t action_dim, std::size_t num_modes,
         const std::vector<std::size_t>& hidden,
         numkit::Activation act = numkit::Activation::relu);
  // Wraps an existing trunk (e.g. one read from a checkpoint).
  MdnNet(numkit::MlpNet net, std::size_t action_dim, std::size_t num_modes);

  static std::size_t head_width(std::size_t num_modes, std::size_t action_dim) {
    return num_modes * (action_dim + 2);
  }

  // Default trunk init, then the means are spread uniformly over
  // [-action_scale, action_scale] and every sigma starts at action_scale.
  void init(numkit::Rng& rng, double action_scale);

  std::size_t state_dim() const { return net_.input_width(); }
  std::size_t action_dim() const { return action_dim_; }
  std::size_t num_modes() const { return num_modes_; }

  std::size_t mean_index(std::size_t mode, std::size_t dim) const {
    return mode * action_dim_ + dim;
  }
  std::size_t log_sigma_index(std::size_t mode) const { return num_modes_ * action_dim_ + mode; }
  std::size_t logit_index(std::size_t mode) const {
    return num_modes_ * (action_dim_ + 1) + mode;
  }

  numkit::MlpNet& net() { return net_; }
  const numkit::MlpNet& net() const { return net_; }

 private:
  numkit::MlpNet net_;
  std::size_t action_dim_ = 1;
  std::size_t num_modes_ = 1;
};

// Decodes one row of raw head outputs. Throws ModelCorruptError on non-finite
// values.
GmmParams decode_head(std::span<const double> raw, std::size_t num_modes, std::size_t action_dim);
GmmParams decode(const MdnNet& net, std::span<const double> state);
std::vector<GmmParams> decode_batch(const MdnNet& net, const numkit::Matrix& states);

double component_log_density(const GmmParams& p, std::size_t i, std::span<const double> a);
// (2 pi sigma^2)^(-d/2) exp(-|a - mu|^2 / (2 sigma^2))
double component_density(const GmmParams& p, std::size_t i, std::span<const double> a);
double mixture_log_density(const GmmParams& p, std::span<const double> a);

using numkit::LossGrad;

// Mean negative log-likelihood of (state, action) rows and its gradient with
// respect to the trunk parameters.
LossGrad mdn_loss(const MdnNet& net, const numkit::Matrix& states, const numkit::Matrix& actions);

std::vector<double> sample_component(const GmmParams& p, std::size_t i, numkit::Rng& rng);
std::span<const double> mode_mean(const GmmParams& p, std::size_t i);
// Draws a component index with probability alphas[i].
std::size_t sample_mode(const GmmParams& p, numkit::Rng& rng);

}  // namespace lom::mdn
