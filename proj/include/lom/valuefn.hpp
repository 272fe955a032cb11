#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "lom/envs.hpp"
#include "lom/numkit/loss.hpp"
#include "lom/numkit/matrix.hpp"
#include "lom/numkit/mlp.hpp"

namespace lom::valuefn {

// Behaviour critic Q(s, a): an MLP over the concatenated [s, a].
class QNet {
 public:
  QNet() = default;
  QNet(std::size_t state_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden,
       numkit::Activation act = numkit::Activation::relu);
  QNet(numkit::MlpNet net, std::size_t state_dim);

  std::size_t state_dim() const { return state_dim_; }
  std::size_t action_dim() const { return net_.input_width() - state_dim_; }

  double value(std::span<const double> s, std::span<const double> a) const;
  // One value per row.
  std::vector<double> values(const numkit::Matrix& s, const numkit::Matrix& a) const;

  numkit::Matrix join(const numkit::Matrix& s, const numkit::Matrix& a) const;

  numkit::MlpNet& net() { return net_; }
  const numkit::MlpNet& net() const { return net_; }

 private:
  numkit::MlpNet net_;
  std::size_t state_dim_ = 0;
};

// Any batch critic: one value per (state row, action row) pair. QNet::values
// is the usual one; tests plug in closed-form critics.
using CriticFn = std::function<std::vector<double>(const numkit::Matrix&, const numkit::Matrix&)>;

CriticFn as_critic(const QNet& q);

// SARSA TD regression: mean over the batch of (Q(s,a) - y)^2 with
// y = r + gamma * (1 - done) * Q_target(s', a'). The target is detached; the
// gradient is with respect to q only.
numkit::LossGrad td_loss(const QNet& q, const QNet& q_target, const envs::Batch& batch,
                         double gamma);

// target <- rho * target + (1 - rho) * online
void polyak_update(QNet& target, const QNet& online, double rho);

}  // namespace lom::valuefn
