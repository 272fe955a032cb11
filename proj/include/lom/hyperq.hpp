#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lom/mdn.hpp"
#include "lom/numkit/loss.hpp"
#include "lom/numkit/matrix.hpp"
#include "lom/numkit/mlp.hpp"
#include "lom/numkit/rng.hpp"
#include "lom/valuefn.hpp"

namespace lom::hyperq {

// Hyper Q-function over modes: state in, one value per mode out.
class HyperQNet {
 public:
  HyperQNet() = default;
  HyperQNet(std::size_t state_dim, std::size_t num_modes, const std::vector<std::size_t>& hidden,
            numkit::Activation act = numkit::Activation::relu);
  explicit HyperQNet(numkit::MlpNet net) : net_(std::move(net)) {}

  std::size_t state_dim() const { return net_.input_width(); }
  std::size_t num_modes() const { return net_.output_width(); }

  std::vector<double> values(std::span<const double> s) const { return net_.forward(s); }

  numkit::MlpNet& net() { return net_; }
  const numkit::MlpNet& net() const { return net_; }

 private:
  numkit::MlpNet net_;
};

// Monte-Carlo estimate of E_{a ~ component u}[Q(s, a)] from k draws.
double hyperq_target(const valuefn::CriticFn& critic, const mdn::GmmParams& p,
                     std::span<const double> s, std::size_t u, numkit::Rng& rng, std::size_t k);
double hyperq_target(const valuefn::QNet& q, const mdn::GmmParams& p, std::span<const double> s,
                     std::size_t u, numkit::Rng& rng, std::size_t k);

// Regression of Q_phi(s, u) onto hyperq_target with u drawn uniformly per state.
// `behaviour` holds the decoded mixture for each row of `states`.
numkit::LossGrad hyperq_loss(const HyperQNet& hq, const valuefn::CriticFn& critic,
                             std::span<const mdn::GmmParams> behaviour,
                             const numkit::Matrix& states, numkit::Rng& rng, std::size_t k);
numkit::LossGrad hyperq_loss(const HyperQNet& hq, const valuefn::QNet& q,
                             std::span<const mdn::GmmParams> behaviour,
                             const numkit::Matrix& states, numkit::Rng& rng, std::size_t k);
numkit::LossGrad hyperq_loss(const HyperQNet& hq, const valuefn::QNet& q, const mdn::MdnNet& mdn,
                             const numkit::Matrix& states, numkit::Rng& rng, std::size_t k);

// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

std::size_t select_mode(const HyperQNet& hq, std::span<const double> s);
std::vector<std::size_t> select_modes(const HyperQNet& hq, const numkit::Matrix& states);

// The one-mode greedy policy: follow the MDN component the hyper Q-function
// ranks highest. Holds non-owning references; both nets must outlive it.
class GreedyPolicy {
 public:
  GreedyPolicy(const mdn::MdnNet& mdn, const HyperQNet& hq);

  const mdn::MdnNet& mdn() const { return *mdn_; }
  const HyperQNet& hq() const { return *hq_; }

  std::size_t mode(std::span<const double> s) const { return select_mode(*hq_, s); }
  std::vector<double> sample(std::span<const double> s, numkit::Rng& rng) const;
  std::vector<double> mean_action(std::span<const double> s) const;

 private:
  const mdn::MdnNet* mdn_;
  const HyperQNet* hq_;
};

std::vector<double> greedy_sample(const GreedyPolicy& gp, std::span<const double> s,
                                  numkit::Rng& rng);

}  // namespace lom::hyperq
