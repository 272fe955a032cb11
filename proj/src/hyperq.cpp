#include "lom/hyperq.hpp"

#include <cmath>

#include "lom/errors.hpp"

namespace lom::hyperq {

using numkit::Matrix;

HyperQNet::HyperQNet(std::size_t state_dim, std::size_t num_modes,
                     const std::vector<std::size_t>& hidden, numkit::Activation act) {
  std::vector<std::size_t> widths{state_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(num_modes);
  net_ = numkit::MlpNet(widths, act);
}

double hyperq_target(const valuefn::CriticFn& critic, const mdn::GmmParams& p,
                     std::span<const double> s, std::size_t u, numkit::Rng& rng, std::size_t k) {
  if (k == 0) throw UsageError("hyperq_target: need at least one sample");
  if (u >= p.num_modes) throw UsageError("hyperq_target: mode index out of range");
  Matrix states(k, s.size());
  Matrix actions(k, p.action_dim);
  for (std::size_t j = 0; j < k; ++j) {
    std::copy(s.begin(), s.end(), states.row(j).begin());
    const auto a = mdn::sample_component(p, u, rng);
    std::copy(a.begin(), a.end(), actions.row(j).begin());
  }
  const auto vals = critic(states, actions);
  double total = 0.0;
  for (double v : vals) total += v;
  return total / static_cast<double>(k);
}

double hyperq_target(const valuefn::QNet& q, const mdn::GmmParams& p, std::span<const double> s,
                     std::size_t u, numkit::Rng& rng, std::size_t k) {
  return hyperq_target(valuefn::as_critic(q), p, s, u, rng, k);
}

numkit::LossGrad hyperq_loss(const HyperQNet& hq, const valuefn::CriticFn& critic,
                             std::span<const mdn::GmmParams> behaviour, const Matrix& states,
                             numkit::Rng& rng, std::size_t k) {
  const std::size_t n = states.rows();
  if (n == 0) throw UsageError("hyperq_loss: empty batch");
  if (k == 0) throw UsageError("hyperq_loss: need at least one sample");
  if (behaviour.size() != n) throw ConfigError("hyperq_loss: one mixture per state required");
  const std::size_t m = hq.num_modes();

  // every (state, draw) pair goes through the critic in one batch
  std::vector<std::size_t> modes(n);
  Matrix rep_s(n * k, states.cols());
  Matrix rep_a(n * k, behaviour[0].action_dim);
  for (std::size_t i = 0; i < n; ++i) {
    if (behaviour[i].num_modes != m) throw ConfigError("hyperq_loss: mode count mismatch");
    modes[i] = static_cast<std::size_t>(rng.index(m));
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t row = i * k + j;
      std::copy(states.row(i).begin(), states.row(i).end(), rep_s.row(row).begin());
      const auto a = mdn::sample_component(behaviour[i], modes[i], rng);
      std::copy(a.begin(), a.end(), rep_a.row(row).begin());
    }
  }
  const auto qvals = critic(rep_s, rep_a);

  numkit::MlpNet::Tape tape;
  const Matrix pred = hq.net().forward(states, tape);
  Matrix dout(n, m);
  const double inv_n = 1.0 / static_cast<double>(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double target = 0.0;
    for (std::size_t j = 0; j < k; ++j) target += qvals[i * k + j];
    target /= static_cast<double>(k);
    const double err = pred(i, modes[i]) - target;
    total += err * err;
    dout(i, modes[i]) = 2.0 * err * inv_n;
  }
  numkit::LossGrad out;
  out.loss = total * inv_n;
  if (!std::isfinite(out.loss)) throw DivergenceError("hyperq_loss: non-finite loss");
  out.grad = hq.net().zero_grad();
  hq.net().backward(tape, dout, out.grad);
  return out;
}

numkit::LossGrad hyperq_loss(const HyperQNet& hq, const valuefn::QNet& q,
                             std::span<const mdn::GmmParams> behaviour, const Matrix& states,
                             numkit::Rng& rng, std::size_t k) {
  return hyperq_loss(hq, valuefn::as_critic(q), behaviour, states, rng, k);
}

numkit::LossGrad hyperq_loss(const HyperQNet& hq, const valuefn::QNet& q, const mdn::MdnNet& mdn,
                             const Matrix& states, numkit::Rng& rng, std::size_t k) {
  const auto behaviour = mdn::decode_batch(mdn, states);
  return hyperq_loss(hq, q, behaviour, states, rng, k);
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw UsageError("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

std::size_t select_mode(const HyperQNet& hq, std::span<const double> s) {
  return argmax(hq.values(s));
}

std::vector<std::size_t> select_modes(const HyperQNet& hq, const Matrix& states) {
  const Matrix vals = hq.net().forward(states);
  std::vector<std::size_t> out(states.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax(vals.row(i));
  return out;
}

GreedyPolicy::GreedyPolicy(const mdn::MdnNet& mdn, const HyperQNet& hq) : mdn_(&mdn), hq_(&hq) {
  if (mdn.num_modes() != hq.num_modes())
    throw ConfigError("GreedyPolicy: MDN and hyper Q-function disagree on the mode count");
}

std::vector<double> GreedyPolicy::sample(std::span<const double> s, numkit::Rng& rng) const {
  const auto p = mdn::decode(*mdn_, s);
  return mdn::sample_component(p, mode(s), rng);
}

std::vector<double> GreedyPolicy::mean_action(std::span<const double> s) const {
  const auto p = mdn::decode(*mdn_, s);
  const auto mu = mdn::mode_mean(p, mode(s));
  return {mu.begin(), mu.end()};
}

std::vector<double> greedy_sample(const GreedyPolicy& gp, std::span<const double> s,
                                  numkit::Rng& rng) {
  return gp.sample(s, rng);
}

}  // namespace lom::hyperq
