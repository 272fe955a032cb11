#include "lom/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "lom/errors.hpp"

namespace lom::learners {

using numkit::Matrix;

void TrainConfig::validate() const {
  if (!(beta > 0.0)) throw ConfigError("beta must be > 0");
  if (!(clip > 0.0)) throw ConfigError("clip must be > 0");
  if (!(polyak >= 0.0 && polyak <= 1.0)) throw ConfigError("polyak must lie in [0, 1]");
  if (update_delay == 0) throw ConfigError("update_delay must be >= 1");
  if (num_modes == 0) throw ConfigError("modes must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("gamma must lie in [0, 1)");
  if (mc_samples == 0) throw ConfigError("mc_samples must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
  for (std::size_t h : hidden)
    if (h == 0) throw ConfigError("hidden widths must be positive");
}

double EvalReport::std_error() const {
  if (returns.size() < 2) return 0.0;
  double ss = 0.0;
  for (double r : returns) ss += (r - mean_return) * (r - mean_return);
  const double n = static_cast<double>(returns.size());
  return std::sqrt(ss / (n - 1.0) / n);
}

GaussianPolicy::GaussianPolicy(std::size_t state_dim, std::size_t action_dim,
                               const std::vector<std::size_t>& hidden,
                               std::vector<double> action_low, std::vector<double> action_high,
                               numkit::Activation act)
    : low_(std::move(action_low)), high_(std::move(action_high)) {
  std::vector<std::size_t> widths{state_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2 * action_dim);
  net_ = numkit::MlpNet(widths, act);
  if (low_.size() != action_dim || high_.size() != action_dim)
    throw ConfigError("GaussianPolicy: action bounds dimension mismatch");
}

GaussianPolicy::GaussianPolicy(numkit::MlpNet net, std::vector<double> action_low,
                               std::vector<double> action_high)
    : net_(std::move(net)), low_(std::move(action_low)), high_(std::move(action_high)) {
  if (net_.output_width() % 2 != 0 || low_.size() != action_dim() || high_.size() != action_dim())
    throw ConfigError("GaussianPolicy: network output must be 2 * action_dim");
}

std::vector<double> GaussianPolicy::mean_action(std::span<const double> s) const {
  const auto out = net_.forward(s);
  const std::size_t d = action_dim();
  std::vector<double> a(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(d));
  for (std::size_t i = 0; i < d; ++i) a[i] = std::clamp(a[i], low_[i], high_[i]);
  return a;
}

std::vector<double> GaussianPolicy::sample(std::span<const double> s, numkit::Rng& rng) const {
  const auto out = net_.forward(s);
  const std::size_t d = action_dim();
  std::vector<double> a(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double ls = std::clamp(out[d + i], kLogStdMin, kLogStdMax);
    a[i] = std::clamp(out[i] + std::exp(ls) * rng.normal(), low_[i], high_[i]);
  }
  return a;
}

double GaussianPolicy::log_prob(std::span<const double> s, std::span<const double> a) const {
  const auto out = net_.forward(s);
  const std::size_t d = action_dim();
  double lp = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    const double ls = std::clamp(out[d + i], kLogStdMin, kLogStdMax);
    const double z = (a[i] - out[i]) * std::exp(-ls);
    lp += -0.5 * std::log(2.0 * std::numbers::pi) - ls - 0.5 * z * z;
  }
  return lp;
}

numkit::LossGrad weighted_nll(const GaussianPolicy& pi, const Matrix& states,
                              const Matrix& actions, std::span<const double> weights) {
  const std::size_t n = states.rows();
  const std::size_t d = pi.action_dim();
  if (n == 0) throw UsageError("policy loss: empty batch");
  if (actions.rows() != n || actions.cols() != d || weights.size() != n)
    throw ConfigError("policy loss: batch shape mismatch");

  numkit::MlpNet::Tape tape;
  const Matrix out = pi.net().forward(states, tape);
  Matrix dout(n, 2 * d);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    const double w = weights[r];
    double lp = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double raw_ls = out(r, d + i);
      const double ls = std::clamp(raw_ls, GaussianPolicy::kLogStdMin, GaussianPolicy::kLogStdMax);
      const double inv_var = std::exp(-2.0 * ls);
      const double diff = actions(r, i) - out(r, i);
      lp += -half_log_2pi - ls - 0.5 * diff * diff * inv_var;
      dout(r, i) = -w * diff * inv_var * inv_n;
      const bool clamped =
          raw_ls < GaussianPolicy::kLogStdMin || raw_ls > GaussianPolicy::kLogStdMax;
      dout(r, d + i) = clamped ? 0.0 : -w * (diff * diff * inv_var - 1.0) * inv_n;
    }
    total -= w * lp;
  }
  numkit::LossGrad res;
  res.loss = total * inv_n;
  if (!std::isfinite(res.loss)) throw DivergenceError("policy loss: non-finite loss");
  res.grad = pi.net().zero_grad();
  pi.net().backward(tape, dout, res.grad);
  return res;
}

double exp_clip(double x, double c) {
  if (!(c > 0.0)) throw UsageError("exp_clip: C must be > 0");
  if (x >= std::log(c)) return c;
  return std::max(std::exp(x), std::numeric_limits<double>::min());
}

double lom_advantage(const valuefn::CriticFn& critic, const mdn::GmmParams& p,
                     std::span<const double> s, std::span<const double> a_hat, std::size_t u) {
  Matrix states(2, s.size());
  Matrix actions(2, a_hat.size());
  const auto mu = mdn::mode_mean(p, u);
  for (std::size_t r = 0; r < 2; ++r) std::copy(s.begin(), s.end(), states.row(r).begin());
  std::copy(a_hat.begin(), a_hat.end(), actions.row(0).begin());
  std::copy(mu.begin(), mu.end(), actions.row(1).begin());
  const auto v = critic(states, actions);
  return v[0] - v[1];
}

double lom_advantage(const valuefn::QNet& q, const mdn::GmmParams& p, std::span<const double> s,
                     std::span<const double> a_hat, std::size_t u) {
  return lom_advantage(valuefn::as_critic(q), p, s, a_hat, u);
}

numkit::LossGrad lom_policy_update(const GaussianPolicy& pi, const hyperq::GreedyPolicy& gp,
                                   const valuefn::QNet& q, const Matrix& states,
                                   const TrainConfig& cfg, numkit::Rng& rng) {
  const std::size_t n = states.rows();
  if (n == 0) throw UsageError("lom_policy_update: empty batch");
  const std::size_t d = pi.action_dim();
  const auto behaviour = mdn::decode_batch(gp.mdn(), states);
  const auto modes = hyperq::select_modes(gp.hq(), states);

  // rows [0, n) hold sampled actions, rows [n, 2n) the selected mode means
  Matrix s2(2 * n, states.cols());
  Matrix a2(2 * n, d);
  Matrix a_hat(n, d);
  for (std::size_t i = 0; i < n; ++i) {
    const auto sample = mdn::sample_component(behaviour[i], modes[i], rng);
    const auto mean = mdn::mode_mean(behaviour[i], modes[i]);
    std::copy(sample.begin(), sample.end(), a_hat.row(i).begin());
    std::copy(sample.begin(), sample.end(), a2.row(i).begin());
    std::copy(mean.begin(), mean.end(), a2.row(n + i).begin());
    std::copy(states.row(i).begin(), states.row(i).end(), s2.row(i).begin());
    std::copy(states.row(i).begin(), states.row(i).end(), s2.row(n + i).begin());
  }
  const auto qv = q.values(s2, a2);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) w[i] = exp_clip((qv[i] - qv[n + i]) / cfg.beta, cfg.clip);
  return weighted_nll(pi, states, a_hat, w);
}

numkit::LossGrad bc_update(const GaussianPolicy& pi, const Matrix& states, const Matrix& actions) {
  const std::vector<double> w(states.rows(), 1.0);
  return weighted_nll(pi, states, actions, w);
}

numkit::LossGrad awac_update(const GaussianPolicy& pi, const valuefn::QNet& q,
                             const mdn::MdnNet& mdn, const Matrix& states, const Matrix& actions,
                             const TrainConfig& cfg) {
  const std::size_t n = states.rows();
  if (n == 0) throw UsageError("awac_update: empty batch");
  const std::size_t m = mdn.num_modes();
  const std::size_t d = pi.action_dim();
  const auto behaviour = mdn::decode_batch(mdn, states);

  // rows [0, n): dataset actions; then n*m rows of component means
  Matrix s2(n * (m + 1), states.cols());
  Matrix a2(n * (m + 1), d);
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(states.row(i).begin(), states.row(i).end(), s2.row(i).begin());
    std::copy(actions.row(i).begin(), actions.row(i).end(), a2.row(i).begin());
    for (std::size_t u = 0; u < m; ++u) {
      const std::size_t row = n + i * m + u;
      std::copy(states.row(i).begin(), states.row(i).end(), s2.row(row).begin());
      const auto mu = behaviour[i].mu(u);
      std::copy(mu.begin(), mu.end(), a2.row(row).begin());
    }
  }
  const auto qv = q.values(s2, a2);
  std::vector<double> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    double baseline = 0.0;
    for (std::size_t u = 0; u < m; ++u) baseline += behaviour[i].alphas[u] * qv[n + i * m + u];
    w[i] = exp_clip((qv[i] - baseline) / cfg.beta, cfg.clip);
  }
  return weighted_nll(pi, states, actions, w);
}

PolicyFn mdn_policy_eval_adapter(const mdn::MdnNet& mdn) {
  return [&mdn](std::span<const double> s, numkit::Rng& rng) {
    const auto p = mdn::decode(mdn, s);
    return mdn::sample_component(p, mdn::sample_mode(p, rng), rng);
  };
}

PolicyFn mean_action_policy(const GaussianPolicy& pi) {
  return [&pi](std::span<const double> s, numkit::Rng&) { return pi.mean_action(s); };
}

PolicyFn greedy_mode_policy(const hyperq::GreedyPolicy& gp) {
  return [gp](std::span<const double> s, numkit::Rng&) { return gp.mean_action(s); };
}

EvalReport evaluate_policy(const envs::Env& env_in, const PolicyFn& policy, std::size_t episodes,
                           numkit::Rng& rng, std::string policy_name) {
  if (episodes == 0) throw UsageError("evaluate_policy: episodes must be >= 1");
  EvalReport rep;
  rep.policy_name = std::move(policy_name);
  rep.seed = rng.seed();
  rep.episodes = episodes;
  envs::Env env = env_in;
  for (std::size_t ep = 0; ep < episodes; ++ep) {
    auto s = env.reset(rng);
    double ret = 0.0;
    for (;;) {
      const auto res = env.step(policy(s, rng));
      ret += res.reward;
      if (res.done) break;
      s = res.state;
    }
    rep.returns.push_back(ret);
  }
  double total = 0.0;
  for (double r : rep.returns) total += r;
  rep.mean_return = total / static_cast<double>(episodes);
  return rep;
}

}  // namespace lom::learners
