#include "lom/mdn.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lom/errors.hpp"
#include "lom/numkit/mathx.hpp"

namespace lom::mdn {

using numkit::Matrix;

namespace {

void check_mode(const GmmParams& p, std::size_t i) {
  if (i >= p.num_modes)
    throw UsageError("mode index " + std::to_string(i) + " out of range for " +
                     std::to_string(p.num_modes) + " modes");
}

std::vector<std::size_t> trunk_widths(std::size_t state_dim, const std::vector<std::size_t>& hidden,
                                      std::size_t head) {
  std::vector<std::size_t> w{state_dim};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(head);
  return w;
}

}  // namespace

MdnNet::MdnNet(std::size_t state_dim, std::size_t action_dim, std::size_t num_modes,
               const std::vector<std::size_t>& hidden, numkit::Activation act)
    : net_(trunk_widths(state_dim, hidden, head_width(num_modes, action_dim)), act),
      action_dim_(action_dim),
      num_modes_(num_modes) {
  if (num_modes == 0 || action_dim == 0) throw ConfigError("MdnNet needs M >= 1 and action_dim >= 1");
}

MdnNet::MdnNet(numkit::MlpNet net, std::size_t action_dim, std::size_t num_modes)
    : net_(std::move(net)), action_dim_(action_dim), num_modes_(num_modes) {
  if (num_modes == 0 || action_dim == 0) throw ConfigError("MdnNet needs M >= 1 and action_dim >= 1");
  if (net_.output_width() != head_width(num_modes, action_dim))
    throw ConfigError("MdnNet trunk output width does not match M*(action_dim+2)");
}

void MdnNet::init(numkit::Rng& rng, double action_scale) {
  net_.init(rng);
  const std::size_t last = net_.num_layers() - 1;
  // near state-independent heads at the start; the biases carry the spread
  for (double& w : net_.weights(last)) w *= 0.1;
  auto b = net_.biases(last);
  for (std::size_t i = 0; i < num_modes_; ++i) {
    for (std::size_t k = 0; k < action_dim_; ++k)
      b[mean_index(i, k)] = rng.uniform(-action_scale, action_scale);
    b[log_sigma_index(i)] = std::log(action_scale);
    b[logit_index(i)] = 0.0;
  }
}

GmmParams decode_head(std::span<const double> raw, std::size_t num_modes, std::size_t action_dim) {
  if (raw.size() != MdnNet::head_width(num_modes, action_dim))
    throw ConfigError("decode_head: raw output width mismatch");
  if (!numkit::all_finite(raw)) throw ModelCorruptError("MDN head produced non-finite output");
  GmmParams p;
  p.num_modes = num_modes;
  p.action_dim = action_dim;
  const std::size_t nm = num_modes * action_dim;
  p.mus.assign(raw.begin(), raw.begin() + static_cast<std::ptrdiff_t>(nm));
  p.sigmas.resize(num_modes);
  for (std::size_t i = 0; i < num_modes; ++i)
    p.sigmas[i] = std::max(std::exp(raw[nm + i]), kSigmaFloor);
  p.alphas = numkit::softmax(raw.subspan(nm + num_modes, num_modes));
  return p;
}

GmmParams decode(const MdnNet& net, std::span<const double> state) {
  if (state.size() != net.state_dim()) throw ConfigError("decode: state dimension mismatch");
  if (!numkit::all_finite(state)) throw UsageError("decode: non-finite state");
  const auto raw = net.net().forward(state);
  return decode_head(raw, net.num_modes(), net.action_dim());
}

std::vector<GmmParams> decode_batch(const MdnNet& net, const Matrix& states) {
  const Matrix raw = net.net().forward(states);
  std::vector<GmmParams> out;
  out.reserve(raw.rows());
  for (std::size_t r = 0; r < raw.rows(); ++r)
    out.push_back(decode_head(raw.row(r), net.num_modes(), net.action_dim()));
  return out;
}

double component_log_density(const GmmParams& p, std::size_t i, std::span<const double> a) {
  check_mode(p, i);
  const double d = static_cast<double>(p.action_dim);
  const double sigma = p.sigmas[i];
  const double sq = numkit::squared_distance(a, p.mu(i));
  return -0.5 * d * std::log(2.0 * std::numbers::pi) - d * std::log(sigma) -
         sq / (2.0 * sigma * sigma);
}

double component_density(const GmmParams& p, std::size_t i, std::span<const double> a) {
  return std::exp(component_log_density(p, i, a));
}

double mixture_log_density(const GmmParams& p, std::span<const double> a) {
  std::vector<double> terms(p.num_modes);
  for (std::size_t i = 0; i < p.num_modes; ++i)
    terms[i] = std::log(p.alphas[i]) + component_log_density(p, i, a);
  return numkit::log_sum_exp(terms);
}

LossGrad mdn_loss(const MdnNet& net, const Matrix& states, const Matrix& actions) {
  if (states.rows() == 0) throw UsageError("mdn_loss: empty batch");
  if (states.rows() != actions.rows() || actions.cols() != net.action_dim())
    throw ConfigError("mdn_loss: batch shape mismatch");

  const std::size_t batch = states.rows();
  const std::size_t m = net.num_modes();
  const std::size_t d = net.action_dim();
  const double dd = static_cast<double>(d);
  const double inv_b = 1.0 / static_cast<double>(batch);

  numkit::MlpNet::Tape tape;
  const Matrix raw = net.net().forward(states, tape);
  Matrix head_grad(batch, raw.cols());
  std::vector<double> log_terms(m), resp(m);
  double total = 0.0;

  for (std::size_t r = 0; r < batch; ++r) {
    const GmmParams p = decode_head(raw.row(r), m, d);
    const auto a = actions.row(r);
    for (std::size_t i = 0; i < m; ++i)
      log_terms[i] = std::log(p.alphas[i]) + component_log_density(p, i, a);
    const double lse = numkit::log_sum_exp(log_terms);
    total -= lse;
    for (std::size_t i = 0; i < m; ++i) resp[i] = std::exp(log_terms[i] - lse);

    auto g = head_grad.row(r);
    for (std::size_t i = 0; i < m; ++i) {
      const double sigma = p.sigmas[i];
      const double inv_var = 1.0 / (sigma * sigma);
      const auto mu = p.mu(i);
      double sq = 0.0;
      for (std::size_t k = 0; k < d; ++k) {
        const double diff = a[k] - mu[k];
        sq += diff * diff;
        g[net.mean_index(i, k)] = -resp[i] * diff * inv_var * inv_b;
      }
      // the floor clamp has zero slope
      const bool clamped = std::exp(raw(r, net.log_sigma_index(i))) < kSigmaFloor;
      g[net.log_sigma_index(i)] = clamped ? 0.0 : resp[i] * (dd - sq * inv_var) * inv_b;
      g[net.logit_index(i)] = (p.alphas[i] - resp[i]) * inv_b;
    }
  }

  LossGrad out;
  out.loss = total * inv_b;
  if (!std::isfinite(out.loss)) throw DivergenceError("mdn_loss: non-finite loss");
  out.grad = net.net().zero_grad();
  net.net().backward(tape, head_grad, out.grad);
  return out;
}

std::vector<double> sample_component(const GmmParams& p, std::size_t i, numkit::Rng& rng) {
  check_mode(p, i);
  std::vector<double> a(p.mu(i).begin(), p.mu(i).end());
  for (double& v : a) v += p.sigmas[i] * rng.normal();
  return a;
}

std::span<const double> mode_mean(const GmmParams& p, std::size_t i) {
  check_mode(p, i);
  return p.mu(i);
}

std::size_t sample_mode(const GmmParams& p, numkit::Rng& rng) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < p.num_modes; ++i) {
    acc += p.alphas[i];
    if (u < acc) return i;
  }
  return p.num_modes - 1;
}

}  // namespace lom::mdn
