#include "lom/valuefn.hpp"

#include <cmath>

#include "lom/errors.hpp"

namespace lom::valuefn {

using numkit::Matrix;

QNet::QNet(std::size_t state_dim, std::size_t action_dim, const std::vector<std::size_t>& hidden,
           numkit::Activation act)
    : state_dim_(state_dim) {
  std::vector<std::size_t> widths{state_dim + action_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(1);
  net_ = numkit::MlpNet(widths, act);
}

QNet::QNet(numkit::MlpNet net, std::size_t state_dim) : net_(std::move(net)), state_dim_(state_dim) {
  if (net_.output_width() != 1 || net_.input_width() <= state_dim)
    throw ConfigError("QNet: network must map state_dim + action_dim inputs to one output");
}

Matrix QNet::join(const Matrix& s, const Matrix& a) const {
  if (s.rows() != a.rows() || s.cols() != state_dim_ || a.cols() != action_dim())
    throw ConfigError("QNet: state/action batch shape mismatch");
  Matrix x(s.rows(), s.cols() + a.cols());
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = x.row(r);
    std::copy(s.row(r).begin(), s.row(r).end(), row.begin());
    std::copy(a.row(r).begin(), a.row(r).end(), row.begin() + static_cast<std::ptrdiff_t>(s.cols()));
  }
  return x;
}

double QNet::value(std::span<const double> s, std::span<const double> a) const {
  return values(Matrix::from_row(s), Matrix::from_row(a))[0];
}

std::vector<double> QNet::values(const Matrix& s, const Matrix& a) const {
  const Matrix out = net_.forward(join(s, a));
  return {out.data().begin(), out.data().end()};
}

numkit::LossGrad td_loss(const QNet& q, const QNet& q_target, const envs::Batch& batch,
                         double gamma) {
  const std::size_t n = batch.s.rows();
  if (n == 0) throw UsageError("td_loss: empty batch");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("td_loss: gamma must lie in [0, 1)");

  const auto next_q = q_target.values(batch.s_next, batch.a_next);
  numkit::MlpNet::Tape tape;
  const Matrix pred = q.net().forward(q.join(batch.s, batch.a), tape);

  Matrix dout(n, 1);
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double bootstrap = batch.done[i] ? 0.0 : gamma * next_q[i];
    const double err = pred(i, 0) - (batch.r[i] + bootstrap);
    total += err * err;
    dout(i, 0) = 2.0 * err * inv_n;
  }
  numkit::LossGrad out;
  out.loss = total * inv_n;
  if (!std::isfinite(out.loss)) throw DivergenceError("td_loss: non-finite loss");
  out.grad = q.net().zero_grad();
  q.net().backward(tape, dout, out.grad);
  return out;
}

CriticFn as_critic(const QNet& q) {
  return [&q](const numkit::Matrix& s, const numkit::Matrix& a) { return q.values(s, a); };
}

void polyak_update(QNet& target, const QNet& online, double rho) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw UsageError("polyak_update: rho must lie in [0, 1]");
  auto t = target.net().params();
  auto o = online.net().params();
  if (t.size() != o.size() || target.net().widths() != online.net().widths())
    throw UsageError("polyak_update: target and online shapes differ");
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = rho * t[i] + (1.0 - rho) * o[i];
}

}  // namespace lom::valuefn
