#include "lom/numkit/mathx.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lom::numkit {

void softmax_into(std::span<const double> logits, std::span<double> out) {
  const double hi = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - hi);
    total += out[i];
  }
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] /= total;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (!logits.empty()) softmax_into(logits, out);
  return out;
}

double log_sum_exp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(hi)) return hi;
  double total = 0.0;
  for (double v : values) total += std::exp(v - hi);
  return hi + std::log(total);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace lom::numkit
