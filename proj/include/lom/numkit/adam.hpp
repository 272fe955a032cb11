#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace lom::numkit {

struct AdamOptions {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  AdamState() = default;
  AdamState(std::size_t num_params, AdamOptions opts = {})
      : m(num_params, 0.0), v(num_params, 0.0), options(opts) {}

  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  AdamOptions options;
};

// Bias-corrected Adam. Throws DivergenceError on a non-finite gradient before
// touching params or state.
void adam_step(AdamState& state, std::span<double> params, std::span<const double> grads);

}  // namespace lom::numkit
