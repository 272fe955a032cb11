#pragma once

#include <vector>

namespace lom::numkit {

// A scalar training loss and its gradient in the network's flat parameter
// layout.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;
};

}  // namespace lom::numkit
