#include "lom/numkit/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace lom::numkit {

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix Matrix::from_row(std::span<const double> v) {
  Matrix m(1, v.size());
  std::copy(v.begin(), v.end(), m.data_.begin());
  return m;
}

}  // namespace lom::numkit
