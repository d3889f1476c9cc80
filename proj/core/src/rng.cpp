// SPDX-License-Identifier: Apache-2.0
#include "horrr/rng.hpp"

#include <cmath>
#include <numbers>

namespace horrr {

double NormalRng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double NormalRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  const double u1 = 1.0 - uniform();  // (0, 1]
  const double u2 = uniform();
  const double rad = std::sqrt(-2.0 * std::log(u1));
  const double ang = 2.0 * std::numbers::pi * u2;
  spare_ = rad * std::sin(ang);
  has_spare_ = true;
  return rad * std::cos(ang);
}

Matrix NormalRng::normal_matrix(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = normal();
  return m;
}

Vector NormalRng::normal_vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = normal();
  return v;
}

DenseTensor NormalRng::normal_tensor(const std::vector<Index>& dims) {
  DenseTensor t(dims);
  for (Index i = 0; i < t.size(); ++i) t.data()[i] = normal();
  return t;
}

}  // namespace horrr
