// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "horrr/tensor.hpp"

namespace horrr {

// Standard normals from mt19937_64 through the basic Box-Muller transform.
// std::normal_distribution is implementation-defined, so it is avoided to
// keep streams identical across standard libraries.
class NormalRng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64/box-muller";

  explicit NormalRng(std::uint64_t seed) : engine_(seed) {}

  double uniform();  // in [0, 1)
  double normal();
  Matrix normal_matrix(Index rows, Index cols);
  Vector normal_vector(Index n);
  DenseTensor normal_tensor(const std::vector<Index>& dims);
  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace horrr
