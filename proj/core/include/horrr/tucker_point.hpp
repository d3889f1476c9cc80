// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "horrr/tensor.hpp"

namespace horrr {

// A tensor in Tucker form [[C; U_0, ..., U_N]]. Immutable once built; every
// construction receives a fresh id so caches can detect staleness. Copies keep
// the id because they describe the same point.
class TuckerPoint {
 public:
  TuckerPoint() = default;
  TuckerPoint(DenseTensor core, std::vector<Matrix> factors);

  const DenseTensor& core() const { return core_; }
  const std::vector<Matrix>& factors() const { return factors_; }
  const Matrix& factor(std::size_t i) const { return factors_.at(i); }
  std::size_t order() const { return factors_.size(); }
  std::vector<Index> ranks() const { return core_.dims(); }
  std::vector<Index> ambient_dims() const;
  std::uint64_t id() const { return id_; }

  // Max over modes of ||U_i^T U_i - I||_max.
  double orthonormality_defect() const;

 private:
  DenseTensor core_;
  std::vector<Matrix> factors_;
  std::uint64_t id_ = 0;
};

struct HosvdInfo {
  // Modes whose unfolding had fewer than r_i singular values above cutoff;
  // the trailing singular vectors there are an arbitrary orthonormal completion.
  std::vector<std::size_t> padded_modes;
};

// Truncated HOSVD with the deterministic sign convention.
TuckerPoint hosvd(const DenseTensor& t, std::span<const Index> ranks,
                  HosvdInfo* info = nullptr);

}  // namespace horrr
