// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "horrr/tensor.hpp"
#include "horrr/tucker_point.hpp"

namespace horrr {

// {G; V_0, ..., V_N} anchored at the point with id `base_id`. Gauge:
// U_i^T V_i = 0. For modes whose factor is square the V block is always zero.
struct TangentVector {
  DenseTensor g;
  std::vector<Matrix> v;
  std::uint64_t base_id = 0;

  TangentVector& operator+=(const TangentVector& o);
  TangentVector& operator-=(const TangentVector& o);
  TangentVector& operator*=(double s);
};

TangentVector operator+(TangentVector a, const TangentVector& b);
TangentVector operator-(TangentVector a, const TangentVector& b);
TangentVector operator*(double s, TangentVector a);

TangentVector zero_tangent(const TuckerPoint& p);

// Throws ShapeError unless z is shaped for p and anchored there.
void check_anchor(const TuckerPoint& p, const TangentVector& z);

DenseTensor densify(const TuckerPoint& p);

// True when U_i is square, so its tangent block vanishes identically.
bool is_square_mode(const TuckerPoint& p, std::size_t i);

// Pseudo-inverse of unfold(core, i) (a right inverse for full row rank).
// Throws BoundaryError if a singular value falls below kRankTol * sigma_max.
Matrix core_unfolding_pinv(const DenseTensor& core, std::size_t i);

// max_i ||U_i^T V_i||_F / max(1, ||V_i||_F).
double gauge_defect(const TuckerPoint& p, const TangentVector& z);
// V_i <- (I - U_i U_i^T) V_i.
void enforce_gauge(const TuckerPoint& p, TangentVector& z);

DenseTensor tangent_to_ambient(const TuckerPoint& p, const TangentVector& z);
double tangent_inner(const TuckerPoint& p, const TangentVector& a, const TangentVector& b);
double tangent_norm(const TuckerPoint& p, const TangentVector& z);

// The contractions of an ambient tensor A that projection and the Hessian
// curvature term need. Implementations can keep A in factored form.
class AmbientContractions {
 public:
  virtual ~AmbientContractions() = default;
  virtual std::vector<Index> dims() const = 0;
  // A x_0 mats[0] x_1 ... x_N mats[N].
  virtual DenseTensor contract_all(std::span<const Matrix> mats) const = 0;
  // unfold(A x_{j != mode} mats[j], mode); mats[mode] is ignored.
  virtual Matrix contract_all_but(std::size_t mode, std::span<const Matrix> mats) const = 0;
};

class DenseContractions final : public AmbientContractions {
 public:
  explicit DenseContractions(const DenseTensor& a) : a_(a) {}
  std::vector<Index> dims() const override { return a_.dims(); }
  DenseTensor contract_all(std::span<const Matrix> mats) const override;
  Matrix contract_all_but(std::size_t mode, std::span<const Matrix> mats) const override;

 private:
  const DenseTensor& a_;
};

// A Tucker tensor [[S; F_0, ..., F_N]] (factors need not be orthonormal).
class TuckerContractions final : public AmbientContractions {
 public:
  explicit TuckerContractions(const TuckerPoint& t) : t_(t) {}
  std::vector<Index> dims() const override { return t_.ambient_dims(); }
  DenseTensor contract_all(std::span<const Matrix> mats) const override;
  Matrix contract_all_but(std::size_t mode, std::span<const Matrix> mats) const override;

 private:
  const TuckerPoint& t_;
};

// amb(z) as a Tucker tensor with factors [U_i V_i] (U_i alone for square
// modes) and a block core. The result is a plain container, not a manifold
// point: its factors are generally not orthonormal.
TuckerPoint tangent_as_tucker(const TuckerPoint& p, const TangentVector& z);

TangentVector project_to_tangent(const TuckerPoint& p, const AmbientContractions& a);
TangentVector project_to_tangent(const TuckerPoint& p, const DenseTensor& a);

// Curvature part of the Riemannian Hessian in direction z, given the
// Euclidean gradient through `euc_grad`.
TangentVector curvature_term(const TuckerPoint& p, const TangentVector& z,
                             const AmbientContractions& euc_grad);

struct RetractInfo {
  std::vector<std::size_t> padded_modes;
};

// hosvd(densify(p) + step * ambient(z), ranks(p)) computed on the rank <= 2r
// Tucker representation of the sum. Square modes keep their factor.
TuckerPoint retract_hosvd(const TuckerPoint& p, const TangentVector& z, double step,
                          RetractInfo* info = nullptr);

// Relative deviation of (p, z) from semi-symmetric structure: trailing
// factors equal, trailing velocity blocks equal, core and core velocity
// symmetric in the trailing modes. Infinity if trailing shapes differ.
double semi_symmetric_defect(const TuckerPoint& p, const TangentVector& z);

// retract_hosvd for semi-symmetric (p, z), evaluated in symmetric storage:
// one shared trailing basis and cores computed from their unique entries, so
// the result is exactly semi-symmetric. Throws ShapeError if
// semi_symmetric_defect(p, z) > tol.
TuckerPoint retract_hosvd_semi_symmetric(const TuckerPoint& p, const TangentVector& z,
                                         double step, double tol = 1e-10,
                                         RetractInfo* info = nullptr);

// Core i.i.d. N(0,1) of dims (k, r, ..., r); U_0 = I_k; trailing factors are
// Gaussian matrices orthonormalized by QR with a positive R diagonal.
TuckerPoint random_point(Index k, Index m, Index r, int d, std::uint64_t seed);

}  // namespace horrr
