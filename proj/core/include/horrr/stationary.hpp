// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "horrr/manifold.hpp"
#include "horrr/problem.hpp"
#include "horrr/tensor.hpp"

namespace horrr {

// Relative gap below which neighbouring singular values / eigenvalues are
// treated as repeated.
inline constexpr double kDegenerateGap = 1e-10;

// ---- d = 1 ----------------------------------------------------------------

struct RrrSolution {
  Matrix w;                 // k x m, rank <= r
  Vector singular_values;   // of Yh Xh^+ Xh, descending
  double boundary_gap = 0;  // (s_r - s_{r+1}) / s_1, +inf when r >= rank
  bool unique = true;       // false when boundary_gap <= kDegenerateGap
};

// Ridge reduced-rank regression: W = [Yh Xh^+ Xh]_r Xh^+ with
// Xh = [X sqrt(lambda) I], Yh = [Y 0]. lambda = 0 needs X of full row rank.
RrrSolution rrr_closed_form(const Matrix& x, const Matrix& y, Index r, double lambda);

struct PencilEigenpair {
  double gamma = 0;
  Vector v;  // unit norm
};

struct PencilPoint {
  Matrix w;  // k x m, rank one
  PencilEigenpair pair;
};

struct SkippedEigenpair {
  Index index = 0;
  double mu = 0;  // eigenvalue of the whitened T; gamma = 1 / mu
  std::string reason;
};

struct PencilAnalysis {
  std::vector<PencilPoint> points;  // ascending gamma
  std::vector<SkippedEigenpair> skipped;
  nlohmann::json to_json() const;
};

// Augmented data (Xh, Yh) used for lambda > 0. Identity for lambda = 0.
std::pair<Matrix, Matrix> ridge_augment(const Matrix& x, const Matrix& y, double lambda);

// ||S v - gamma T v|| / (||S|| ||v||) for the pencil (Xh Xh^T, Xh Yh^T Yh Xh^T).
double pencil_residual(const Matrix& x, const Matrix& y, double lambda, const PencilEigenpair& e);

// Rank-one stationary points from the finite eigenpairs of the pencil
// (Xh Xh^T, Xh Yh^T Yh Xh^T); all m eigenpairs are enumerated and the ones
// with Yh Xh^T v numerically zero are reported in `skipped`.
PencilAnalysis pencil_stationary_points_d1(const Matrix& x, const Matrix& y, double lambda);

// Sum of the selected rank-one stationary points. Throws ShapeError on
// repeated or out-of-range indices.
Matrix combine_rank_r(std::span<const Matrix> points, std::span<const std::size_t> indices);

// Tucker form <diag(s); U_r, V_r> of a k x m matrix, truncated to rank r.
TuckerPoint matrix_point(const Matrix& w, Index r);

// d = 1 problem wrapper around raw data.
HorrrProblem linear_problem(const Matrix& x, const Matrix& y, double lambda, Index rank);

struct OrthogonalizedProblem {
  Matrix q;  // m x n, orthonormal rows
  Matrix l;  // m x m lower triangular, positive diagonal; X = L Q
  HorrrProblem problem;  // (Q, Y), d = 1, lambda = 0
};

// Throws NumericalError when X is rank deficient.
OrthogonalizedProblem orthogonalize_problem(const Matrix& x, const Matrix& y);

struct NegativityCertificate {
  bool exists = false;  // false at the RRR point
  std::string note;
  double scale = 0;      // c with Y -> c Y making the RRR singular value 1
  double sigma = 0;      // sigma' of the normalized point
  TuckerPoint point;     // normalized point on the (Q, cY) problem
  TangentVector z;       // certificate direction
  double value = 0;      // <Z, Hess[Z]>
  double expected = 0;   // 2 sigma' (sigma' - 1)
  HorrrProblem problem;  // (Q, cY)
};

// Descent-of-curvature certificate at a rank-one stationary point of the
// lambda = 0 problem. The point is moved to the orthonormalized, rescaled
// problem and Z pairs it with the RRR singular vectors.
NegativityCertificate negativity_certificate_d1(const Matrix& x, const Matrix& y,
                                                const Matrix& w_stationary);

// ---- d = 2, r = 1 ---------------------------------------------------------

// (Z_XX u, Z_XY u) for the higher-order Gram tensors, from s = u^T X:
// Z_XX u = X (s^3)^T, Z_XY u = X diag(s) Y^T Y (s^2)^T.
std::pair<Vector, Vector> tensor_pencil_contractions(const Matrix& x, const Matrix& y,
                                                     const Vector& u);

struct BEigenInfo {
  Vector b;  // (u^T X)^2, length n
  Vector c;  // Y b / ||b||^2
  double gamma = 0;
  double residual = 0;
};

// Throws NumericalError when ||u|| is not 1 or B vanishes.
BEigenInfo b_eigen_analysis(const Matrix& x, const Matrix& y, const Vector& u);
double b_eigen_residual(const Matrix& x, const Matrix& y, const Vector& u);

// <C; I_k, u, u> with squeezed core c = Y B^T / ||B||^2.
TuckerPoint build_w_from_b_eigvec(const Matrix& x, const Matrix& y, const Vector& u);

struct OrderRow {
  double gamma = 0;
  double cost = 0;           // ||W X - Y||^2
  double identity_rhs = 0;   // ||Y||^2 - ||c||^2 ||B||^2
  double gamma_rhs = 0;      // ||Y||^2 - 1 / gamma
  double identity_err = 0;   // relative
  double gamma_err = 0;      // relative
};

struct OrderCheck {
  std::vector<OrderRow> rows;
  bool ordering_consistent = true;
  bool identities_hold = true;
  bool passed() const { return ordering_consistent && identities_hold; }
  nlohmann::json to_json() const;
};

struct GammaPoint {
  TuckerPoint point;  // d = 2, trailing ranks 1
  double gamma = 0;
};

// Cost ordering vs gamma ordering for d = 2, r = 1 stationary points;
// identities are checked to `tol` relative to ||Y||^2.
OrderCheck cost_eigen_order_check(const Matrix& x, const Matrix& y,
                                  std::span<const GammaPoint> points, double tol = 1e-8);

}  // namespace horrr
