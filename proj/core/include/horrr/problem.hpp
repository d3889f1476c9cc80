// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "horrr/manifold.hpp"

namespace horrr {

// min_W 1/2 (||W X - Y||_F^2 + lambda ||W||_F^2) over tensors W of dims
// (k, m, ..., m) with trailing multilinear ranks r. Samples are columns.
struct HorrrProblem {
  Matrix x;  // m x n
  Matrix y;  // k x n
  double lambda = 0.0;
  int degree = 1;
  Index rank = 1;

  Index k() const { return y.rows(); }
  Index m() const { return x.rows(); }
  Index n() const { return x.cols(); }
  void validate() const;
  bool x_full_row_rank() const;
};

// Loads X and Y (X.bin/Y.bin or X.csv/Y.csv) plus problem.json from `dir`.
HorrrProblem load_problem(const std::filesystem::path& dir);
// Writes X.bin, Y.bin and problem.json (merged with `extra`).
void save_problem(const std::filesystem::path& dir, const HorrrProblem& prob,
                  const nlohmann::json& extra = nlohmann::json::object());

// Intermediates of W X shared by cost, gradient and Hessian. Keyed by the
// point id and problem address; stale entries are rebuilt on prepare().
class GradientWorkspace {
 public:
  struct State {
    std::vector<Matrix> utx;  // utx[j] = U_j^T X for j >= 1; utx[0] unused
    Matrix kr;                // U_N^T X (.) ... (.) U_1^T X
    Matrix wx;                // W X
    Matrix residual;          // W X - Y
  };

  const State& prepare(const HorrrProblem& prob, const TuckerPoint& p);
  void invalidate() { valid_ = false; }
  std::uint64_t point_id() const { return valid_ ? point_id_ : 0; }
  std::uint64_t rebuilds() const { return rebuilds_; }

 private:
  State state_;
  bool valid_ = false;
  std::uint64_t point_id_ = 0;
  const HorrrProblem* problem_ = nullptr;
  std::uint64_t rebuilds_ = 0;
};

void check_compatible(const HorrrProblem& prob, const TuckerPoint& p);

double cost(const HorrrProblem& prob, const TuckerPoint& p);
double cost(const HorrrProblem& prob, const TuckerPoint& p, GradientWorkspace& ws);

// ||Y||_F * ||X^{(.)d}||_F; natural scale of the Euclidean gradient.
double gradient_scale(const HorrrProblem& prob);

TangentVector riemannian_gradient(const HorrrProblem& prob, const TuckerPoint& p,
                                  GradientWorkspace& ws);
TangentVector riemannian_gradient(const HorrrProblem& prob, const TuckerPoint& p);

// amb(z) X, evaluated through the tangent structure.
Matrix tangent_apply(const HorrrProblem& prob, const TuckerPoint& p, const TangentVector& z,
                     GradientWorkspace& ws);

TangentVector hessian_vec(const HorrrProblem& prob, const TuckerPoint& p, const TangentVector& z,
                          GradientWorkspace& ws);
TangentVector hessian_vec(const HorrrProblem& prob, const TuckerPoint& p, const TangentVector& z);

// Euclidean gradient [[1; Q, X, ..., X]] + lambda W exposed through the
// contraction interface; Q = W X - Y gives the gradient of the cost.
class HorrrGradientContractions final : public AmbientContractions {
 public:
  HorrrGradientContractions(const HorrrProblem& prob, const TuckerPoint& p, Matrix q,
                            double lambda);
  std::vector<Index> dims() const override;
  DenseTensor contract_all(std::span<const Matrix> mats) const override;
  Matrix contract_all_but(std::size_t mode, std::span<const Matrix> mats) const override;

 private:
  const Matrix& data(std::size_t mode) const { return mode == 0 ? q_ : prob_.x; }
  const HorrrProblem& prob_;
  const TuckerPoint& p_;
  Matrix q_;
  double lambda_;
};

double residual_condition_gap(const HorrrProblem& prob, const TuckerPoint& p);

// Replaces the core by the exact minimizer of the cost with factors fixed.
TuckerPoint recore(const HorrrProblem& prob, const TuckerPoint& p);

struct StationarityReport {
  // ||lambda U_i - data_i K_i^T C_(i)^+||_F per mode; NaN for square modes,
  // where the condition carries no information.
  std::vector<double> factor_residuals;
  double core_residual = 0.0;  // ||G||_F of the gradient core block
  double residual_condition_gap = 0.0;
  double gradient_norm = 0.0;
  double scale = 1.0;  // gradient_scale(prob)
  double max_relative() const;
  nlohmann::json to_json() const;
};

StationarityReport stationarity_report(const HorrrProblem& prob, const TuckerPoint& p);

struct RegularizedCost {
  double value = 0.0;
  bool near_boundary = false;  // some core singular value below cutoff
};

RegularizedCost regularized_cost(const HorrrProblem& prob, const TuckerPoint& p, double tau);
// Riemannian gradient of the barrier term alone: {D; 0, ..., 0}.
TangentVector regularizer_gradient(const TuckerPoint& p, double tau);

}  // namespace horrr
