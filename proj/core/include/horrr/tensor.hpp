// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace horrr {

using Index = Eigen::Index;
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Relative cutoff below which singular values count as zero.
inline constexpr double kRankTol = 1e-12;

// Dense tensor stored with mode 0 varying fastest (column-major in the
// matrix case). Modes are 0-based throughout the library.
class DenseTensor {
 public:
  DenseTensor() = default;
  explicit DenseTensor(std::vector<Index> dims);
  DenseTensor(std::vector<Index> dims, Vector data);

  static DenseTensor from_matrix(const Matrix& m);
  static DenseTensor from_vector(const Vector& v);

  const std::vector<Index>& dims() const { return dims_; }
  Index dim(std::size_t mode) const;
  std::size_t order() const { return dims_.size(); }
  Index size() const { return data_.size(); }

  const Vector& data() const { return data_; }
  Vector& data() { return data_; }

  // Linear offset of a multi-index.
  Index offset(std::span<const Index> idx) const;
  double& operator()(std::span<const Index> idx) { return data_[offset(idx)]; }
  double operator()(std::span<const Index> idx) const { return data_[offset(idx)]; }
  double& at(std::initializer_list<Index> idx);
  double at(std::initializer_list<Index> idx) const;

  double norm() const { return data_.norm(); }
  Matrix as_matrix() const;  // order-2 only

  DenseTensor& operator+=(const DenseTensor& o);
  DenseTensor& operator-=(const DenseTensor& o);
  DenseTensor& operator*=(double s);

 private:
  std::vector<Index> dims_;
  Vector data_;
};

DenseTensor operator+(DenseTensor a, const DenseTensor& b);
DenseTensor operator-(DenseTensor a, const DenseTensor& b);
DenseTensor operator*(double s, DenseTensor a);

double inner(const DenseTensor& a, const DenseTensor& b);

Index product(std::span<const Index> dims);

// n_mode x prod_{j != mode} n_j, remaining modes in increasing order with the
// lowest one varying fastest (Kolda-Bader).
Matrix unfold(const DenseTensor& t, std::size_t mode);
DenseTensor fold(const Matrix& m, std::size_t mode, std::span<const Index> dims);

DenseTensor mode_product(const DenseTensor& t, const Matrix& m, std::size_t mode);
// Applies mats[j] along mode j for every j; an empty matrix skips the mode.
DenseTensor multi_mode_product(const DenseTensor& t, std::span<const Matrix> mats);

// Column-wise Kronecker product; b's row index varies fastest.
Matrix khatri_rao(const Matrix& a, const Matrix& b);
// mats[last] (.) ... (.) mats[0], so that mats[0]'s row index varies fastest.
// This is the column factor of an unfolding of a CP/Tucker tensor.
Matrix khatri_rao_modes(std::span<const Matrix> mats);
// X^{(.)d}: m^d x n. Expensive; meant for oracles at small m.
Matrix kr_power(const Matrix& x, int d);

// A_(0) X^{(.)d} for A of dims (k, m, ..., m).
Matrix apply_dense(const DenseTensor& a, const Matrix& x);

// U_0 C_(0) [U_N^T X (.) ... (.) U_1^T X] without densifying.
Matrix apply_tucker(const DenseTensor& core, std::span<const Matrix> factors, const Matrix& x);

// Permute modes: result mode j is input mode perm[j].
DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> perm);
// Average over all permutations of the trailing modes 1..order-1.
DenseTensor symmetrize_trailing(const DenseTensor& t);
// max_{p,q >= 1} ||t_(p) - t_(q)||_F / ||t||_F; infinity if trailing dims differ.
double semi_symmetry_defect(const DenseTensor& t);
bool is_semi_symmetric(const DenseTensor& t, double tol);
// Copies every entry from the representative whose trailing indices are
// sorted, i.e. evaluates a semi-symmetric tensor from its unique entries.
// Result is exactly (bitwise) semi-symmetric.
DenseTensor canonicalize_trailing(const DenseTensor& t);

DenseTensor squeeze(const DenseTensor& t, std::size_t mode);
DenseTensor expand(const DenseTensor& t, std::size_t mode);

// Numerical rank of each unfolding with relative cutoff `rel_tol`.
std::vector<Index> multilinear_rank(const DenseTensor& t, double rel_tol = kRankTol);

// Flip columns so each column's largest-magnitude entry is positive (ties go
// to the lowest row index). Returns the applied signs.
Vector apply_sign_convention(Matrix& m);

struct CPRepresentation {
  Vector weights;
  std::vector<Matrix> factors;

  Index rank() const { return weights.size(); }
  void validate() const;
  DenseTensor densify() const;
  // unfold(densify(), mode) without forming the tensor.
  Matrix unfold(std::size_t mode) const;
};

}  // namespace horrr
