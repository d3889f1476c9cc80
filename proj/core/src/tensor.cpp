// SPDX-License-Identifier: Apache-2.0
#include "horrr/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "horrr/error.hpp"
#include "horrr/tucker_point.hpp"

namespace horrr {

namespace {

std::string dims_str(std::span<const Index> dims) {
  std::string s = "(";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + ")";
}

void check_mode(const DenseTensor& t, std::size_t mode) {
  if (mode >= t.order())
    throw ShapeError("mode " + std::to_string(mode) + " out of range for order " +
                     std::to_string(t.order()));
}

// Sizes of the blocks before and after `mode`.
std::pair<Index, Index> split(std::span<const Index> dims, std::size_t mode) {
  Index left = 1, right = 1;
  for (std::size_t i = 0; i < mode; ++i) left *= dims[i];
  for (std::size_t i = mode + 1; i < dims.size(); ++i) right *= dims[i];
  return {left, right};
}

}  // namespace

Index product(std::span<const Index> dims) {
  Index p = 1;
  for (Index d : dims) p *= d;
  return p;
}

DenseTensor::DenseTensor(std::vector<Index> dims) : dims_(std::move(dims)) {
  if (dims_.empty()) throw ShapeError("tensor order must be at least 1");
  for (Index d : dims_)
    if (d <= 0) throw ShapeError("tensor dimensions must be positive: " + dims_str(dims_));
  data_ = Vector::Zero(product(dims_));
}

DenseTensor::DenseTensor(std::vector<Index> dims, Vector data) : DenseTensor(std::move(dims)) {
  if (data.size() != data_.size())
    throw ShapeError("data length " + std::to_string(data.size()) + " does not match dims " +
                     dims_str(dims_));
  data_ = std::move(data);
}

DenseTensor DenseTensor::from_matrix(const Matrix& m) {
  return DenseTensor({m.rows(), m.cols()}, Eigen::Map<const Vector>(m.data(), m.size()));
}

DenseTensor DenseTensor::from_vector(const Vector& v) { return DenseTensor({v.size()}, v); }

Index DenseTensor::dim(std::size_t mode) const {
  if (mode >= dims_.size()) throw ShapeError("mode out of range");
  return dims_[mode];
}

Index DenseTensor::offset(std::span<const Index> idx) const {
  if (idx.size() != dims_.size()) throw ShapeError("index arity does not match tensor order");
  Index off = 0, stride = 1;
  for (std::size_t i = 0; i < dims_.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= dims_[i]) throw ShapeError("index out of range");
    off += idx[i] * stride;
    stride *= dims_[i];
  }
  return off;
}

double& DenseTensor::at(std::initializer_list<Index> idx) {
  return data_[offset(std::span<const Index>(idx.begin(), idx.size()))];
}

double DenseTensor::at(std::initializer_list<Index> idx) const {
  return data_[offset(std::span<const Index>(idx.begin(), idx.size()))];
}

Matrix DenseTensor::as_matrix() const {
  if (order() == 1) return data_;
  if (order() != 2) throw ShapeError("as_matrix needs an order-2 tensor");
  return Eigen::Map<const Matrix>(data_.data(), dims_[0], dims_[1]);
}

DenseTensor& DenseTensor::operator+=(const DenseTensor& o) {
  if (o.dims_ != dims_) throw ShapeError("tensor sum with mismatched dims");
  data_ += o.data_;
  return *this;
}

DenseTensor& DenseTensor::operator-=(const DenseTensor& o) {
  if (o.dims_ != dims_) throw ShapeError("tensor difference with mismatched dims");
  data_ -= o.data_;
  return *this;
}

DenseTensor& DenseTensor::operator*=(double s) {
  data_ *= s;
  return *this;
}

DenseTensor operator+(DenseTensor a, const DenseTensor& b) { return a += b; }
DenseTensor operator-(DenseTensor a, const DenseTensor& b) { return a -= b; }
DenseTensor operator*(double s, DenseTensor a) { return a *= s; }

double inner(const DenseTensor& a, const DenseTensor& b) {
  if (a.dims() != b.dims()) throw ShapeError("inner product with mismatched dims");
  return a.data().dot(b.data());
}

Matrix unfold(const DenseTensor& t, std::size_t mode) {
  check_mode(t, mode);
  const auto& dims = t.dims();
  const Index n = dims[mode];
  auto [left, right] = split(dims, mode);
  Matrix out(n, left * right);
  const double* src = t.data().data();
  for (Index r = 0; r < right; ++r) {
    Eigen::Map<const Matrix> block(src + left * n * r, left, n);
    out.block(0, left * r, n, left) = block.transpose();
  }
  return out;
}

DenseTensor fold(const Matrix& m, std::size_t mode, std::span<const Index> dims) {
  DenseTensor t(std::vector<Index>(dims.begin(), dims.end()));
  check_mode(t, mode);
  const Index n = dims[mode];
  auto [left, right] = split(dims, mode);
  if (m.rows() != n || m.cols() != left * right)
    throw ShapeError("fold: matrix shape does not match dims " + dims_str(dims));
  double* dst = t.data().data();
  for (Index r = 0; r < right; ++r) {
    Eigen::Map<Matrix> block(dst + left * n * r, left, n);
    block = m.block(0, left * r, n, left).transpose();
  }
  return t;
}

DenseTensor mode_product(const DenseTensor& t, const Matrix& m, std::size_t mode) {
  check_mode(t, mode);
  const auto& dims = t.dims();
  const Index n = dims[mode];
  if (m.cols() != n)
    throw ShapeError("mode_product: matrix has " + std::to_string(m.cols()) +
                     " columns, mode " + std::to_string(mode) + " has size " + std::to_string(n));
  std::vector<Index> out_dims = dims;
  out_dims[mode] = m.rows();
  DenseTensor out(out_dims);
  auto [left, right] = split(dims, mode);
  const Index p = m.rows();
  for (Index r = 0; r < right; ++r) {
    Eigen::Map<const Matrix> in(t.data().data() + left * n * r, left, n);
    Eigen::Map<Matrix> dst(out.data().data() + left * p * r, left, p);
    dst.noalias() = in * m.transpose();
  }
  return out;
}

DenseTensor multi_mode_product(const DenseTensor& t, std::span<const Matrix> mats) {
  if (mats.size() != t.order()) throw ShapeError("multi_mode_product: one matrix per mode");
  DenseTensor out = t;
  for (std::size_t j = 0; j < mats.size(); ++j)
    if (mats[j].size() != 0) out = mode_product(out, mats[j], j);
  return out;
}

Matrix khatri_rao(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols())
    throw ShapeError("khatri_rao: column counts differ (" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.cols()) + ")");
  const Index ra = a.rows(), rb = b.rows();
  Matrix out(ra * rb, a.cols());
  for (Index c = 0; c < a.cols(); ++c)
    for (Index i = 0; i < ra; ++i) out.col(c).segment(i * rb, rb) = a(i, c) * b.col(c);
  return out;
}

Matrix khatri_rao_modes(std::span<const Matrix> mats) {
  if (mats.empty()) throw ShapeError("khatri_rao_modes: empty list");
  Matrix out = mats[0];
  for (std::size_t j = 1; j < mats.size(); ++j) out = khatri_rao(mats[j], out);
  return out;
}

Matrix kr_power(const Matrix& x, int d) {
  if (d < 1) throw ShapeError("kr_power: degree must be >= 1");
  Matrix out = x;
  for (int j = 1; j < d; ++j) out = khatri_rao(x, out);
  return out;
}

Matrix apply_dense(const DenseTensor& a, const Matrix& x) {
  if (a.order() < 2) throw ShapeError("apply_dense: tensor must have order >= 2");
  for (std::size_t j = 1; j < a.order(); ++j)
    if (a.dim(j) != x.rows())
      throw ShapeError("apply_dense: trailing mode " + std::to_string(j) + " has size " +
                       std::to_string(a.dim(j)) + ", X has " + std::to_string(x.rows()) + " rows");
  return unfold(a, 0) * kr_power(x, static_cast<int>(a.order() - 1));
}

Matrix apply_tucker(const DenseTensor& core, std::span<const Matrix> factors, const Matrix& x) {
  if (core.order() < 2 || factors.size() != core.order())
    throw ShapeError("apply_tucker: need one factor per core mode and order >= 2");
  for (std::size_t j = 0; j < factors.size(); ++j) {
    if (factors[j].cols() != core.dim(j))
      throw ShapeError("apply_tucker: factor " + std::to_string(j) + " does not match the core");
    if (j > 0 && factors[j].rows() != x.rows())
      throw ShapeError("apply_tucker: trailing factor " + std::to_string(j) +
                       " row count differs from X");
  }
  std::vector<Matrix> projected;
  for (std::size_t j = 1; j < factors.size(); ++j) projected.push_back(factors[j].transpose() * x);
  return factors[0] * (unfold(core, 0) * khatri_rao_modes(projected));
}

DenseTensor permute(const DenseTensor& t, std::span<const std::size_t> perm) {
  const std::size_t n = t.order();
  if (perm.size() != n) throw ShapeError("permute: permutation length mismatch");
  std::vector<bool> seen(n, false);
  for (auto p : perm) {
    if (p >= n || seen[p]) throw ShapeError("permute: not a permutation");
    seen[p] = true;
  }
  std::vector<Index> out_dims(n);
  for (std::size_t j = 0; j < n; ++j) out_dims[j] = t.dim(perm[j]);
  // Stride in the source for each output mode.
  std::vector<Index> src_stride(n), stride(n);
  Index s = 1;
  for (std::size_t i = 0; i < n; ++i) {
    stride[i] = s;
    s *= t.dim(i);
  }
  for (std::size_t j = 0; j < n; ++j) src_stride[j] = stride[perm[j]];
  DenseTensor out(out_dims);
  std::vector<Index> idx(n, 0);
  Index src = 0;
  for (Index lin = 0; lin < out.size(); ++lin) {
    out.data()[lin] = t.data()[src];
    for (std::size_t j = 0; j < n; ++j) {
      if (++idx[j] < out_dims[j]) {
        src += src_stride[j];
        break;
      }
      src -= (out_dims[j] - 1) * src_stride[j];
      idx[j] = 0;
    }
  }
  return out;
}

DenseTensor symmetrize_trailing(const DenseTensor& t) {
  const std::size_t n = t.order();
  if (n <= 2) return t;
  for (std::size_t j = 2; j < n; ++j)
    if (t.dim(j) != t.dim(1)) throw ShapeError("symmetrize_trailing: trailing dims differ");
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), 0);
  DenseTensor acc(t.dims());
  int count = 0;
  do {
    acc += permute(t, perm);
    ++count;
  } while (std::next_permutation(perm.begin() + 1, perm.end()));
  acc *= 1.0 / count;
  return acc;
}

double semi_symmetry_defect(const DenseTensor& t) {
  const std::size_t n = t.order();
  if (n <= 2) return 0.0;
  for (std::size_t j = 2; j < n; ++j)
    if (t.dim(j) != t.dim(1)) return std::numeric_limits<double>::infinity();
  const double nrm = t.norm();
  if (nrm == 0.0) return 0.0;
  std::vector<Matrix> unf;
  for (std::size_t j = 1; j < n; ++j) unf.push_back(unfold(t, j));
  double worst = 0.0;
  for (std::size_t p = 0; p < unf.size(); ++p)
    for (std::size_t q = p + 1; q < unf.size(); ++q)
      worst = std::max(worst, (unf[p] - unf[q]).norm());
  return worst / nrm;
}

bool is_semi_symmetric(const DenseTensor& t, double tol) { return semi_symmetry_defect(t) <= tol; }

DenseTensor canonicalize_trailing(const DenseTensor& t) {
  const std::size_t n = t.order();
  if (n <= 2) return t;
  for (std::size_t j = 2; j < n; ++j)
    if (t.dim(j) != t.dim(1)) throw ShapeError("canonicalize_trailing: trailing dims differ");
  DenseTensor out(t.dims());
  std::vector<Index> idx(n, 0), sorted(n);
  for (Index lin = 0; lin < t.size(); ++lin) {
    sorted = idx;
    std::sort(sorted.begin() + 1, sorted.end());
    out.data()[lin] = t(sorted);
    for (std::size_t j = 0; j < n; ++j) {
      if (++idx[j] < t.dim(j)) break;
      idx[j] = 0;
    }
  }
  return out;
}

DenseTensor squeeze(const DenseTensor& t, std::size_t mode) {
  check_mode(t, mode);
  if (t.dim(mode) != 1) throw ShapeError("squeeze: mode is not a singleton");
  if (t.order() == 1) throw ShapeError("squeeze: cannot drop the last mode");
  std::vector<Index> dims = t.dims();
  dims.erase(dims.begin() + static_cast<std::ptrdiff_t>(mode));
  return DenseTensor(dims, t.data());
}

DenseTensor expand(const DenseTensor& t, std::size_t mode) {
  if (mode > t.order()) throw ShapeError("expand: mode out of range");
  std::vector<Index> dims = t.dims();
  dims.insert(dims.begin() + static_cast<std::ptrdiff_t>(mode), 1);
  return DenseTensor(dims, t.data());
}

std::vector<Index> multilinear_rank(const DenseTensor& t, double rel_tol) {
  std::vector<Index> ranks;
  for (std::size_t j = 0; j < t.order(); ++j) {
    Eigen::BDCSVD<Matrix> svd(unfold(t, j));
    const Vector& s = svd.singularValues();
    Index r = 0;
    if (s.size() > 0 && s[0] > 0)
      for (Index i = 0; i < s.size(); ++i)
        if (s[i] > rel_tol * s[0]) ++r;
    ranks.push_back(r);
  }
  return ranks;
}

Vector apply_sign_convention(Matrix& m) {
  Vector signs = Vector::Ones(m.cols());
  for (Index c = 0; c < m.cols(); ++c) {
    Index best = 0;
    double best_abs = -1.0;
    for (Index i = 0; i < m.rows(); ++i) {
      const double a = std::abs(m(i, c));
      if (a > best_abs) {
        best_abs = a;
        best = i;
      }
    }
    if (m.rows() > 0 && m(best, c) < 0) {
      m.col(c) *= -1.0;
      signs[c] = -1.0;
    }
  }
  return signs;
}

void CPRepresentation::validate() const {
  if (factors.empty()) throw ShapeError("CP representation needs at least one factor");
  for (const auto& f : factors)
    if (f.cols() != weights.size()) throw ShapeError("CP factors must share the column count");
}

Matrix CPRepresentation::unfold(std::size_t mode) const {
  validate();
  if (mode >= factors.size()) throw ShapeError("mode out of range");
  if (factors.size() == 1) return factors[0] * weights;
  std::vector<Matrix> others;
  for (std::size_t j = 0; j < factors.size(); ++j)
    if (j != mode) others.push_back(factors[j]);
  return factors[mode] * weights.asDiagonal() * khatri_rao_modes(others).transpose();
}

DenseTensor CPRepresentation::densify() const {
  validate();
  std::vector<Index> dims;
  for (const auto& f : factors) dims.push_back(f.rows());
  return fold(unfold(0), 0, dims);
}

// ---------------------------------------------------------------------------

namespace {
std::atomic<std::uint64_t> next_point_id{1};
}

TuckerPoint::TuckerPoint(DenseTensor core, std::vector<Matrix> factors)
    : core_(std::move(core)), factors_(std::move(factors)), id_(next_point_id++) {
  if (core_.order() != factors_.size())
    throw ShapeError("Tucker point: core order " + std::to_string(core_.order()) + " but " +
                     std::to_string(factors_.size()) + " factors");
  for (std::size_t i = 0; i < factors_.size(); ++i)
    if (factors_[i].cols() != core_.dim(i))
      throw ShapeError("Tucker point: factor " + std::to_string(i) + " has " +
                       std::to_string(factors_[i].cols()) + " columns, core mode has size " +
                       std::to_string(core_.dim(i)));
}

std::vector<Index> TuckerPoint::ambient_dims() const {
  std::vector<Index> d;
  for (const auto& f : factors_) d.push_back(f.rows());
  return d;
}

double TuckerPoint::orthonormality_defect() const {
  double worst = 0.0;
  for (const auto& u : factors_) {
    Matrix g = u.transpose() * u;
    g.diagonal().array() -= 1.0;
    worst = std::max(worst, g.cwiseAbs().maxCoeff());
  }
  return worst;
}

TuckerPoint hosvd(const DenseTensor& t, std::span<const Index> ranks, HosvdInfo* info) {
  if (ranks.size() != t.order()) throw ShapeError("hosvd: one rank per mode required");
  if (info) info->padded_modes.clear();
  std::vector<Matrix> factors, transposed;
  for (std::size_t j = 0; j < t.order(); ++j) {
    if (ranks[j] < 1 || ranks[j] > t.dim(j))
      throw ShapeError("hosvd: rank " + std::to_string(ranks[j]) + " invalid for mode " +
                       std::to_string(j) + " of size " + std::to_string(t.dim(j)));
    Eigen::BDCSVD<Matrix> svd(unfold(t, j), Eigen::ComputeFullU);
    const Vector& s = svd.singularValues();
    Index numeric_rank = 0;
    if (s.size() > 0 && s[0] > 0)
      for (Index i = 0; i < s.size(); ++i)
        if (s[i] > kRankTol * s[0]) ++numeric_rank;
    if (numeric_rank < ranks[j] && info) info->padded_modes.push_back(j);
    Matrix u = svd.matrixU().leftCols(ranks[j]);
    apply_sign_convention(u);
    transposed.push_back(u.transpose());
    factors.push_back(std::move(u));
  }
  DenseTensor core = multi_mode_product(t, transposed);
  return TuckerPoint(std::move(core), std::move(factors));
}

}  // namespace horrr
