// SPDX-License-Identifier: Apache-2.0
#include "horrr/manifold.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "horrr/error.hpp"
#include "horrr/rng.hpp"

namespace horrr {

namespace {

void check_same_base(const TangentVector& a, const TangentVector& b) {
  if (a.base_id != b.base_id)
    throw ShapeError("tangent vectors anchored at different points cannot be combined");
  if (a.v.size() != b.v.size() || a.g.dims() != b.g.dims())
    throw ShapeError("tangent vectors with different shapes");
}

std::vector<Matrix> transposed_factors(const TuckerPoint& p) {
  std::vector<Matrix> out;
  for (const auto& u : p.factors()) out.push_back(u.transpose());
  return out;
}

Matrix perp(const Matrix& u, const Matrix& m) { return m - u * (u.transpose() * m); }

// dst[offsets + idx] += scale * src[idx] for every idx of src.
void add_block(DenseTensor& dst, const DenseTensor& src, std::span<const Index> offsets,
               double scale) {
  const std::size_t n = src.order();
  std::vector<Index> idx(n, 0), pos(n);
  for (Index lin = 0; lin < src.size(); ++lin) {
    for (std::size_t j = 0; j < n; ++j) pos[j] = idx[j] + offsets[j];
    dst(pos) += scale * src.data()[lin];
    for (std::size_t j = 0; j < n; ++j) {
      if (++idx[j] < src.dim(j)) break;
      idx[j] = 0;
    }
  }
}

}  // namespace

TangentVector& TangentVector::operator+=(const TangentVector& o) {
  check_same_base(*this, o);
  g += o.g;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] += o.v[i];
  return *this;
}

TangentVector& TangentVector::operator-=(const TangentVector& o) {
  check_same_base(*this, o);
  g -= o.g;
  for (std::size_t i = 0; i < v.size(); ++i) v[i] -= o.v[i];
  return *this;
}

TangentVector& TangentVector::operator*=(double s) {
  g *= s;
  for (auto& m : v) m *= s;
  return *this;
}

TangentVector operator+(TangentVector a, const TangentVector& b) { return a += b; }
TangentVector operator-(TangentVector a, const TangentVector& b) { return a -= b; }
TangentVector operator*(double s, TangentVector a) { return a *= s; }

TangentVector zero_tangent(const TuckerPoint& p) {
  TangentVector z;
  z.g = DenseTensor(p.ranks());
  for (const auto& u : p.factors()) z.v.push_back(Matrix::Zero(u.rows(), u.cols()));
  z.base_id = p.id();
  return z;
}

void check_anchor(const TuckerPoint& p, const TangentVector& z) {
  if (z.base_id != p.id()) throw ShapeError("tangent vector is anchored at a different point");
  if (z.g.dims() != p.ranks() || z.v.size() != p.order())
    throw ShapeError("tangent vector shape does not match its base point");
  for (std::size_t i = 0; i < p.order(); ++i)
    if (z.v[i].rows() != p.factor(i).rows() || z.v[i].cols() != p.factor(i).cols())
      throw ShapeError("tangent factor block " + std::to_string(i) + " has the wrong shape");
}

DenseTensor densify(const TuckerPoint& p) {
  return multi_mode_product(p.core(), p.factors());
}

bool is_square_mode(const TuckerPoint& p, std::size_t i) {
  return p.factor(i).rows() == p.factor(i).cols();
}

Matrix core_unfolding_pinv(const DenseTensor& core, std::size_t i) {
  const Matrix c = unfold(core, i);
  if (c.rows() > c.cols())
    throw BoundaryError("core unfolding " + std::to_string(i) + " has more rows than columns");
  Eigen::BDCSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] <= 0 || s[s.size() - 1] < kRankTol * s[0])
    throw BoundaryError("core unfolding " + std::to_string(i) +
                        " is rank deficient (point on the manifold boundary)");
  return svd.matrixV() * s.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

double gauge_defect(const TuckerPoint& p, const TangentVector& z) {
  double worst = 0.0;
  for (std::size_t i = 0; i < p.order(); ++i) {
    const double g = (p.factor(i).transpose() * z.v[i]).norm();
    worst = std::max(worst, g / std::max(1.0, z.v[i].norm()));
  }
  return worst;
}

void enforce_gauge(const TuckerPoint& p, TangentVector& z) {
  check_anchor(p, z);
  for (std::size_t i = 0; i < p.order(); ++i) {
    if (is_square_mode(p, i))
      z.v[i].setZero();
    else
      z.v[i] = perp(p.factor(i), z.v[i]);
  }
}

DenseTensor tangent_to_ambient(const TuckerPoint& p, const TangentVector& z) {
  check_anchor(p, z);
  if (gauge_defect(p, z) > 1e-8) throw ShapeError("tangent vector violates the gauge condition");
  DenseTensor out = multi_mode_product(z.g, p.factors());
  for (std::size_t i = 0; i < p.order(); ++i) {
    if (is_square_mode(p, i) || z.v[i].norm() == 0.0) continue;
    std::vector<Matrix> mats = p.factors();
    mats[i] = z.v[i];
    out += multi_mode_product(p.core(), mats);
  }
  return out;
}

double tangent_inner(const TuckerPoint& p, const TangentVector& a, const TangentVector& b) {
  check_anchor(p, a);
  check_anchor(p, b);
  double s = inner(a.g, b.g);
  for (std::size_t i = 0; i < p.order(); ++i) {
    if (is_square_mode(p, i)) continue;
    const Matrix c = unfold(p.core(), i);
    const Matrix cct = c * c.transpose();
    s += ((a.v[i].transpose() * b.v[i]) * cct).trace();
  }
  return s;
}

double tangent_norm(const TuckerPoint& p, const TangentVector& z) {
  return std::sqrt(std::max(0.0, tangent_inner(p, z, z)));
}

DenseTensor DenseContractions::contract_all(std::span<const Matrix> mats) const {
  return multi_mode_product(a_, mats);
}

Matrix DenseContractions::contract_all_but(std::size_t mode, std::span<const Matrix> mats) const {
  std::vector<Matrix> m(mats.begin(), mats.end());
  m.at(mode) = Matrix();
  return unfold(multi_mode_product(a_, m), mode);
}

DenseTensor TuckerContractions::contract_all(std::span<const Matrix> mats) const {
  if (mats.size() != t_.order()) throw ShapeError("contract_all: one matrix per mode");
  std::vector<Matrix> m(t_.order());
  for (std::size_t j = 0; j < t_.order(); ++j) m[j] = mats[j] * t_.factor(j);
  return multi_mode_product(t_.core(), m);
}

Matrix TuckerContractions::contract_all_but(std::size_t mode, std::span<const Matrix> mats) const {
  if (mats.size() != t_.order() || mode >= t_.order())
    throw ShapeError("contract_all_but: bad arguments");
  std::vector<Matrix> m(t_.order());
  for (std::size_t j = 0; j < t_.order(); ++j)
    if (j != mode) m[j] = mats[j] * t_.factor(j);
  return t_.factor(mode) * unfold(multi_mode_product(t_.core(), m), mode);
}

TuckerPoint tangent_as_tucker(const TuckerPoint& p, const TangentVector& z) {
  check_anchor(p, z);
  const std::size_t n = p.order();
  const auto ranks = p.ranks();
  std::vector<bool> grows(n);
  std::vector<Index> dims(n);
  std::vector<Matrix> factors(n);
  for (std::size_t i = 0; i < n; ++i) {
    grows[i] = !is_square_mode(p, i);
    dims[i] = grows[i] ? 2 * ranks[i] : ranks[i];
    if (grows[i]) {
      factors[i].resize(p.factor(i).rows(), dims[i]);
      factors[i] << p.factor(i), z.v[i];
    } else {
      factors[i] = p.factor(i);
    }
  }
  DenseTensor s(dims);
  std::vector<Index> offsets(n, 0);
  add_block(s, z.g, offsets, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!grows[i]) continue;
    offsets.assign(n, 0);
    offsets[i] = ranks[i];
    add_block(s, p.core(), offsets, 1.0);
  }
  return TuckerPoint(std::move(s), std::move(factors));
}

TangentVector project_to_tangent(const TuckerPoint& p, const AmbientContractions& a) {
  if (a.dims() != p.ambient_dims()) throw ShapeError("projection: ambient dims mismatch");
  const auto ut = transposed_factors(p);
  TangentVector z;
  z.base_id = p.id();
  z.g = a.contract_all(ut);
  for (std::size_t i = 0; i < p.order(); ++i) {
    const Matrix& u = p.factor(i);
    if (is_square_mode(p, i)) {
      z.v.push_back(Matrix::Zero(u.rows(), u.cols()));
      continue;
    }
    const Matrix b = a.contract_all_but(i, ut);
    z.v.push_back(perp(u, b * core_unfolding_pinv(p.core(), i)));
  }
  return z;
}

TangentVector project_to_tangent(const TuckerPoint& p, const DenseTensor& a) {
  return project_to_tangent(p, DenseContractions(a));
}

TangentVector curvature_term(const TuckerPoint& p, const TangentVector& z,
                             const AmbientContractions& a) {
  check_anchor(p, z);
  const std::size_t n = p.order();
  const auto ut = transposed_factors(p);
  std::vector<bool> active(n);
  std::vector<Matrix> vt(n), b(n), pinv(n), cu(n);
  for (std::size_t j = 0; j < n; ++j) {
    active[j] = !is_square_mode(p, j);
    if (!active[j]) continue;
    vt[j] = z.v[j].transpose();
    b[j] = a.contract_all_but(j, ut);
    pinv[j] = core_unfolding_pinv(p.core(), j);
    cu[j] = unfold(p.core(), j);
  }

  TangentVector out = zero_tangent(p);
  out.base_id = z.base_id;
  for (std::size_t j = 0; j < n; ++j) {
    if (!active[j]) continue;
    std::vector<Matrix> mats = ut;
    mats[j] = vt[j];
    out.g += a.contract_all(mats);
    out.g -= mode_product(p.core(), vt[j] * b[j] * pinv[j], j);
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!active[i]) continue;
    const Matrix gi = unfold(z.g, i);
    Matrix m = (b[i] - (b[i] * pinv[i]) * cu[i]) * gi.transpose() * pinv[i].transpose();
    for (std::size_t l = 0; l < n; ++l) {
      if (l == i || !active[l]) continue;
      std::vector<Matrix> mats = ut;
      mats[l] = vt[l];
      m += a.contract_all_but(i, mats);
    }
    out.v[i] = perp(p.factor(i), m) * pinv[i];
  }
  return out;
}

TuckerPoint retract_hosvd(const TuckerPoint& p, const TangentVector& z, double step,
                          RetractInfo* info) {
  check_anchor(p, z);
  const std::size_t n = p.order();
  if (info) info->padded_modes.clear();
  const auto ranks = p.ranks();

  std::vector<bool> grows(n);
  std::vector<Matrix> q(n), r(n);
  std::vector<Index> block_dims(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Matrix& u = p.factor(i);
    grows[i] = !is_square_mode(p, i);
    if (!grows[i]) {
      q[i] = u;
      r[i] = Matrix::Identity(ranks[i], ranks[i]);
      block_dims[i] = ranks[i];
      continue;
    }
    Matrix basis(u.rows(), 2 * ranks[i]);
    basis << u, z.v[i];
    const Index cols = std::min<Index>(u.rows(), basis.cols());
    Eigen::HouseholderQR<Matrix> qr(basis);
    q[i] = qr.householderQ() * Matrix::Identity(u.rows(), cols);
    r[i] = q[i].transpose() * basis;
    block_dims[i] = 2 * ranks[i];
  }

  // Block core of the sum in the bases [U_i V_i].
  DenseTensor s(block_dims);
  std::vector<Index> offsets(n, 0);
  add_block(s, p.core(), offsets, 1.0);
  add_block(s, z.g, offsets, step);
  for (std::size_t i = 0; i < n; ++i) {
    if (!grows[i]) continue;
    offsets.assign(n, 0);
    offsets[i] = ranks[i];
    add_block(s, p.core(), offsets, step);
  }
  s = multi_mode_product(s, r);

  std::vector<Matrix> factors(n), wt(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!grows[i]) {
      factors[i] = p.factor(i);
      wt[i] = Matrix();
      continue;
    }
    Eigen::BDCSVD<Matrix> svd(unfold(s, i), Eigen::ComputeFullU);
    const Vector& sv = svd.singularValues();
    Index numeric_rank = 0;
    if (sv.size() > 0 && sv[0] > 0)
      for (Index k = 0; k < sv.size(); ++k)
        if (sv[k] > kRankTol * sv[0]) ++numeric_rank;
    if (numeric_rank < ranks[i] && info) info->padded_modes.push_back(i);
    Matrix w = svd.matrixU().leftCols(ranks[i]);
    Matrix f = q[i] * w;
    const Vector signs = apply_sign_convention(f);
    w = w * signs.asDiagonal();
    factors[i] = std::move(f);
    wt[i] = w.transpose();
  }
  DenseTensor core = multi_mode_product(s, wt);
  return TuckerPoint(std::move(core), std::move(factors));
}

double semi_symmetric_defect(const TuckerPoint& p, const TangentVector& z) {
  check_anchor(p, z);
  const std::size_t n = p.order();
  if (n <= 2) return 0.0;
  double worst = std::max(semi_symmetry_defect(p.core()), semi_symmetry_defect(z.g));
  const Matrix& u = p.factor(1);
  const Matrix& v = z.v[1];
  for (std::size_t j = 2; j < n; ++j) {
    if (p.factor(j).rows() != u.rows() || p.factor(j).cols() != u.cols())
      return std::numeric_limits<double>::infinity();
    worst = std::max(worst, (p.factor(j) - u).norm() / std::max(1.0, u.norm()));
    worst = std::max(worst, (z.v[j] - v).norm() / std::max(1.0, v.norm()));
  }
  return worst;
}

TuckerPoint retract_hosvd_semi_symmetric(const TuckerPoint& p, const TangentVector& z,
                                         double step, double tol, RetractInfo* info) {
  const double defect = semi_symmetric_defect(p, z);
  if (!(defect <= tol))
    throw ShapeError("retract_hosvd_semi_symmetric: input is not semi-symmetric (defect " +
                     std::to_string(defect) + ")");
  const std::size_t n = p.order();
  if (n <= 2 || is_square_mode(p, 1)) return retract_hosvd(p, z, step, info);
  if (info) info->padded_modes.clear();
  const auto ranks = p.ranks();
  const Index r = ranks[1];
  const Matrix& u = p.factor(1);

  Matrix basis(u.rows(), 2 * r);
  basis << u, z.v[1];
  const Index cols = std::min<Index>(u.rows(), basis.cols());
  Eigen::HouseholderQR<Matrix> qr(basis);
  const Matrix q = qr.householderQ() * Matrix::Identity(u.rows(), cols);
  const Matrix rr = q.transpose() * basis;

  std::vector<Index> block_dims(n, 2 * r);
  block_dims[0] = ranks[0];
  const bool grows0 = !is_square_mode(p, 0);
  if (grows0) block_dims[0] = 2 * ranks[0];
  const DenseTensor core = canonicalize_trailing(p.core());
  DenseTensor s(block_dims);
  std::vector<Index> offsets(n, 0);
  add_block(s, core, offsets, 1.0);
  add_block(s, canonicalize_trailing(z.g), offsets, step);
  for (std::size_t i = grows0 ? 0 : 1; i < n; ++i) {
    offsets.assign(n, 0);
    offsets[i] = ranks[i];
    add_block(s, core, offsets, step);
  }

  std::vector<Matrix> rmats(n, rr);
  Matrix q0 = p.factor(0);
  if (grows0) {
    Matrix b0(q0.rows(), 2 * ranks[0]);
    b0 << p.factor(0), z.v[0];
    Eigen::HouseholderQR<Matrix> qr0(b0);
    q0 = qr0.householderQ() * Matrix::Identity(b0.rows(), std::min<Index>(b0.rows(), b0.cols()));
    rmats[0] = q0.transpose() * b0;
  } else {
    rmats[0] = Matrix::Identity(ranks[0], ranks[0]);
  }
  s = canonicalize_trailing(multi_mode_product(s, rmats));

  auto leading = [&](std::size_t mode, Index rank, const Matrix& basis_q, Matrix& factor) {
    Eigen::BDCSVD<Matrix> svd(unfold(s, mode), Eigen::ComputeFullU);
    const Vector& sv = svd.singularValues();
    Index numeric_rank = 0;
    if (sv.size() > 0 && sv[0] > 0)
      for (Index k = 0; k < sv.size(); ++k)
        if (sv[k] > kRankTol * sv[0]) ++numeric_rank;
    if (numeric_rank < rank && info) info->padded_modes.push_back(mode);
    Matrix w = svd.matrixU().leftCols(rank);
    factor = basis_q * w;
    const Vector signs = apply_sign_convention(factor);
    return Matrix((w * signs.asDiagonal()).transpose());
  };

  std::vector<Matrix> wt(n), factors(n);
  if (grows0) {
    wt[0] = leading(0, ranks[0], q0, factors[0]);
  } else {
    factors[0] = p.factor(0);
  }
  Matrix shared;
  const Matrix w1 = leading(1, r, q, shared);
  for (std::size_t j = 1; j < n; ++j) {
    wt[j] = w1;
    factors[j] = shared;
  }
  DenseTensor new_core = canonicalize_trailing(multi_mode_product(s, wt));
  return TuckerPoint(std::move(new_core), std::move(factors));
}

TuckerPoint random_point(Index k, Index m, Index r, int d, std::uint64_t seed) {
  if (k < 1 || m < 1 || r < 1 || d < 1) throw ShapeError("random_point: sizes must be positive");
  if (r > m) throw ShapeError("random_point: rank exceeds feature dimension");
  NormalRng rng(seed);
  std::vector<Index> dims{k};
  for (int j = 0; j < d; ++j) dims.push_back(r);
  DenseTensor core = rng.normal_tensor(dims);
  std::vector<Matrix> factors{Matrix::Identity(k, k)};
  for (int j = 0; j < d; ++j) {
    Matrix g = rng.normal_matrix(m, r);
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix qm = qr.householderQ() * Matrix::Identity(m, r);
    const auto diag = qr.matrixQR().diagonal();
    for (Index c = 0; c < r; ++c)
      if (diag[c] < 0) qm.col(c) *= -1.0;
    factors.push_back(std::move(qm));
  }
  return TuckerPoint(std::move(core), std::move(factors));
}

}  // namespace horrr
