// SPDX-License-Identifier: Apache-2.0
#include "horrr/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "horrr/error.hpp"

namespace horrr {

namespace {

void check_data(const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols())
    throw ShapeError("X and Y must have the same number of columns");
  if (x.size() == 0 || y.size() == 0) throw ShapeError("empty data");
}

}  // namespace

std::pair<Matrix, Matrix> ridge_augment(const Matrix& x, const Matrix& y, double lambda) {
  check_data(x, y);
  if (!(lambda >= 0)) throw ShapeError("lambda must be non-negative");
  if (lambda == 0) return {x, y};
  const Index m = x.rows(), n = x.cols(), k = y.rows();
  Matrix xh(m, n + m), yh = Matrix::Zero(k, n + m);
  xh << x, std::sqrt(lambda) * Matrix::Identity(m, m);
  yh.leftCols(n) = y;
  return {std::move(xh), std::move(yh)};
}

RrrSolution rrr_closed_form(const Matrix& x, const Matrix& y, Index r, double lambda) {
  if (r < 1) throw ShapeError("rrr_closed_form: rank must be positive");
  const auto [xh, yh] = ridge_augment(x, y, lambda);
  const Index m = xh.rows();
  Eigen::BDCSVD<Matrix> sx(xh, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = sx.singularValues();
  if (s.size() < m || !(s[m - 1] > kRankTol * s[0]))
    throw NumericalError("rrr_closed_form: X is not of full row rank");
  const Matrix xpinv = sx.matrixV() * s.cwiseInverse().asDiagonal() * sx.matrixU().transpose();
  const Matrix a = (yh * sx.matrixV()) * sx.matrixV().transpose();

  Eigen::BDCSVD<Matrix> sa(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  RrrSolution out;
  out.singular_values = sa.singularValues();
  const Index q = std::min<Index>(r, out.singular_values.size());
  out.w = sa.matrixU().leftCols(q) * out.singular_values.head(q).asDiagonal() *
          (sa.matrixV().leftCols(q).transpose() * xpinv);
  const double top = out.singular_values.size() ? out.singular_values[0] : 0.0;
  if (r < out.singular_values.size() && top > 0) {
    out.boundary_gap = (out.singular_values[r - 1] - out.singular_values[r]) / top;
    out.unique = out.boundary_gap > kDegenerateGap;
  } else {
    out.boundary_gap = std::numeric_limits<double>::infinity();
  }
  return out;
}

double pencil_residual(const Matrix& x, const Matrix& y, double lambda, const PencilEigenpair& e) {
  check_data(x, y);
  const Index m = x.rows();
  const Matrix s = x * x.transpose() + lambda * Matrix::Identity(m, m);
  const Matrix xy = x * y.transpose();
  const Vector lhs = s * e.v;
  const Vector rhs = e.gamma * (xy * (xy.transpose() * e.v));
  return (lhs - rhs).norm() / (s.norm() * e.v.norm());
}

PencilAnalysis pencil_stationary_points_d1(const Matrix& x, const Matrix& y, double lambda) {
  check_data(x, y);
  if (!(lambda >= 0)) throw ShapeError("lambda must be non-negative");
  const Index m = x.rows();
  // Whitened pencil: S = L L^T, T = P P^T with P = X Y^T (the augmented
  // data have the same Yh Xh^T), so the eigenvalues of L^-1 T L^-T are the
  // squared singular values of L^-1 P.
  const Matrix s = x * x.transpose() + lambda * Matrix::Identity(m, m);
  Eigen::LLT<Matrix> llt(s);
  if (llt.info() != Eigen::Success)
    throw NumericalError("pencil_stationary_points_d1: X X^T + lambda I is not positive definite");
  const Matrix xy = x * y.transpose();  // m x k
  const Matrix p = llt.matrixL().solve(xy);
  Eigen::BDCSVD<Matrix> sp(p, Eigen::ComputeFullU);
  const Vector& sv = sp.singularValues();
  const double top = sv.size() ? sv[0] : 0.0;
  const double ynorm = y.norm(), xnorm = x.norm();

  PencilAnalysis out;
  for (Index j = 0; j < m; ++j) {
    const double mu = j < sv.size() ? sv[j] * sv[j] : 0.0;
    Vector v = llt.matrixU().solve(Vector(sp.matrixU().col(j)));
    v.normalize();
    const Vector yxv = xy.transpose() * v;
    if (!(mu > kRankTol * kRankTol * top * top) || yxv.norm() <= kRankTol * ynorm * xnorm) {
      out.skipped.push_back({j, mu, "Y X^T v is numerically zero (infinite eigenvalue)"});
      continue;
    }
    PencilPoint pt;
    pt.pair.gamma = 1.0 / mu;
    pt.pair.v = v;
    pt.w = (yxv / (pt.pair.gamma * yxv.squaredNorm())) * v.transpose();
    out.points.push_back(std::move(pt));
  }
  std::stable_sort(out.points.begin(), out.points.end(),
                   [](const PencilPoint& a, const PencilPoint& b) { return a.pair.gamma < b.pair.gamma; });
  return out;
}

nlohmann::json PencilAnalysis::to_json() const {
  nlohmann::json j;
  j["points"] = nlohmann::json::array();
  for (const auto& p : points) {
    j["points"].push_back({{"gamma", p.pair.gamma},
                           {"v", std::vector<double>(p.pair.v.data(), p.pair.v.data() + p.pair.v.size())},
                           {"w_norm", p.w.norm()}});
  }
  j["skipped"] = nlohmann::json::array();
  for (const auto& s : skipped)
    j["skipped"].push_back({{"index", s.index}, {"mu", s.mu}, {"reason", s.reason}});
  return j;
}

Matrix combine_rank_r(std::span<const Matrix> points, std::span<const std::size_t> indices) {
  if (indices.empty()) throw ShapeError("combine_rank_r: no indices");
  std::set<std::size_t> seen;
  Matrix w;
  for (std::size_t i : indices) {
    if (i >= points.size()) throw ShapeError("combine_rank_r: index out of range");
    if (!seen.insert(i).second) throw ShapeError("combine_rank_r: repeated index");
    if (w.size() == 0) {
      w = points[i];
    } else {
      if (points[i].rows() != w.rows() || points[i].cols() != w.cols())
        throw ShapeError("combine_rank_r: shape mismatch");
      w += points[i];
    }
  }
  return w;
}

TuckerPoint matrix_point(const Matrix& w, Index r) {
  if (r < 1 || r > std::min(w.rows(), w.cols())) throw ShapeError("matrix_point: bad rank");
  Eigen::BDCSVD<Matrix> svd(w, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Matrix core = svd.singularValues().head(r).asDiagonal();
  return TuckerPoint(DenseTensor::from_matrix(core),
                     {svd.matrixU().leftCols(r), svd.matrixV().leftCols(r)});
}

HorrrProblem linear_problem(const Matrix& x, const Matrix& y, double lambda, Index rank) {
  HorrrProblem prob;
  prob.x = x;
  prob.y = y;
  prob.lambda = lambda;
  prob.degree = 1;
  prob.rank = rank;
  prob.validate();
  return prob;
}

OrthogonalizedProblem orthogonalize_problem(const Matrix& x, const Matrix& y) {
  check_data(x, y);
  const Index m = x.rows(), n = x.cols();
  if (n < m) throw NumericalError("orthogonalize_problem: X is rank deficient");
  Eigen::HouseholderQR<Matrix> qr(x.transpose());
  const Matrix r = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
  const double rmax = r.diagonal().cwiseAbs().maxCoeff();
  if (!(r.diagonal().cwiseAbs().minCoeff() > kRankTol * rmax))
    throw NumericalError("orthogonalize_problem: X is rank deficient");
  const Matrix qt = qr.householderQ() * Matrix::Identity(n, m);
  Vector sign(m);
  for (Index i = 0; i < m; ++i) sign[i] = r(i, i) < 0 ? -1.0 : 1.0;
  OrthogonalizedProblem out;
  out.l = r.transpose() * sign.asDiagonal();
  out.q = sign.asDiagonal() * qt.transpose();
  out.problem = linear_problem(out.q, y, 0.0, 1);
  return out;
}

NegativityCertificate negativity_certificate_d1(const Matrix& x, const Matrix& y,
                                                const Matrix& w_stationary) {
  OrthogonalizedProblem o = orthogonalize_problem(x, y);
  if (w_stationary.rows() != y.rows() || w_stationary.cols() != x.rows())
    throw ShapeError("negativity_certificate_d1: W must be k x m");

  // The RRR eigenpair of the surrogate pencil (I, Q Y^T Y Q^T) is the top
  // right singular pair of Y Q^T.
  const Matrix yq = y * o.q.transpose();
  Eigen::BDCSVD<Matrix> sy(yq, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = sy.singularValues();
  if (!(sv.size() > 0 && sv[0] > 0)) throw NumericalError("negativity_certificate_d1: Y Q^T = 0");

  NegativityCertificate out;
  out.scale = 1.0 / sv[0];
  out.problem = linear_problem(o.q, out.scale * y, 0.0, 1);
  const Vector u = sy.matrixU().col(0);
  const Vector v = sy.matrixV().col(0);
  if (sv.size() > 1 && (sv[0] - sv[1]) / sv[0] <= kDegenerateGap)
    out.note = "top singular value is repeated; the RRR point is not a strict minimum";

  const Matrix wn = out.scale * w_stationary * o.l;
  out.point = matrix_point(wn, 1);
  out.sigma = out.point.core().data()[0];
  out.expected = 2.0 * out.sigma * (out.sigma - 1.0);
  if ((wn - u * v.transpose()).norm() <= 1e-8) {
    out.exists = false;
    out.note = "point is the RRR solution";
    return out;
  }

  out.z = zero_tangent(out.point);
  out.z.v[0] = u;
  out.z.v[1] = v;
  enforce_gauge(out.point, out.z);
  const TangentVector hz = hessian_vec(out.problem, out.point, out.z);
  out.value = tangent_inner(out.point, out.z, hz);
  out.exists = out.value < 0;
  if (!out.exists && out.note.empty()) out.note = "constructed direction has non-negative curvature";
  return out;
}

std::pair<Vector, Vector> tensor_pencil_contractions(const Matrix& x, const Matrix& y,
                                                     const Vector& u) {
  check_data(x, y);
  if (u.size() != x.rows()) throw ShapeError("tensor_pencil_contractions: u must have length m");
  const Vector s = x.transpose() * u;  // n
  const Vector s2 = s.array().square().matrix();
  const Vector zxx = x * s.cwiseProduct(s2);
  const Vector ys2 = y * s2;  // k
  const Vector zxy = x * s.cwiseProduct(y.transpose() * ys2);
  return {zxx, zxy};
}

BEigenInfo b_eigen_analysis(const Matrix& x, const Matrix& y, const Vector& u) {
  if (std::abs(u.norm() - 1.0) > 1e-10) throw NumericalError("b_eigen_analysis: u must have unit norm");
  const auto [zxx, zxy] = tensor_pencil_contractions(x, y, u);
  BEigenInfo out;
  const Vector s = x.transpose() * u;
  out.b = s.array().square().matrix();
  const double bb = out.b.squaredNorm();
  if (!(bb > kRankTol * kRankTol * std::pow(x.norm(), 4)))
    throw NumericalError("b_eigen_analysis: B vanishes (u is orthogonal to the data)");
  out.c = y * out.b / bb;
  const double cc = out.c.squaredNorm();
  if (!(cc > 0)) throw NumericalError("b_eigen_analysis: c vanishes");
  out.gamma = 1.0 / (cc * bb);
  const double denom = zxx.norm();
  if (!(denom > 0)) throw NumericalError("b_eigen_analysis: Z_XX u vanishes");
  out.residual = (zxx - out.gamma * zxy).norm() / denom;
  return out;
}

double b_eigen_residual(const Matrix& x, const Matrix& y, const Vector& u) {
  return b_eigen_analysis(x, y, u).residual;
}

TuckerPoint build_w_from_b_eigvec(const Matrix& x, const Matrix& y, const Vector& u) {
  const BEigenInfo info = b_eigen_analysis(x, y, u);
  const Index k = y.rows(), m = x.rows();
  DenseTensor core({k, 1, 1});
  for (Index i = 0; i < k; ++i) core.data()[i] = info.c[i];
  Matrix uu = u;
  uu.resize(m, 1);
  return TuckerPoint(std::move(core), {Matrix::Identity(k, k), uu, uu});
}

OrderCheck cost_eigen_order_check(const Matrix& x, const Matrix& y,
                                  std::span<const GammaPoint> points, double tol) {
  check_data(x, y);
  OrderCheck out;
  const double yy = y.squaredNorm();
  for (const auto& gp : points) {
    const TuckerPoint& p = gp.point;
    if (p.order() != 3 || p.ranks()[1] != 1 || p.ranks()[2] != 1)
      throw ShapeError("cost_eigen_order_check: expected d = 2 points with trailing rank 1");
    const Vector w0 = p.factor(0) * unfold(p.core(), 0);  // U_1 c
    const Vector b = (x.transpose() * p.factor(2)).cwiseProduct(x.transpose() * p.factor(1));
    OrderRow row;
    row.gamma = gp.gamma;
    row.cost = (w0 * b.transpose() - y).squaredNorm();
    row.identity_rhs = yy - w0.squaredNorm() * b.squaredNorm();
    row.gamma_rhs = yy - 1.0 / gp.gamma;
    row.identity_err = std::abs(row.cost - row.identity_rhs) / yy;
    row.gamma_err = std::abs(row.cost - row.gamma_rhs) / yy;
    if (!(row.identity_err <= tol && row.gamma_err <= tol)) out.identities_hold = false;
    out.rows.push_back(row);
  }
  std::vector<std::size_t> by_gamma(out.rows.size());
  std::iota(by_gamma.begin(), by_gamma.end(), 0);
  std::stable_sort(by_gamma.begin(), by_gamma.end(),
                   [&](std::size_t a, std::size_t b) { return out.rows[a].gamma < out.rows[b].gamma; });
  for (std::size_t i = 1; i < by_gamma.size(); ++i) {
    const OrderRow& lo = out.rows[by_gamma[i - 1]];
    const OrderRow& hi = out.rows[by_gamma[i]];
    // equal gammas may come in either cost order within tolerance
    if (lo.cost > hi.cost + tol * yy) out.ordering_consistent = false;
  }
  return out;
}

nlohmann::json OrderCheck::to_json() const {
  nlohmann::json j;
  j["ordering_consistent"] = ordering_consistent;
  j["identities_hold"] = identities_hold;
  j["rows"] = nlohmann::json::array();
  for (const auto& r : rows)
    j["rows"].push_back({{"gamma", r.gamma},
                         {"cost", r.cost},
                         {"identity_rhs", r.identity_rhs},
                         {"gamma_rhs", r.gamma_rhs},
                         {"identity_err", r.identity_err},
                         {"gamma_err", r.gamma_err}});
  return j;
}

}  // namespace horrr
