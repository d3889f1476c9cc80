// SPDX-License-Identifier: Apache-2.0
#include "horrr/problem.hpp"

#include <cmath>
#include <fstream>
#include <string>

#include "horrr/error.hpp"
#include "horrr/tensor_io.hpp"

namespace horrr {

namespace fs = std::filesystem;

void HorrrProblem::validate() const {
  if (x.cols() != y.cols())
    throw ShapeError("X has " + std::to_string(x.cols()) + " samples but Y has " +
                     std::to_string(y.cols()));
  if (x.cols() < 1 || x.rows() < 1 || y.rows() < 1) throw ShapeError("empty X or Y");
  if (!(lambda >= 0.0)) throw ShapeError("lambda must be non-negative");
  if (degree < 1) throw ShapeError("degree must be at least 1");
  if (rank < 1 || rank > x.rows())
    throw ShapeError("rank " + std::to_string(rank) + " must lie in [1, m=" +
                     std::to_string(x.rows()) + "]");
}

bool HorrrProblem::x_full_row_rank() const {
  if (x.rows() > x.cols()) return false;
  Eigen::BDCSVD<Matrix> svd(x);
  const Vector& s = svd.singularValues();
  return s.size() > 0 && s[0] > 0 && s[s.size() - 1] > kRankTol * s[0];
}

namespace {

fs::path find_matrix_file(const fs::path& dir, const std::string& stem) {
  for (const char* ext : {".bin", ".csv"}) {
    fs::path p = dir / (stem + ext);
    if (fs::exists(p)) return p;
  }
  throw IoError("no " + stem + ".bin or " + stem + ".csv in " + dir.string());
}

}  // namespace

HorrrProblem load_problem(const fs::path& dir) {
  HorrrProblem prob;
  prob.x = read_matrix(find_matrix_file(dir, "X"));
  prob.y = read_matrix(find_matrix_file(dir, "Y"));
  std::ifstream is(dir / "problem.json");
  if (is) {
    nlohmann::json j = nlohmann::json::parse(is);
    prob.lambda = j.value("lambda", 0.0);
    prob.degree = j.value("degree", 1);
    prob.rank = j.value("rank", Index{1});
  }
  prob.validate();
  return prob;
}

void save_problem(const fs::path& dir, const HorrrProblem& prob, const nlohmann::json& extra) {
  fs::create_directories(dir);
  write_matrix(dir / "X.bin", prob.x);
  write_matrix(dir / "Y.bin", prob.y);
  nlohmann::json j = extra;
  j["lambda"] = prob.lambda;
  j["degree"] = prob.degree;
  j["rank"] = prob.rank;
  j["k"] = prob.k();
  j["m"] = prob.m();
  j["n"] = prob.n();
  std::ofstream os(dir / "problem.json");
  if (!os) throw IoError("cannot write problem.json in " + dir.string());
  os << j.dump(2) << '\n';
}

void check_compatible(const HorrrProblem& prob, const TuckerPoint& p) {
  if (p.order() != static_cast<std::size_t>(prob.degree) + 1)
    throw ShapeError("point order " + std::to_string(p.order()) + " does not match degree " +
                     std::to_string(prob.degree));
  if (p.factor(0).rows() != prob.k())
    throw ShapeError("point response dimension differs from Y rows");
  for (std::size_t j = 1; j < p.order(); ++j)
    if (p.factor(j).rows() != prob.m())
      throw ShapeError("point feature dimension differs from X rows");
  if (prob.x.cols() != prob.y.cols()) throw ShapeError("X and Y sample counts differ");
}

const GradientWorkspace::State& GradientWorkspace::prepare(const HorrrProblem& prob,
                                                           const TuckerPoint& p) {
  if (valid_ && point_id_ == p.id() && problem_ == &prob) return state_;
  check_compatible(prob, p);
  state_.utx.assign(p.order(), Matrix());
  for (std::size_t j = 1; j < p.order(); ++j) state_.utx[j] = p.factor(j).transpose() * prob.x;
  state_.kr = khatri_rao_modes(std::span<const Matrix>(state_.utx).subspan(1));
  state_.wx = p.factor(0) * (unfold(p.core(), 0) * state_.kr);
  state_.residual = state_.wx - prob.y;
  valid_ = true;
  point_id_ = p.id();
  problem_ = &prob;
  ++rebuilds_;
  return state_;
}

double cost(const HorrrProblem& prob, const TuckerPoint& p, GradientWorkspace& ws) {
  const auto& st = ws.prepare(prob, p);
  const double c = p.core().norm();
  return 0.5 * (st.residual.squaredNorm() + prob.lambda * c * c);
}

double cost(const HorrrProblem& prob, const TuckerPoint& p) {
  GradientWorkspace ws;
  return cost(prob, p, ws);
}

double gradient_scale(const HorrrProblem& prob) {
  const Vector col_sq = prob.x.colwise().squaredNorm().transpose();
  const double xd = std::sqrt(col_sq.array().pow(prob.degree).sum());
  return prob.y.norm() * xd;
}

namespace {

// KR of [U_0^T Q, U_1^T X, ..., U_N^T X] with mode `skip` left out.
Matrix chain_without(const std::vector<Matrix>& projected, std::size_t skip) {
  std::vector<Matrix> mats;
  for (std::size_t j = 0; j < projected.size(); ++j)
    if (j != skip) mats.push_back(projected[j]);
  return khatri_rao_modes(mats);
}

// Projection onto the tangent space of [[1; Q, X, ..., X]], which never forms
// X^{(.)d}.
TangentVector project_cp(const HorrrProblem& prob, const TuckerPoint& p,
                         const GradientWorkspace::State& st, const Matrix& q) {
  TangentVector z;
  z.base_id = p.id();
  std::vector<Matrix> projected = st.utx;
  projected[0] = p.factor(0).transpose() * q;
  z.g = fold(projected[0] * st.kr.transpose(), 0, p.ranks());
  for (std::size_t i = 0; i < p.order(); ++i) {
    const Matrix& u = p.factor(i);
    if (is_square_mode(p, i)) {
      z.v.push_back(Matrix::Zero(u.rows(), u.cols()));
      continue;
    }
    const Matrix& data = i == 0 ? q : prob.x;
    const Matrix k = i == 0 ? st.kr : chain_without(projected, i);
    Matrix b = data * (k.transpose() * core_unfolding_pinv(p.core(), i));
    b -= u * (u.transpose() * b);
    z.v.push_back(std::move(b));
  }
  return z;
}

}  // namespace

TangentVector riemannian_gradient(const HorrrProblem& prob, const TuckerPoint& p,
                                  GradientWorkspace& ws) {
  const auto& st = ws.prepare(prob, p);
  TangentVector g = project_cp(prob, p, st, st.residual);
  if (prob.lambda != 0.0) g.g += prob.lambda * p.core();
  return g;
}

TangentVector riemannian_gradient(const HorrrProblem& prob, const TuckerPoint& p) {
  GradientWorkspace ws;
  return riemannian_gradient(prob, p, ws);
}

Matrix tangent_apply(const HorrrProblem& prob, const TuckerPoint& p, const TangentVector& z,
                     GradientWorkspace& ws) {
  check_anchor(p, z);
  const auto& st = ws.prepare(prob, p);
  const Matrix c0 = unfold(p.core(), 0);
  Matrix out = p.factor(0) * (unfold(z.g, 0) * st.kr);
  if (!is_square_mode(p, 0)) out += z.v[0] * (c0 * st.kr);
  std::vector<Matrix> mats(st.utx.begin() + 1, st.utx.end());
  for (std::size_t i = 1; i < p.order(); ++i) {
    if (is_square_mode(p, i)) continue;
    Matrix saved = std::move(mats[i - 1]);
    mats[i - 1] = z.v[i].transpose() * prob.x;
    out += p.factor(0) * (c0 * khatri_rao_modes(mats));
    mats[i - 1] = std::move(saved);
  }
  return out;
}

HorrrGradientContractions::HorrrGradientContractions(const HorrrProblem& prob,
                                                     const TuckerPoint& p, Matrix q,
                                                     double lambda)
    : prob_(prob), p_(p), q_(std::move(q)), lambda_(lambda) {
  check_compatible(prob, p);
  if (q_.rows() != prob.k() || q_.cols() != prob.n())
    throw ShapeError("response-mode factor must be k x n");
}

std::vector<Index> HorrrGradientContractions::dims() const { return p_.ambient_dims(); }

DenseTensor HorrrGradientContractions::contract_all(std::span<const Matrix> mats) const {
  const std::size_t n = p_.order();
  if (mats.size() != n) throw ShapeError("contract_all: one matrix per mode");
  std::vector<Matrix> f(n);
  std::vector<Index> out_dims(n);
  for (std::size_t j = 0; j < n; ++j) {
    f[j] = mats[j] * data(j);
    out_dims[j] = mats[j].rows();
  }
  DenseTensor out =
      fold(f[0] * khatri_rao_modes(std::span<const Matrix>(f).subspan(1)).transpose(), 0, out_dims);
  if (lambda_ != 0.0) {
    std::vector<Matrix> mu(n);
    for (std::size_t j = 0; j < n; ++j) mu[j] = mats[j] * p_.factor(j);
    out += lambda_ * multi_mode_product(p_.core(), mu);
  }
  return out;
}

Matrix HorrrGradientContractions::contract_all_but(std::size_t mode,
                                                   std::span<const Matrix> mats) const {
  const std::size_t n = p_.order();
  if (mats.size() != n || mode >= n) throw ShapeError("contract_all_but: bad arguments");
  std::vector<Matrix> f;
  for (std::size_t j = 0; j < n; ++j)
    if (j != mode) f.push_back(mats[j] * data(j));
  Matrix out = data(mode) * khatri_rao_modes(f).transpose();
  if (lambda_ != 0.0) {
    std::vector<Matrix> mu(n);
    for (std::size_t j = 0; j < n; ++j)
      if (j != mode) mu[j] = mats[j] * p_.factor(j);
    out += lambda_ * (p_.factor(mode) * unfold(multi_mode_product(p_.core(), mu), mode));
  }
  return out;
}

TangentVector hessian_vec(const HorrrProblem& prob, const TuckerPoint& p, const TangentVector& z,
                          GradientWorkspace& ws) {
  check_anchor(p, z);
  const auto& st = ws.prepare(prob, p);
  const Matrix zx = tangent_apply(prob, p, z, ws);
  TangentVector h = project_cp(prob, p, st, zx);
  if (prob.lambda != 0.0) h += prob.lambda * z;
  HorrrGradientContractions grad(prob, p, st.residual, prob.lambda);
  h += curvature_term(p, z, grad);
  enforce_gauge(p, h);
  return h;
}

TangentVector hessian_vec(const HorrrProblem& prob, const TuckerPoint& p,
                          const TangentVector& z) {
  GradientWorkspace ws;
  return hessian_vec(prob, p, z, ws);
}

double residual_condition_gap(const HorrrProblem& prob, const TuckerPoint& p) {
  GradientWorkspace ws;
  const auto& st = ws.prepare(prob, p);
  Matrix m = st.residual * st.kr.transpose();
  if (prob.lambda != 0.0) m += prob.lambda * (p.factor(0) * unfold(p.core(), 0));
  return m.norm();
}

TuckerPoint recore(const HorrrProblem& prob, const TuckerPoint& p) {
  GradientWorkspace ws;
  const auto& st = ws.prepare(prob, p);
  const Matrix& z = st.kr;  // P x n
  Eigen::BDCSVD<Matrix> svd(z, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  if (prob.lambda == 0.0) {
    const bool full = z.rows() <= z.cols() && s.size() == z.rows() && s[0] > 0 &&
                      s[s.size() - 1] > kRankTol * s[0];
    if (!full)
      throw NumericalError(
          "recore with lambda = 0 needs the projected Khatri-Rao chain to have full row rank");
  }
  // C_(0) = U_0^T Y B S (S^2 + lambda)^{-1} A^T for Z = A S B^T.
  const Vector w = s.array() / (s.array().square() + prob.lambda);
  const Matrix c0 = ((p.factor(0).transpose() * prob.y) * svd.matrixV()) * w.asDiagonal() *
                    svd.matrixU().transpose();
  return TuckerPoint(fold(c0, 0, p.ranks()), p.factors());
}

double StationarityReport::max_relative() const {
  double worst = std::max(core_residual, gradient_norm);
  for (double r : factor_residuals)
    if (!std::isnan(r)) worst = std::max(worst, r);
  return scale > 0 ? worst / scale : worst;
}

nlohmann::json StationarityReport::to_json() const {
  nlohmann::json j;
  nlohmann::json f = nlohmann::json::array();
  for (double r : factor_residuals) {
    if (std::isnan(r))
      f.push_back(nullptr);
    else
      f.push_back(r);
  }
  j["factor_residuals"] = f;
  j["core_residual"] = core_residual;
  j["residual_condition_gap"] = residual_condition_gap;
  j["gradient_norm"] = gradient_norm;
  j["scale"] = scale;
  j["max_relative"] = max_relative();
  return j;
}

StationarityReport stationarity_report(const HorrrProblem& prob, const TuckerPoint& p) {
  GradientWorkspace ws;
  const auto& st = ws.prepare(prob, p);
  StationarityReport rep;
  rep.scale = gradient_scale(prob);
  std::vector<Matrix> projected = st.utx;
  projected[0] = p.factor(0).transpose() * st.residual;
  for (std::size_t i = 0; i < p.order(); ++i) {
    if (is_square_mode(p, i)) {
      rep.factor_residuals.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    const Matrix& data = i == 0 ? st.residual : prob.x;
    const Matrix k = i == 0 ? st.kr : chain_without(projected, i);
    const Matrix m = data * (k.transpose() * core_unfolding_pinv(p.core(), i));
    rep.factor_residuals.push_back((prob.lambda * p.factor(i) + m).norm());
  }
  const TangentVector g = riemannian_gradient(prob, p, ws);
  rep.core_residual = g.g.norm();
  rep.gradient_norm = tangent_norm(p, g);
  rep.residual_condition_gap = residual_condition_gap(prob, p);
  return rep;
}

namespace {

struct PinvInfo {
  Matrix pinv;
  Vector kept;  // singular values above cutoff
  bool near_boundary = false;
};

PinvInfo truncated_pinv(const Matrix& a) {
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& s = svd.singularValues();
  PinvInfo out;
  const Index expected = std::min(a.rows(), a.cols());
  Index keep = 0;
  if (s.size() > 0 && s[0] > 0)
    while (keep < s.size() && s[keep] > kRankTol * s[0]) ++keep;
  out.near_boundary = keep < expected;
  out.kept = s.head(keep);
  out.pinv = svd.matrixV().leftCols(keep) * s.head(keep).cwiseInverse().asDiagonal() *
             svd.matrixU().leftCols(keep).transpose();
  return out;
}

}  // namespace

RegularizedCost regularized_cost(const HorrrProblem& prob, const TuckerPoint& p, double tau) {
  if (!(tau > 0.0)) throw ShapeError("tau must be positive");
  RegularizedCost out;
  const double c2 = p.core().data().squaredNorm();
  double barrier = 0.0;
  for (std::size_t i = 0; i < p.order(); ++i) {
    const PinvInfo info = truncated_pinv(unfold(p.core(), i));
    out.near_boundary = out.near_boundary || info.near_boundary;
    barrier += c2 + info.kept.array().square().inverse().sum();
  }
  out.value = cost(prob, p) + tau * tau * barrier;
  return out;
}

TangentVector regularizer_gradient(const TuckerPoint& p, double tau) {
  TangentVector z = zero_tangent(p);
  const double t2 = tau * tau;
  z.g = (2.0 * t2 * static_cast<double>(p.order())) * p.core();
  for (std::size_t i = 0; i < p.order(); ++i) {
    const Matrix pi = truncated_pinv(unfold(p.core(), i)).pinv;  // P x r_i
    const Matrix term = pi.transpose() * pi * pi.transpose();   // r_i x P
    z.g -= (2.0 * t2) * fold(term, i, p.ranks());
  }
  return z;
}

}  // namespace horrr
