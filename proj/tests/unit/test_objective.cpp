// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <filesystem>

#include <gtest/gtest.h>

#include "horrr/error.hpp"
#include "horrr/problem.hpp"
#include "test_util.hpp"

namespace horrr {
namespace {

using testing::dense_cost;
using testing::dense_euclidean_gradient;
using testing::fitted_order;
using testing::random_horrr_point;
using testing::random_problem;
using testing::random_tangent;
using testing::rel_err;

double tangent_rel_err(const TuckerPoint& p, const TangentVector& a, const TangentVector& b) {
  return tangent_norm(p, a - b) / std::max(tangent_norm(p, b), 1e-300);
}

TEST(Cost, ExactFitIsZero) {
  HorrrProblem prob = random_problem(3, 4, 20, 2, 2, 0.0, 1);
  TuckerPoint w = random_horrr_point(prob, 2);
  prob.y = apply_tucker(w.core(), w.factors(), prob.x);
  EXPECT_LT(cost(prob, w), 1e-24 * prob.y.squaredNorm());
}

TEST(Cost, MatchesDenseEvaluation) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const int d = 1 + static_cast<int>(seed % 3);
    HorrrProblem prob = random_problem(3, 4, 15, d, 2, 0.3, seed);
    TuckerPoint p = random_horrr_point(prob, 100 + seed);
    const double dense = dense_cost(prob, densify(p));
    EXPECT_NEAR(cost(prob, p), dense, 1e-12 * dense);
  }
}

TEST(Cost, ZeroCoreGivesHalfResponseNorm) {
  HorrrProblem prob = random_problem(3, 4, 15, 2, 2, 1.0, 3);
  TuckerPoint p = random_horrr_point(prob, 4);
  TuckerPoint z(DenseTensor(p.ranks()), p.factors());
  EXPECT_DOUBLE_EQ(cost(prob, z), 0.5 * prob.y.squaredNorm());
}

TEST(Gradient, MatchesProjectedDenseGradient) {
  NormalRng pick(7);
  const double lambdas[] = {0.0, 1e-3, 1.0};
  for (int inst = 0; inst < 30; ++inst) {
    const Index k = 1 + static_cast<Index>(pick.uniform() * 5);
    const Index m = 2 + static_cast<Index>(pick.uniform() * 7);
    const int d = 1 + static_cast<int>(pick.uniform() * 3);
    const Index n = 5 + static_cast<Index>(pick.uniform() * 46);
    Index r = 1 + static_cast<Index>(pick.uniform() * 3);
    r = std::min(r, m);
    if (d == 1) r = std::min(r, k);  // keep unfold(C, 1) full row rank
    const double lambda = lambdas[inst % 3];
    HorrrProblem prob = random_problem(k, m, n, d, r, lambda, 1000 + inst);
    TuckerPoint p = random_horrr_point(prob, 2000 + inst);
    TangentVector fast = riemannian_gradient(prob, p);
    TangentVector slow = project_to_tangent(p, dense_euclidean_gradient(prob, densify(p)));
    EXPECT_LT(tangent_rel_err(p, fast, slow), 1e-10)
        << "k=" << k << " m=" << m << " d=" << d << " r=" << r << " n=" << n;
  }
}

TEST(Gradient, VanishesAtExactFit) {
  HorrrProblem prob = random_problem(3, 5, 40, 2, 2, 0.0, 8);
  TuckerPoint w = random_horrr_point(prob, 9);
  prob.y = apply_tucker(w.core(), w.factors(), prob.x);
  EXPECT_LE(tangent_norm(w, riemannian_gradient(prob, w)), 1e-10 * prob.y.norm());
}

TEST(Gradient, FactorBlocksIndependentOfLambda) {
  HorrrProblem prob = random_problem(3, 5, 30, 2, 2, 0.0, 10);
  TuckerPoint p = random_horrr_point(prob, 11);
  TangentVector g0 = riemannian_gradient(prob, p);
  for (double lambda : {0.1, 10.0}) {
    prob.lambda = lambda;
    TangentVector g = riemannian_gradient(prob, p);
    for (std::size_t i = 0; i < p.order(); ++i)
      EXPECT_LE((g.v[i] - g0.v[i]).norm(), 1e-12 * std::max(1.0, g0.v[i].norm()));
  }
}

TEST(Gradient, DirectionalDerivativeAlongRetraction) {
  for (int d = 1; d <= 3; ++d) {
    HorrrProblem prob = random_problem(3, 5, 30, d, d == 1 ? 2 : 2, 0.1, 12 + d);
    TuckerPoint p = random_horrr_point(prob, 20 + d);
    TangentVector z = random_tangent(p, 30 + d);
    const double f0 = cost(prob, p);
    const double slope = tangent_inner(p, riemannian_gradient(prob, p), z);
    std::vector<double> ts{1e-2, 1e-3, 1e-4, 1e-5}, errs;
    for (double t : ts)
      errs.push_back(std::abs((cost(prob, retract_hosvd(p, z, t)) - f0) / t - slope));
    EXPECT_GT(fitted_order(ts, errs), 0.9) << "d=" << d;
  }
}

TEST(Workspace, RebuildsOnlyForNewPoints) {
  HorrrProblem prob = random_problem(3, 5, 30, 2, 2, 0.1, 14);
  TuckerPoint p = random_horrr_point(prob, 15);
  GradientWorkspace ws;
  cost(prob, p, ws);
  riemannian_gradient(prob, p, ws);
  EXPECT_EQ(ws.rebuilds(), 1u);
  TuckerPoint q = retract_hosvd(p, random_tangent(p, 16), 0.1);
  const double cq = cost(prob, q, ws);
  EXPECT_EQ(ws.rebuilds(), 2u);
  EXPECT_DOUBLE_EQ(cq, cost(prob, q));
  ws.invalidate();
  cost(prob, q, ws);
  EXPECT_EQ(ws.rebuilds(), 3u);
}

TEST(Hessian, MatchesFiniteDifferencesOfGradient) {
  for (int d = 1; d <= 3; ++d) {
    HorrrProblem prob = random_problem(3, 5, 30, d, 2, d == 2 ? 0.5 : 0.0, 40 + d);
    TuckerPoint p = random_horrr_point(prob, 50 + d);
    TangentVector z = random_tangent(p, 60 + d);
    TangentVector h = hessian_vec(prob, p, z);
    TangentVector g = riemannian_gradient(prob, p);
    std::vector<double> ts{1e-2, 1e-3, 1e-4, 1e-5}, errs;
    for (double t : ts) {
      TuckerPoint q = retract_hosvd(p, z, t);
      TangentVector gq = riemannian_gradient(prob, q);
      TangentVector back = project_to_tangent(p, tangent_to_ambient(q, gq));
      TangentVector fd = (1.0 / t) * (back - g);
      errs.push_back(tangent_norm(p, fd - h));
    }
    EXPECT_GT(fitted_order(ts, errs), 0.9) << "d=" << d;
    EXPECT_LT(errs.back() / tangent_norm(p, h), 1e-3);
  }
}

TEST(Hessian, MatchesDenseLinearTermPlusCurvature) {
  HorrrProblem prob = random_problem(3, 4, 20, 2, 2, 0.2, 70);
  TuckerPoint p = random_horrr_point(prob, 71);
  TangentVector z = random_tangent(p, 72);
  // Dense: P(nabla^2 F[Z]) + curvature with dense Euclidean gradient.
  const DenseTensor zamb = tangent_to_ambient(p, z);
  const Matrix kx = testing::oracle_kr_power(prob.x, 2);
  const Matrix zx = testing::oracle_unfold(zamb, 0) * kx;
  DenseTensor hz = testing::oracle_fold0(zx * kx.transpose(), zamb.dims()) + prob.lambda * zamb;
  const DenseTensor egrad = dense_euclidean_gradient(prob, densify(p));
  TangentVector dense = project_to_tangent(p, hz) + curvature_term(p, z, DenseContractions(egrad));
  EXPECT_LT(tangent_rel_err(p, hessian_vec(prob, p, z), dense), 1e-10);
}

TEST(Hessian, SymmetricQuadraticForm) {
  for (int d = 1; d <= 3; ++d) {
    HorrrProblem prob = random_problem(3, 5, 30, d, 2, 0.1, 80 + d);
    TuckerPoint p = random_horrr_point(prob, 90 + d);
    TangentVector a = random_tangent(p, 100 + d), b = random_tangent(p, 110 + d);
    const double ab = tangent_inner(p, hessian_vec(prob, p, a), b);
    const double ba = tangent_inner(p, a, hessian_vec(prob, p, b));
    EXPECT_NEAR(ab, ba, 1e-8 * std::max(std::abs(ab), 1.0)) << "d=" << d;
  }
}

TEST(Hessian, LambdaShiftIsLinearTermOnly) {
  HorrrProblem prob = random_problem(3, 5, 30, 2, 2, 0.0, 120);
  TuckerPoint p = random_horrr_point(prob, 121);
  TangentVector z = random_tangent(p, 122);
  TangentVector h0 = hessian_vec(prob, p, z);
  prob.lambda = 0.7;
  TangentVector h1 = hessian_vec(prob, p, z);
  EXPECT_LT(tangent_rel_err(p, h1 - h0, 0.7 * z), 1e-10);
}

TEST(ResidualCondition, RecoreSolvesItExactly) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double lambda = seed % 2 ? 0.0 : 0.05;
    HorrrProblem prob = random_problem(4, 5, 60, 2, 2, lambda, 130 + seed);
    TuckerPoint p = random_horrr_point(prob, 150 + seed);
    EXPECT_GT(residual_condition_gap(prob, p), 0.0);
    TuckerPoint q = recore(prob, p);
    EXPECT_LE(residual_condition_gap(prob, q), 1e-10 * prob.y.norm() * gradient_scale(prob) /
                                                   prob.y.norm());
    EXPECT_LE(cost(prob, q), cost(prob, p));
    for (std::size_t i = 0; i < p.order(); ++i) EXPECT_EQ(q.factor(i), p.factor(i));
    // Already satisfied: a second recore leaves the core alone.
    TuckerPoint q2 = recore(prob, q);
    EXPECT_LT(rel_err(q2.core(), q.core()), 1e-10);
  }
}

TEST(ResidualCondition, RecoreRejectsDeficientChainAtZeroLambda) {
  HorrrProblem prob = random_problem(3, 5, 3, 2, 2, 0.0, 170);  // n < r^d
  TuckerPoint p = random_horrr_point(prob, 171);
  EXPECT_THROW(recore(prob, p), NumericalError);
  prob.lambda = 0.1;
  EXPECT_NO_THROW(recore(prob, p));
}

TEST(Stationarity, ResidualsTrackTheGradient) {
  HorrrProblem prob = random_problem(3, 5, 40, 2, 2, 0.1, 180);
  TuckerPoint p = random_horrr_point(prob, 181);
  StationarityReport rep = stationarity_report(prob, p);
  EXPECT_TRUE(std::isnan(rep.factor_residuals[0]));
  EXPECT_GT(rep.max_relative(), 1e-3);
  // Factor residual identity: lambda U_i + data K^T C^+ = V_i + U_i G_(i) C_(i)^+.
  TangentVector g = riemannian_gradient(prob, p);
  for (std::size_t i = 1; i < p.order(); ++i) {
    const Matrix expect =
        g.v[i] + p.factor(i) * (unfold(g.g, i) * core_unfolding_pinv(p.core(), i));
    EXPECT_NEAR(rep.factor_residuals[i], expect.norm(), 1e-10 * expect.norm());
  }
}

TEST(RegularizedCost, ReducesToCostAsTauVanishes) {
  HorrrProblem prob = random_problem(3, 5, 40, 2, 2, 0.1, 190);
  TuckerPoint p = random_horrr_point(prob, 191);
  EXPECT_NEAR(regularized_cost(prob, p, 1e-8).value, cost(prob, p), 1e-10 * cost(prob, p));
  EXPECT_THROW(regularized_cost(prob, p, 0.0), ShapeError);
}

TEST(RegularizedCost, MatchesDenseMatricizations) {
  HorrrProblem prob = random_problem(3, 5, 40, 2, 2, 0.1, 192);
  TuckerPoint p = random_horrr_point(prob, 193);
  const double tau = 0.3;
  const DenseTensor w = densify(p);
  double barrier = 0;
  for (std::size_t i = 0; i < w.order(); ++i) {
    Eigen::BDCSVD<Matrix> svd(testing::oracle_unfold(w, i));
    const Vector s = svd.singularValues();
    barrier += s.squaredNorm();
    for (Index j = 0; j < s.size(); ++j)
      if (s[j] > 1e-10 * s[0]) barrier += 1.0 / (s[j] * s[j]);
  }
  const double expected = dense_cost(prob, w) + tau * tau * barrier;
  EXPECT_NEAR(regularized_cost(prob, p, tau).value, expected, 1e-10 * expected);
}

TEST(RegularizedCost, GrowsAsCoreApproachesBoundary) {
  HorrrProblem prob = random_problem(3, 5, 40, 2, 2, 0.1, 194);
  TuckerPoint p = random_horrr_point(prob, 195);
  double prev = 0;
  for (double eps : {1e-1, 1e-2, 1e-3, 1e-4}) {
    DenseTensor core = p.core();
    Matrix c1 = unfold(core, 1);
    Eigen::BDCSVD<Matrix> svd(c1, Eigen::ComputeThinU | Eigen::ComputeThinV);
    Vector s = svd.singularValues();
    s[s.size() - 1] = eps;
    c1 = svd.matrixU() * s.asDiagonal() * svd.matrixV().transpose();
    TuckerPoint q(fold(c1, 1, core.dims()), p.factors());
    const double v = regularized_cost(prob, q, 0.1).value;
    EXPECT_GT(v, prev);
    prev = v;
  }
}

TEST(RegularizedCost, BarrierGradientMatchesFiniteDifferences) {
  HorrrProblem prob = random_problem(3, 5, 40, 2, 2, 0.1, 196);
  TuckerPoint p = random_horrr_point(prob, 197);
  const double tau = 0.2;
  TangentVector g = riemannian_gradient(prob, p) + regularizer_gradient(p, tau);
  TangentVector z = random_tangent(p, 198);
  const double slope = tangent_inner(p, g, z);
  const double t = 1e-6;
  const double fd = (regularized_cost(prob, retract_hosvd(p, z, t), tau).value -
                     regularized_cost(prob, retract_hosvd(p, z, -t), tau).value) /
                    (2 * t);
  EXPECT_NEAR(fd, slope, 1e-6 * std::abs(slope));
}

TEST(Problem, SaveLoadRoundTrip) {
  auto dir = std::filesystem::temp_directory_path() / "horrr_problem_test";
  HorrrProblem prob = random_problem(3, 4, 10, 2, 2, 0.25, 199);
  save_problem(dir, prob);
  HorrrProblem back = load_problem(dir);
  EXPECT_EQ(back.x, prob.x);
  EXPECT_EQ(back.y, prob.y);
  EXPECT_EQ(back.lambda, 0.25);
  EXPECT_EQ(back.degree, 2);
  EXPECT_EQ(back.rank, 2);
}

TEST(Problem, ValidationErrors) {
  HorrrProblem prob = random_problem(3, 4, 10, 2, 2, 0.0, 200);
  prob.y = Matrix::Zero(3, 9);
  EXPECT_THROW(prob.validate(), ShapeError);
  HorrrProblem p2 = random_problem(3, 4, 10, 2, 5, 0.0, 201);
  EXPECT_THROW(p2.validate(), ShapeError);
}

}  // namespace
}  // namespace horrr
