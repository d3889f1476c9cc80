// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include <gtest/gtest.h>

#include "horrr/error.hpp"
#include "horrr/manifold.hpp"
#include "test_util.hpp"

namespace horrr {
namespace {

using testing::fitted_order;
using testing::random_tangent;
using testing::random_tensor;
using testing::rel_err;

double max_gauge(const TuckerPoint& p, const TangentVector& z) {
  double w = 0;
  for (std::size_t i = 0; i < p.order(); ++i) w = std::max(w, (p.factor(i).transpose() * z.v[i]).norm());
  return w;
}

TEST(Densify, IdentityFactorsPadTheCore) {
  DenseTensor core = random_tensor({2, 2}, 1);
  Matrix u0 = Matrix::Identity(3, 2), u1 = Matrix::Identity(4, 2);
  DenseTensor t = densify(TuckerPoint(core, {u0, u1}));
  Matrix expected = Matrix::Zero(3, 4);
  expected.topLeftCorner(2, 2) = core.as_matrix();
  EXPECT_EQ(t.as_matrix(), expected);
}

TEST(RandomPoint, DeterministicAndOrthonormal) {
  TuckerPoint a = random_point(4, 6, 3, 2, 99), b = random_point(4, 6, 3, 2, 99);
  EXPECT_EQ(a.core().data(), b.core().data());
  for (std::size_t i = 0; i < 3; ++i) EXPECT_EQ(a.factor(i), b.factor(i));
  EXPECT_LT(a.orthonormality_defect(), 1e-12);
  EXPECT_EQ(a.factor(0), Matrix::Identity(4, 4));
  EXPECT_THROW(random_point(4, 2, 3, 2, 1), ShapeError);
}

TEST(RandomPoint, MultilinearRankMatchesTarget) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    // k > r^d: the response-mode rank saturates at r^d.
    TuckerPoint p = random_point(10, 12, 3, 2, seed);
    EXPECT_EQ(multilinear_rank(densify(p), 1e-10), (std::vector<Index>{9, 3, 3}));
    TuckerPoint q = random_point(3, 5, 2, 3, seed);
    EXPECT_EQ(multilinear_rank(densify(q), 1e-10), (std::vector<Index>{3, 2, 2, 2}));
  }
}

TEST(Tangent, AmbientOfSimpleVectors) {
  TuckerPoint p = random_point(3, 5, 2, 2, 2);
  EXPECT_EQ(tangent_to_ambient(p, zero_tangent(p)).norm(), 0.0);
  TangentVector z = zero_tangent(p);
  z.g = random_tensor(p.ranks(), 3);
  EXPECT_LT(rel_err(tangent_to_ambient(p, z), multi_mode_product(z.g, p.factors())), 1e-15);
}

TEST(Tangent, FactoredInnerMatchesDense) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TuckerPoint p = random_point(3, 5, 2, 1 + static_cast<int>(seed % 3), seed);
    TangentVector a = random_tangent(p, 10 + seed), b = random_tangent(p, 20 + seed);
    const double dense = inner(tangent_to_ambient(p, a), tangent_to_ambient(p, b));
    EXPECT_NEAR(tangent_inner(p, a, b), dense, 1e-12 * std::max(1.0, std::abs(dense)));
    EXPECT_NEAR(tangent_inner(p, 2.5 * a, b), 2.5 * tangent_inner(p, a, b), 1e-12);
    EXPECT_GE(tangent_inner(p, a, a), 0.0);
  }
}

TEST(Tangent, BaseMismatchThrows) {
  TuckerPoint p = random_point(3, 5, 2, 2, 4), q = random_point(3, 5, 2, 2, 5);
  TangentVector a = zero_tangent(p), b = zero_tangent(q);
  EXPECT_THROW(tangent_inner(p, a, b), ShapeError);
  EXPECT_THROW(a += b, ShapeError);
}

TEST(Tangent, GaugeViolationRejected) {
  TuckerPoint p = random_point(3, 5, 2, 2, 6);
  TangentVector z = zero_tangent(p);
  z.v[1] = p.factor(1);
  EXPECT_THROW(tangent_to_ambient(p, z), ShapeError);
}

TEST(Projection, FixesTangentVectors) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TuckerPoint p = random_point(3, 5, 2, 1 + static_cast<int>(seed % 3), seed);
    TangentVector z = random_tangent(p, 30 + seed);
    TangentVector back = project_to_tangent(p, tangent_to_ambient(p, z));
    EXPECT_LT(rel_err(back.g, z.g), 1e-10);
    for (std::size_t i = 0; i < p.order(); ++i)
      EXPECT_LE((back.v[i] - z.v[i]).norm(), 1e-10 * std::max(1.0, z.v[i].norm()));
  }
}

TEST(Projection, PointItselfHasOnlyCoreComponent) {
  TuckerPoint p = random_point(3, 5, 2, 2, 7);
  TangentVector z = project_to_tangent(p, densify(p));
  EXPECT_LT(rel_err(z.g, p.core()), 1e-12);
  for (const auto& v : z.v) EXPECT_LT(v.norm(), 1e-12);
}

TEST(Projection, ResidualIsOrthogonalAndIdempotent) {
  TuckerPoint p = random_point(3, 5, 2, 2, 8);
  DenseTensor a = random_tensor(p.ambient_dims(), 9);
  TangentVector pa = project_to_tangent(p, a);
  EXPECT_LT(max_gauge(p, pa), 1e-12);
  DenseTensor resid = a - tangent_to_ambient(p, pa);
  for (std::uint64_t s = 0; s < 20; ++s) {
    DenseTensor amb = tangent_to_ambient(p, random_tangent(p, 100 + s));
    EXPECT_NEAR(inner(resid, amb), 0.0, 1e-11 * a.norm() * amb.norm());
  }
  TangentVector ppa = project_to_tangent(p, tangent_to_ambient(p, pa));
  EXPECT_LT(rel_err(ppa.g, pa.g), 1e-11);
  for (std::size_t i = 0; i < p.order(); ++i)
    EXPECT_LE((ppa.v[i] - pa.v[i]).norm(), 1e-11 * std::max(1.0, pa.v[i].norm()));
}

TEST(Projection, BoundaryPointIsSignaled) {
  TuckerPoint p = random_point(3, 5, 2, 2, 10);
  DenseTensor core = p.core();
  // Make unfold(core, 1) rank one.
  for (Index a = 0; a < 3; ++a)
    for (Index c = 0; c < 2; ++c) core.at({a, 1, c}) = 2.0 * core.at({a, 0, c});
  TuckerPoint b(core, p.factors());
  EXPECT_THROW(project_to_tangent(b, densify(b)), BoundaryError);
}

TEST(Tangent, ZeroAmbientImpliesZeroTangent) {
  // With U_0 square and trailing ranks within the product of the others, the
  // ambient map is injective on gauged tangent vectors: ||amb(z)||^2 is
  // bounded below by the smallest squared singular value of the core
  // unfoldings times the component norm.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    TuckerPoint p = random_point(4, 6, 2, 2, seed);
    double smin = 1.0;
    for (std::size_t i = 0; i < p.order(); ++i) {
      Eigen::BDCSVD<Matrix> svd(unfold(p.core(), i));
      smin = std::min(smin, svd.singularValues().tail(1)(0));
    }
    TangentVector z = random_tangent(p, 40 + seed);
    double comp = z.g.data().squaredNorm();
    for (const auto& v : z.v) comp += v.squaredNorm();
    const double amb = tangent_to_ambient(p, z).data().squaredNorm();
    EXPECT_GE(amb, smin * smin * comp * (1 - 1e-12));
  }
  TuckerPoint p = random_point(4, 6, 2, 2, 50);
  TangentVector z = zero_tangent(p);
  ASSERT_LE(tangent_to_ambient(p, z).norm(), 1e-14);
  double comp = z.g.norm();
  for (const auto& v : z.v) comp += v.norm();
  EXPECT_LE(comp, 1e-10 * densify(p).norm());
}

TEST(Retraction, ZeroStepReturnsThePoint) {
  TuckerPoint p = random_point(3, 6, 2, 2, 11);
  TangentVector z = random_tangent(p, 12);
  TuckerPoint q = retract_hosvd(p, z, 0.0);
  EXPECT_LT(rel_err(densify(q), densify(p)), 1e-12);
  EXPECT_LT(q.orthonormality_defect(), 1e-12);
}

TEST(Retraction, FirstOrderAgreement) {
  for (int d = 1; d <= 3; ++d) {
    TuckerPoint p = random_point(3, 5, 2, d, 13 + d);
    TangentVector z = random_tangent(p, 14 + d);
    const DenseTensor w = densify(p), amb = tangent_to_ambient(p, z);
    std::vector<double> ts{1e-2, 1e-3, 1e-4}, errs;
    for (double t : ts) {
      DenseTensor diff = densify(retract_hosvd(p, z, t)) - w - t * amb;
      errs.push_back(diff.norm());
    }
    EXPECT_GT(fitted_order(ts, errs), 1.8) << "d=" << d;
  }
}

TEST(Retraction, MatchesDenseHosvdOfTheSum) {
  TuckerPoint p = random_point(3, 5, 2, 2, 15);
  TangentVector z = random_tangent(p, 16);
  const double t = 0.3;
  TuckerPoint q = retract_hosvd(p, z, t);
  DenseTensor sum = densify(p) + t * tangent_to_ambient(p, z);
  std::vector<Index> ranks = p.ranks();
  TuckerPoint h = hosvd(sum, ranks);
  EXPECT_LT(rel_err(densify(q), densify(h)), 1e-10);
  for (std::size_t i = 1; i < 3; ++i) EXPECT_LT((q.factor(i) - h.factor(i)).norm(), 1e-10);
}

TEST(Retraction, PreservesSemiSymmetry) {
  TuckerPoint p0 = random_point(3, 5, 2, 2, 17);
  DenseTensor core = symmetrize_trailing(p0.core());
  TuckerPoint p(core, {p0.factor(0), p0.factor(1), p0.factor(1)});
  TangentVector z = zero_tangent(p);
  z.g = symmetrize_trailing(random_tensor(p.ranks(), 18));
  Matrix v = testing::random_matrix(5, 2, 19);
  v -= p.factor(1) * (p.factor(1).transpose() * v);
  z.v[1] = v;
  z.v[2] = v;
  TuckerPoint q = retract_hosvd(p, z, 0.1);
  EXPECT_TRUE(is_semi_symmetric(densify(q), 1e-12));
  EXPECT_LT((q.factor(1) - q.factor(2)).norm(), 1e-12);
  EXPECT_TRUE(is_semi_symmetric(q.core(), 1e-12));
}

TEST(Curvature, ZeroDirectionGivesZero) {
  TuckerPoint p = random_point(3, 5, 2, 2, 20);
  DenseTensor a = random_tensor(p.ambient_dims(), 21);
  TangentVector c = curvature_term(p, zero_tangent(p), DenseContractions(a));
  EXPECT_EQ(c.g.norm(), 0.0);
  for (const auto& v : c.v) EXPECT_EQ(v.norm(), 0.0);
}

TEST(Curvature, VanishesForTangentGradients) {
  TuckerPoint p = random_point(3, 5, 2, 2, 22);
  TangentVector z = random_tangent(p, 23);
  DenseTensor a = tangent_to_ambient(p, random_tangent(p, 24));
  TangentVector c = curvature_term(p, z, DenseContractions(a));
  EXPECT_LT(tangent_norm(p, c), 1e-10 * a.norm());
}

TEST(Curvature, MatchesDerivativeOfProjection) {
  // The curvature term is P_p(D P(p)[z] a): differentiate the projector along
  // the retraction curve by central differences.
  TuckerPoint p = random_point(3, 5, 2, 2, 25);
  TangentVector z = random_tangent(p, 26);
  DenseTensor a = random_tensor(p.ambient_dims(), 27);
  TangentVector c = curvature_term(p, z, DenseContractions(a));
  const double t = 1e-5;
  TuckerPoint qp = retract_hosvd(p, z, t), qm = retract_hosvd(p, z, -t);
  DenseTensor dp = tangent_to_ambient(qp, project_to_tangent(qp, a));
  DenseTensor dm = tangent_to_ambient(qm, project_to_tangent(qm, a));
  DenseTensor deriv = (1.0 / (2 * t)) * (dp - dm);
  TangentVector fd = project_to_tangent(p, deriv);
  EXPECT_LT(tangent_norm(p, fd - c) / tangent_norm(p, c), 1e-6);
}

TangentVector semi_symmetric_tangent(const TuckerPoint& p, std::uint64_t seed) {
  TangentVector z = zero_tangent(p);
  z.g = canonicalize_trailing(random_tensor(p.core().dims(), seed));
  const Matrix& u = p.factor(1);
  Matrix v = testing::random_matrix(u.rows(), u.cols(), seed + 1);
  v -= u * (u.transpose() * v);
  const Matrix& u0 = p.factor(0);
  Matrix v0 = testing::random_matrix(u0.rows(), u0.cols(), seed + 2);
  z.v[0] = v0 - u0 * (u0.transpose() * v0);
  for (std::size_t j = 1; j < p.order(); ++j) z.v[j] = v;
  return z;
}

TuckerPoint semi_symmetric_point(Index k, Index m, Index r, int d, std::uint64_t seed) {
  TuckerPoint base = random_point(k, m, r, d, seed);
  std::vector<Matrix> f(d + 1, base.factor(1));
  f[0] = base.factor(0);
  return TuckerPoint(canonicalize_trailing(base.core()), std::move(f));
}

TEST(SymmetricRetraction, AgreesWithGeneralRetraction) {
  for (int d : {2, 3}) {
    TuckerPoint p = semi_symmetric_point(5, 7, 2, d, 40 + d);
    TangentVector z = semi_symmetric_tangent(p, 70 + d);
    EXPECT_LE(semi_symmetric_defect(p, z), 1e-15);
    for (double t : {1e-3, 0.1, 1.0}) {
      DenseTensor a = densify(retract_hosvd_semi_symmetric(p, z, t));
      DenseTensor b = densify(retract_hosvd(p, z, t));
      EXPECT_LE(rel_err(a, b), 1e-12) << "d=" << d << " t=" << t;
    }
  }
}

TEST(SymmetricRetraction, ResultIsExactlySemiSymmetric) {
  TuckerPoint p = semi_symmetric_point(4, 6, 2, 3, 5);
  TangentVector z = semi_symmetric_tangent(p, 6);
  TuckerPoint q = retract_hosvd_semi_symmetric(p, z, 0.3);
  EXPECT_EQ(semi_symmetry_defect(q.core()), 0.0);
  EXPECT_EQ(q.factor(1), q.factor(2));
  EXPECT_EQ(q.factor(2), q.factor(3));
  EXPECT_LE(q.orthonormality_defect(), 1e-13);
}

TEST(SymmetricRetraction, RejectsAsymmetricInput) {
  TuckerPoint p = random_point(4, 6, 2, 2, 3);
  TangentVector z = random_tangent(p, 4);
  EXPECT_GT(semi_symmetric_defect(p, z), 1e-3);
  EXPECT_THROW(retract_hosvd_semi_symmetric(p, z, 0.1), ShapeError);
}

}  // namespace
}  // namespace horrr
