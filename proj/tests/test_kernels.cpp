#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>

#include <algorithm>

#include "support/oracles.hpp"
#include "vpbo/kernels.hpp"

using namespace vpbo;

namespace {

MixedPoint pt(std::vector<int> h, std::initializer_list<double> x) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(x.size()));
  Eigen::Index i = 0;
  for (double e : x) v[i++] = e;
  return {std::move(h), v};
}

KernelParams unit_params(int d) {
  KernelParams p = KernelParams::defaults(d);
  p.lengthscales.setOnes();
  return p;
}

} // namespace

TEST(CategoricalKernel, MatchCount) {
  const std::vector<int> a{0, 1}, b{0, 1}, c{2, 3}, e{0, 2};
  EXPECT_DOUBLE_EQ(categorical_kernel(a, b, 1.0), 1.0);
  EXPECT_DOUBLE_EQ(categorical_kernel(a, c, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(categorical_kernel(a, e, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(categorical_kernel(a, e, 3.0), 1.5);
}

TEST(CategoricalKernel, LengthMismatchThrows) {
  const std::vector<int> a{0, 1}, b{0};
  EXPECT_THROW(categorical_kernel(a, b, 1.0), DimensionError);
}

TEST(CategoricalKernel, JointPermutationInvariant) {
  Stream rng(3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<int> h(5), g(5), idx{0, 1, 2, 3, 4};
    for (int i = 0; i < 5; ++i) h[i] = rng.uniform_int(3), g[i] = rng.uniform_int(3);
    for (int i = 4; i > 0; --i) std::swap(idx[i], idx[rng.uniform_int(i + 1)]);
    std::vector<int> hp(5), gp(5);
    for (int i = 0; i < 5; ++i) hp[i] = h[idx[i]], gp[i] = g[idx[i]];
    EXPECT_EQ(categorical_kernel(h, g, 1.7), categorical_kernel(hp, gp, 1.7));
    const double v = categorical_kernel(h, g, 1.7);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.7);
  }
}

TEST(Matern52, ZeroDistanceGivesVariance) {
  KernelParams p = unit_params(2);
  p.cont_variance = 2.5;
  const Eigen::Vector2d x(0.3, 0.4);
  EXPECT_DOUBLE_EQ(matern52_kernel(x, x, p), 2.5);
}

TEST(Matern52, UnitDistanceMatchesSecondImplementation) {
  const KernelParams p = unit_params(2);
  const double v = matern52_kernel(Eigen::Vector2d(0, 0), Eigen::Vector2d(1, 0), p);
  EXPECT_NEAR(v, static_cast<double>(ref::matern52_ref(1.0L, 1.0L)), 1e-15);
  EXPECT_NEAR(v, 0.52399410883182, 1e-13);
}

TEST(Matern52, MonotoneDecayToZero) {
  const KernelParams p = unit_params(1);
  double prev = 1.0;
  for (double r = 0.1; r < 40.0; r *= 1.5) {
    Eigen::VectorXd a(1), b(1);
    a << 0.0;
    b << r;
    const double v = matern52_kernel(a, b, p);
    EXPECT_LT(v, prev);
    EXPECT_GT(v, 0.0);
    prev = v;
  }
  EXPECT_LT(prev, 1e-20);
}

TEST(Matern52, DimensionMismatchThrows) {
  const KernelParams p = unit_params(2);
  EXPECT_THROW(matern52_kernel(Eigen::Vector3d(0, 0, 0), Eigen::Vector2d(0, 0), p), DimensionError);
}

TEST(MixedKernel, Endpoints) {
  Stream rng(11);
  const CategorySpace space({3, 4}, 2);
  for (int rep = 0; rep < 100; ++rep) {
    KernelParams p = ref::random_params(2, rng);
    const MixedPoint a = uniform_point(space, rng), b = uniform_point(space, rng);
    const double kh = categorical_kernel(a.h, b.h, p.cat_variance);
    const double kx = matern52_kernel(a.x, b.x, p);
    p.lambda = 0.0;
    EXPECT_EQ(mixed_kernel(a, b, p), kh + kx);
    p.lambda = 1.0;
    EXPECT_EQ(mixed_kernel(a, b, p), kh * kx);
  }
}

TEST(MixedKernel, HalfLambdaFullMatch) {
  KernelParams p = unit_params(2);
  p.lambda = 0.5;
  const MixedPoint a = pt({1, 2}, {0.1, 0.2}), b = pt({1, 2}, {0.6, 0.9});
  const double c = matern52_kernel(a.x, b.x, p);
  EXPECT_NEAR(mixed_kernel(a, b, p), 0.5 + c, 1e-15);
}

TEST(MixedKernel, Symmetric) {
  Stream rng(12);
  const CategorySpace space({2, 5, 3}, 3);
  for (int rep = 0; rep < 200; ++rep) {
    const KernelParams p = ref::random_params(3, rng);
    const MixedPoint a = uniform_point(space, rng), b = uniform_point(space, rng);
    EXPECT_EQ(mixed_kernel(a, b, p), mixed_kernel(b, a, p));
  }
}

TEST(MixedKernel, SpaceMismatchThrows) {
  const KernelParams p = unit_params(1);
  EXPECT_THROW(mixed_kernel(pt({0}, {0.1}), pt({0, 1}, {0.1}), p), DimensionError);
}

TEST(GramMatrix, SinglePoint) {
  KernelParams p = unit_params(2);
  p.noise_variance = 1e-3;
  const MixedPoint z = pt({0}, {0.2, 0.2});
  const Eigen::MatrixXd k = gram_matrix({z}, p, 1e-4);
  ASSERT_EQ(k.rows(), 1);
  EXPECT_DOUBLE_EQ(k(0, 0), mixed_kernel(z, z, p) + 1e-3 + 1e-4);
}

TEST(GramMatrix, DuplicatePointsOffDiagonal) {
  const KernelParams p = unit_params(2);
  const MixedPoint z = pt({1}, {0.5, 0.5});
  const Eigen::MatrixXd k = gram_matrix({z, z}, p, 0.0);
  EXPECT_EQ(k(0, 1), mixed_kernel(z, z, p));
  EXPECT_EQ(k(1, 0), k(0, 1));
}

TEST(GramMatrix, ExactlySymmetricAndPsd) {
  Stream rng(13);
  const CategorySpace space({3, 2}, 2);
  KernelParams p = ref::random_params(2, rng);
  p.lambda = 0.5;
  p.noise_variance = kNoiseFloor;
  std::vector<MixedPoint> pts;
  for (int i = 0; i < 30; ++i) pts.push_back(uniform_point(space, rng));
  Eigen::MatrixXd k = gram_matrix(pts, p, 0.0);
  EXPECT_TRUE(k == k.transpose());
  k.diagonal().array() -= p.noise_variance;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k, Eigen::EigenvaluesOnly);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-6);
}

TEST(PairwiseStats, ReproducesKernel) {
  Stream rng(14);
  const CategorySpace space({3, 3}, 2);
  std::vector<MixedPoint> pts;
  for (int i = 0; i < 8; ++i) pts.push_back(uniform_point(space, rng));
  const auto s = PairwiseStats::from(pts);
  ASSERT_TRUE(s.has_categorical());
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      EXPECT_DOUBLE_EQ(s.match_fraction(i, j), categorical_kernel(pts[i].h, pts[j].h, 1.0));
      EXPECT_DOUBLE_EQ(s.sq_diff[0](i, j), (pts[i].x[0] - pts[j].x[0]) * (pts[i].x[0] - pts[j].x[0]));
    }
}

TEST(KernelParams, Validate) {
  KernelParams p = KernelParams::defaults(2);
  EXPECT_NO_THROW(p.validate());
  p.lambda = 1.5;
  EXPECT_THROW(p.validate(), ContractError);
  p = KernelParams::defaults(2);
  p.noise_variance = 1e-9;
  EXPECT_THROW(p.validate(), ContractError);
  p = KernelParams::defaults(2);
  p.lengthscales[1] = 0.0;
  EXPECT_THROW(p.validate(), ContractError);
  EXPECT_EQ(KernelParams::matern_nu, 2.5);
}
