#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mepi/complex_embedding.hpp"
#include "mepi/random_matrix.hpp"

using namespace mepi;

TEST(Hat, Scalars) {
  Eigen::Matrix2d expect;
  expect << 0, -1, 1, 0;
  EXPECT_EQ(hat(cdouble(0, 1)), expect);
  expect << 1, -1, 1, 1;
  EXPECT_EQ(hat(cdouble(1, 1)), expect);
  EXPECT_DOUBLE_EQ(hat(cdouble(1, 1)).determinant(), 2.0);
}

TEST(Hat, VectorLayoutIsInterleaved) {
  ComplexVector x(2);
  x << cdouble(1, 2), cdouble(3, 4);
  const RealVector v = hat_embed_vector(x);
  ASSERT_EQ(v.size(), 4);
  EXPECT_EQ(v(0), 1);
  EXPECT_EQ(v(1), 2);
  EXPECT_EQ(v(2), 3);
  EXPECT_EQ(v(3), 4);

  ComplexMatrix a(2, 2);
  a << cdouble(1, -1), cdouble(0, 2), cdouble(2, 0), cdouble(-1, 1);
  EXPECT_LE((hat_embed_vector(a * x) - hat_embed(a) * v).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Unhat, Examples) {
  Eigen::Matrix2d j;
  j << 0, -1, 1, 0;
  const ComplexMatrix u = unhat(j);
  EXPECT_EQ(u(0, 0), cdouble(0, 1));
  EXPECT_TRUE(unhat(RealMatrix::Identity(6, 6)).isApprox(ComplexMatrix::Identity(3, 3)));

  Eigen::Matrix2d bad;
  bad << 1, 0, 0, 2;
  try {
    unhat(bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::BadBlockStructure);
  }
  EXPECT_THROW(unhat(RealMatrix::Identity(3, 3)), Error);
}

TEST(Hat, RandomIdentities) {
  CounterRng rng(101);
  for (int t = 0; t < 200; ++t) {
    const Index m = 1 + static_cast<Index>(rng() % 5);
    const Index k = 1 + static_cast<Index>(rng() % 5);
    const Index n = 1 + static_cast<Index>(rng() % 5);
    const ComplexMatrix a = gaussian_matrix<cdouble>(m, k, rng);
    const ComplexMatrix b = gaussian_matrix<cdouble>(k, n, rng);
    EXPECT_LE((hat_embed(a * b) - hat_embed(a) * hat_embed(b)).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_EQ((hat_embed(a.adjoint()) - hat_embed(a).transpose()).cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(unhat(hat_embed(a)) == a);

    const ComplexMatrix s = gaussian_matrix<cdouble>(m, m, rng);
    const double det2 = std::norm(s.determinant());
    EXPECT_LE(std::abs(hat_embed(s).determinant() - det2), 1e-10 * det2);
  }
}

TEST(Hat, UnitaryBecomesOrthogonal) {
  CounterRng rng(7);
  for (int t = 0; t < 50; ++t) {
    const Index n = 1 + static_cast<Index>(rng() % 5);
    const RealMatrix u = hat_embed(haar_unitary<cdouble>(n, rng));
    EXPECT_LE((u * u.transpose() - RealMatrix::Identity(2 * n, 2 * n)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(BlockPolar, Examples) {
  auto p = block_polar(Eigen::Matrix2d::Identity());
  EXPECT_EQ(p.theta, 0.0);
  EXPECT_EQ(p.d1, 1.0);
  EXPECT_EQ(p.d2, 1.0);

  Eigen::Matrix2d d;
  d << 2, 0, 0, 3;
  p = block_polar(d);
  EXPECT_NEAR(p.theta, std::numbers::pi / 2, 1e-15);
  EXPECT_DOUBLE_EQ(p.d1, 3.0);
  EXPECT_DOUBLE_EQ(p.d2, 2.0);
  EXPECT_LE((p.reconstruct() - d).cwiseAbs().maxCoeff(), 1e-14);

  Eigen::Matrix2d s;
  s << 2, 1, 1, 2;
  p = block_polar(s);
  EXPECT_NEAR(p.theta, std::numbers::pi / 4, 1e-15);
  EXPECT_NEAR(p.d1, 3.0, 1e-15);
  EXPECT_NEAR(p.d2, 1.0, 1e-15);
}

TEST(BlockPolar, RejectsNonSpd) {
  Eigen::Matrix2d m;
  m << 1, 2, 2, 1;
  try {
    block_polar(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotSpd);
  }
  m << 1, 0.5, 0, 1;
  EXPECT_THROW(block_polar(m), Error);
}

TEST(BlockPolar, RandomReconstruction) {
  CounterRng rng(55);
  for (int t = 0; t < 500; ++t) {
    const Eigen::Matrix2d g = gaussian_matrix<double>(2, 2, rng);
    const Eigen::Matrix2d s = g * g.transpose() + 0.05 * Eigen::Matrix2d::Identity();
    const auto p = block_polar(s);
    EXPECT_GE(p.d1, p.d2);
    EXPECT_GT(p.d2, 0.0);
    EXPECT_GT(p.theta, -std::numbers::pi / 2);
    EXPECT_LE(p.theta, std::numbers::pi / 2);
    EXPECT_LE((p.reconstruct() - s).cwiseAbs().maxCoeff(), 1e-12 * (1.0 + s.cwiseAbs().maxCoeff()));
  }
}
