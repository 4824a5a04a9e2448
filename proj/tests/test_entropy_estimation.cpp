#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <vector>

#include "mepi/entropy_estimation.hpp"
#include "mepi/random_matrix.hpp"

using namespace mepi;

namespace {

const double kHalfLog2PiE = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e);

std::vector<double> draw(const SourceModel& m, std::size_t n, std::uint64_t seed) {
  const RealMatrix x = sample(m, n, seed);
  return {x.data(), x.data() + x.rows()};
}

// Interleaved d-dimensional points from independent columns.
std::vector<double> interleave(const RealMatrix& cols) {
  std::vector<double> out;
  for (Index i = 0; i < cols.rows(); ++i)
    for (Index j = 0; j < cols.cols(); ++j) out.push_back(cols(i, j));
  return out;
}

}  // namespace

TEST(Spacing, Calibration) {
  EXPECT_NEAR(spacing_entropy(draw(SourceModel::gaussian(1.0), 100000, 1)).value, kHalfLog2PiE, 0.01);
  EXPECT_NEAR(spacing_entropy(draw(SourceModel::uniform(0, 1), 100000, 2)).value, 0.0, 0.01);
  EXPECT_NEAR(spacing_entropy(draw(SourceModel::exponential(1.0), 100000, 3)).value, 1.0, 0.01);
  EXPECT_NEAR(spacing_entropy(draw(SourceModel::laplace(1.0), 100000, 4)).value, 1.0 + std::log(2.0), 0.01);
}

TEST(Spacing, ReportsParameters) {
  const auto e = spacing_entropy(draw(SourceModel::gaussian(1.0), 1000, 5));
  EXPECT_EQ(e.method, EstimatorMethod::Spacing);
  EXPECT_EQ(e.param, 10u);
  EXPECT_EQ(e.n, 1000u);
  EXPECT_GT(e.std_error, 0.0);
  EXPECT_LT(e.std_error, 0.1);
  EXPECT_EQ(spacing_entropy(draw(SourceModel::gaussian(1.0), 1000, 5), 7).param, 7u);
}

TEST(Spacing, ScaleEquivariance) {
  const auto x = draw(SourceModel::laplace(1.0), 5000, 6);
  const double base = spacing_entropy(x).value;
  CounterRng rng(9);
  for (int t = 0; t < 20; ++t) {
    const double a = rng.uniform(0.1, 10.0);
    std::vector<double> y(x);
    for (double& v : y) v *= a;
    EXPECT_NEAR(spacing_entropy(y).value, base + std::log(a), 1e-12);
  }
}

TEST(Spacing, Errors) {
  try {
    spacing_entropy(std::vector<double>(5, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSamples);
  }
  try {
    spacing_entropy(std::vector<double>(100, 1.0));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DegenerateData);
  }
  std::vector<double> bad = draw(SourceModel::gaussian(1.0), 100, 1);
  bad[3] = std::nan("");
  EXPECT_THROW(spacing_entropy(bad), Error);
}

TEST(Knn, Calibration) {
  const RealMatrix g2(sample(SourceModel::gaussian(1.0), 200000, 11).reshaped(100000, 2));
  EXPECT_NEAR(knn_entropy(interleave(g2), 2).value, std::log(2 * std::numbers::pi * std::numbers::e), 0.03);

  const RealMatrix c = sample(SourceModel::complex_gaussian(1.0), 100000, 12);
  EXPECT_NEAR(knn_entropy(interleave(c), 2).value, 2.1447, 0.03);

  RealMatrix u(100000, 2);
  u.col(0) = sample(SourceModel::uniform(0, 1), 100000, 13);
  u.col(1) = sample(SourceModel::uniform(0, 1), 100000, 14);
  EXPECT_NEAR(knn_entropy(interleave(u), 2).value, 0.0, 0.03);
}

TEST(Knn, AdditivityOnIndependentBlocks) {
  const std::size_t n = 100000;
  RealMatrix a(n, 2), b(n, 2), ab(n, 4);
  a.col(0) = sample(SourceModel::laplace(1.0), n, 1);
  a.col(1) = sample(SourceModel::uniform(-1, 1), n, 2);
  b = sample(SourceModel::complex_gaussian(1.0), n, 3);
  ab << a, b;
  const double ha = knn_entropy(interleave(a), 2).value;
  const double hb = knn_entropy(interleave(b), 2).value;
  const double hab = knn_entropy(interleave(ab), 4).value;
  EXPECT_NEAR(hab, ha + hb, 0.05);
}

TEST(Knn, ColumnMatrixOverload) {
  const RealMatrix x = sample(SourceModel::complex_gaussian(1.0), 2000, 1);
  const RealMatrix cols = x.transpose();
  EXPECT_EQ(knn_entropy(cols).value, knn_entropy(interleave(x), 2).value);
}

TEST(Knn, DuplicatesAndDeterminism) {
  std::vector<double> pts = interleave(sample(SourceModel::complex_gaussian(1.0), 500, 2));
  for (std::size_t i = 0; i < 20; ++i) {
    pts[2 * (i + 100)] = pts[2 * i];
    pts[2 * (i + 100) + 1] = pts[2 * i + 1];
  }
  KnnOptions strict;
  strict.jitter = false;
  try {
    knn_entropy(pts, 2, strict);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::DuplicatePoints);
  }
  const auto a = knn_entropy(pts, 2);
  const auto b = knn_entropy(pts, 2);
  EXPECT_TRUE(std::isfinite(a.value));
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.param, 4u);
  EXPECT_EQ(a.method, EstimatorMethod::Knn);
}

TEST(Knn, TooFewSamples) {
  try {
    knn_entropy(std::vector<double>(40, 0.0), 2);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSamples);
  }
}

TEST(EstimateEntropy, DispatchesByShape) {
  const RealMatrix one = sample(SourceModel::gaussian(1.0), 3000, 1).transpose();
  EXPECT_EQ(estimate_entropy<double>(one, {}, 1).method, EstimatorMethod::Spacing);
  const RealMatrix two = sample(SourceModel::complex_gaussian(1.0), 3000, 1).transpose();
  EXPECT_EQ(estimate_entropy<double>(two, {}, 1).method, EstimatorMethod::Knn);
  ComplexMatrix z(1, 3000);
  for (Index i = 0; i < 3000; ++i) z(0, i) = cdouble(two(0, i), two(1, i));
  const auto ez = estimate_entropy<cdouble>(z, {}, 1);
  EXPECT_EQ(ez.method, EstimatorMethod::Knn);
  EXPECT_EQ(ez.value, estimate_entropy<double>(two, {}, 1).value);
}

TEST(Surrogate, Sigma) {
  EXPECT_NEAR(surrogate_sigma(kHalfLog2PiE, Field::Real), 1.0, 1e-15);
  EXPECT_NEAR(surrogate_sigma(0.0, Field::Real), 1.0 / std::sqrt(2 * std::numbers::pi * std::numbers::e), 1e-15);
  EXPECT_NEAR(surrogate_sigma(0.0, Field::Real), 0.24197, 1e-5);
  EXPECT_NEAR(surrogate_sigma(std::log(std::numbers::pi * std::numbers::e), Field::Complex), 1.0, 1e-15);
  for (double s : {0.01, 0.3, 1.0, 7.5}) {
    EXPECT_NEAR(surrogate_sigma(exact_entropy(SourceModel::gaussian(s)), Field::Real), s, 1e-12 * s);
    EXPECT_NEAR(surrogate_sigma(exact_entropy(SourceModel::complex_gaussian(s)), Field::Complex), s, 1e-12 * s);
  }
}

TEST(Surrogate, MixEntropyExamples) {
  const GaussianSurrogate iid{{1.0, 1.0, 1.0}, Field::Real};
  CounterRng rng(3);
  const RealMatrix q = haar_orthonormal_rows<double>(2, 3, rng);
  EXPECT_NEAR(gaussian_mix_entropy<double>(q, iid), 2 * kHalfLog2PiE, 1e-12);

  const double r = 1 / std::sqrt(2.0);
  RealMatrix a(2, 3);
  a << 1, 0, 0, 0, r, r;
  EXPECT_NEAR(gaussian_mix_entropy<double>(a, iid), std::log(2 * std::numbers::pi * std::numbers::e), 1e-12);
  EXPECT_NEAR(gaussian_mix_entropy<double>(a, iid), 2.8379, 1e-4);

  const GaussianSurrogate two{{1.0, 1.0}, Field::Real};
  RealMatrix d(2, 2);
  d << 2, 0, 0, 1;
  EXPECT_NEAR(gaussian_mix_entropy<double>(d, two), 2 * kHalfLog2PiE + std::log(2.0), 1e-12);

  RealMatrix low(2, 2);
  low << 1, 1, 2, 2;
  try {
    gaussian_mix_entropy<double>(low, two);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
}

TEST(Surrogate, MixEntropyDecomposition) {
  CounterRng rng(4);
  for (int t = 0; t < 100; ++t) {
    const Index n = 2 + static_cast<Index>(rng() % 4);
    const Index m = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(n));
    const double s = rng.uniform(0.2, 3.0);
    const RealMatrix a = gaussian_matrix<double>(m, n, rng);
    const GaussianSurrogate iid{std::vector<double>(static_cast<std::size_t>(n), s), Field::Real};
    const double ld = std::log((a * a.transpose()).determinant());
    const double expect = static_cast<double>(m) * exact_entropy(SourceModel::gaussian(s)) + 0.5 * ld;
    EXPECT_NEAR(gaussian_mix_entropy<double>(a, iid), expect, 1e-10);
  }
  const ComplexMatrix q = haar_orthonormal_rows<cdouble>(2, 3, rng);
  const GaussianSurrogate c{{1.0, 1.0, 1.0}, Field::Complex};
  EXPECT_NEAR(gaussian_mix_entropy<cdouble>(q, c), 2 * std::log(std::numbers::pi * std::numbers::e), 1e-12);
}

TEST(Surrogate, FromModels) {
  const std::vector<SourceModel> models{SourceModel::uniform(0, 1), SourceModel::gaussian(2.0)};
  const auto s = make_surrogate(models);
  ASSERT_EQ(s.sigmas.size(), 2u);
  EXPECT_NEAR(s.sigmas[0], 0.24197, 1e-5);
  EXPECT_NEAR(s.sigmas[1], 2.0, 1e-12);
  EXPECT_EQ(s.field, Field::Real);
}
