#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "mepi/bse.hpp"
#include "mepi/random_matrix.hpp"

using namespace mepi;

namespace {

const double kR = 1.0 / std::sqrt(2.0);

std::vector<SourceModel> unit_uniforms(int k) { return std::vector<SourceModel>(k, SourceModel::uniform_with_variance(1.0)); }

RealMatrix permutation(Index n, CounterRng& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (Index i = n - 1; i > 0; --i)
    std::swap(p[static_cast<std::size_t>(i)], p[rng() % static_cast<std::uint64_t>(i + 1)]);
  RealMatrix m = RealMatrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) m(i, p[static_cast<std::size_t>(i)]) = 1.0;
  return m;
}

}  // namespace

TEST(Covariance, IidSourcesGiveIdentity) {
  const RealMatrix x = sample_sources<double>(unit_uniforms(3), 100000, 1);
  const RealMatrix k = sample_covariance<double>(x);
  EXPECT_LE((k - RealMatrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 0.02);
  EXPECT_TRUE(k.isApprox(k.transpose(), 0.0));
}

TEST(Covariance, MixtureGivesMMt) {
  CounterRng rng(2);
  const RealMatrix m = gaussian_matrix<double>(3, 3, rng);
  const RealMatrix y = m * sample_sources<double>(unit_uniforms(3), 100000, 2);
  EXPECT_LE((sample_covariance<double>(y) - m * m.transpose()).cwiseAbs().maxCoeff(), 0.05);
}

TEST(Covariance, ConstantChannel) {
  RealMatrix y = sample_sources<double>(unit_uniforms(2), 2000, 3);
  y.row(1).setConstant(4.0);
  const RealMatrix k = sample_covariance<double>(y);
  EXPECT_EQ(k(1, 1), 0.0);
  EXPECT_EQ(k(0, 1), 0.0);
  try {
    whiten<double>(y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::SingularCovariance);
  }
  try {
    sample_covariance<double>(RealMatrix::Ones(3, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TooFewSamples);
  }
}

TEST(Whiten, Examples) {
  const RealMatrix x = sample_sources<double>(unit_uniforms(2), 100000, 4);
  const auto w = whiten<double>(x);
  EXPECT_LE((w.cinv - RealMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 0.02);
  EXPECT_LE((sample_covariance<double>(w.data) - RealMatrix::Identity(2, 2)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_LE((w.data - w.cinv * x).cwiseAbs().maxCoeff(), 1e-12);

  // Exactly white data rescaled to covariance diag(4, 1).
  const RealMatrix scaled = Eigen::Vector2d(2.0, 1.0).asDiagonal() * w.data;
  const auto d = whiten<double>(scaled);
  EXPECT_LE((d.cinv - RealMatrix(Eigen::Vector2d(0.5, 1.0).asDiagonal())).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Whiten, RandomMixturesReal) {
  CounterRng rng(5);
  for (int t = 0; t < 20; ++t) {
    const Index n = 2 + static_cast<Index>(rng() % 4);
    const RealMatrix m = gaussian_matrix<double>(n, n, rng);
    const RealMatrix y = m * sample_sources<double>(unit_uniforms(static_cast<int>(n)), 2000, t);
    const auto w = whiten<double>(y);
    EXPECT_LE((sample_covariance<double>(w.data) - RealMatrix::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Whiten, ComplexMixture) {
  CounterRng rng(6);
  const ComplexMatrix m = gaussian_matrix<cdouble>(3, 3, rng);
  const std::vector<SourceModel> s(3, SourceModel::complex_disk(1.0));
  const ComplexMatrix y = m * sample_sources<cdouble>(s, 5000, 6);
  const auto w = whiten<cdouble>(y);
  EXPECT_LE((sample_covariance<cdouble>(w.data) - ComplexMatrix::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(Contrast, SeparatedSourcesAtIdentity) {
  const RealMatrix x = sample_sources<double>(unit_uniforms(3), 100000, 7);
  const double c = contrast<double>(RealMatrix::Identity(3, 3), x);
  EXPECT_NEAR(c, 3.0 * std::log(2.0 * std::sqrt(3.0)), 0.03);
}

TEST(Contrast, InvariantToPermutationAndScalingReal) {
  CounterRng rng(8);
  const RealMatrix y = gaussian_matrix<double>(4, 4, rng) * sample_sources<double>(unit_uniforms(4), 3000, 8);
  for (int t = 0; t < 100; ++t) {
    const Index m = 1 + static_cast<Index>(rng() % 4);
    const RealMatrix w = gaussian_matrix<double>(m, 4, rng);
    RealVector d(m);
    for (Index i = 0; i < m; ++i) d(i) = rng.uniform(0.5, 2.0) * (rng() % 2 ? 1.0 : -1.0);
    const RealMatrix pdw = permutation(m, rng) * d.asDiagonal() * w;
    const double base = contrast<double>(w, y);
    EXPECT_LE(std::abs(contrast<double>(pdw, y) - base), 1e-9 * (1.0 + std::abs(base)));
  }
}

TEST(Contrast, InvariantToPermutationAndScalingComplex) {
  CounterRng rng(9);
  const std::vector<SourceModel> s(3, SourceModel::complex_disk(1.0));
  const ComplexMatrix y = gaussian_matrix<cdouble>(3, 3, rng) * sample_sources<cdouble>(s, 1000, 9);
  for (int t = 0; t < 100; ++t) {
    const Index m = 1 + static_cast<Index>(rng() % 3);
    const ComplexMatrix w = gaussian_matrix<cdouble>(m, 3, rng);
    ComplexVector d(m);
    for (Index i = 0; i < m; ++i) d(i) = std::polar(rng.uniform(0.5, 2.0), rng.uniform(-3.0, 3.0));
    const ComplexMatrix pdw = permutation(m, rng).cast<cdouble>() * d.asDiagonal() * w;
    const double base = contrast<cdouble>(w, y);
    EXPECT_LE(std::abs(contrast<cdouble>(pdw, y) - base), 1e-9 * (1.0 + std::abs(base)));
  }
}

TEST(Contrast, SeparatingBeatsRandom) {
  CounterRng rng(10);
  const RealMatrix m = gaussian_matrix<double>(3, 3, rng);
  const RealMatrix y = m * sample_sources<double>(unit_uniforms(3), 20000, 10);
  const RealMatrix minv = m.inverse();
  for (Index k = 1; k <= 3; ++k) {
    const RealMatrix sep = minv.topRows(k);
    const double c_sep = contrast<double>(sep, y);
    for (int t = 0; t < 50; ++t) EXPECT_LE(c_sep, contrast<double>(gaussian_matrix<double>(k, 3, rng), y));
  }
}

TEST(Contrast, Errors) {
  const RealMatrix y = sample_sources<double>(unit_uniforms(2), 2000, 1);
  RealMatrix w(2, 2);
  w << 1, 1, 2, 2;
  try {
    contrast<double>(w, y);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::RankDeficient);
  }
  EXPECT_THROW(contrast<double>(RealMatrix::Identity(3, 3), y), Error);
}

TEST(Extract, TwoSourcesRotated) {
  const double a = std::numbers::pi / 6;
  RealMatrix m(2, 2);
  m << std::cos(a), -std::sin(a), std::sin(a), std::cos(a);
  const RealMatrix y = m * sample_sources<double>(unit_uniforms(2), 20000, 11);
  ExtractionConfig cfg;
  cfg.seed = 11;
  const auto r = minimize_contrast<double>(y, 1, cfg);
  const auto q = separation_quality<double>(r.W, m);
  EXPECT_GE(q.min_dominance, 0.99);
  EXPECT_NEAR(r.W.row(0).norm(), 1.0, 1e-12);
  EXPECT_NEAR(r.contrast_value, contrast<double>(r.W, y), 1e-9);
  EXPECT_EQ(r.restarts.size(), 5u);
}

TEST(Extract, TraceIsMonotone) {
  CounterRng rng(12);
  const RealMatrix m = haar_unitary<double>(3, rng);
  const std::vector<SourceModel> s{SourceModel::uniform_with_variance(1.0), SourceModel::laplace(1.0),
                                   SourceModel::uniform_with_variance(1.0)};
  const RealMatrix y = m * sample_sources<double>(s, 5000, 12);
  ExtractionConfig cfg;
  cfg.restarts = 3;
  const auto r = minimize_contrast<double>(y, 2, cfg);
  for (const auto& tr : r.restarts) {
    ASSERT_GE(tr.sweeps.size(), 2u);
    for (std::size_t i = 1; i < tr.sweeps.size(); ++i) EXPECT_LE(tr.sweeps[i], tr.sweeps[i - 1] + 1e-12);
  }
  for (Index i = 0; i < r.W.rows(); ++i) EXPECT_NEAR(r.W.row(i).norm(), 1.0, 1e-12);
}

TEST(Extract, AlreadySeparated) {
  const RealMatrix x = sample_sources<double>(unit_uniforms(3), 20000, 13);
  ExtractionConfig cfg;
  cfg.restarts = 2;
  const auto r = minimize_contrast<double>(x, 3, cfg);
  EXPECT_LE(r.contrast_value, contrast<double>(RealMatrix::Identity(3, 3), x) + 1e-6);
  EXPECT_TRUE(separation_quality<double>(r.W, RealMatrix::Identity(3, 3)).success);
}

TEST(Extract, ComplexSources) {
  CounterRng rng(14);
  const ComplexMatrix m = haar_unitary<cdouble>(2, rng);
  const std::vector<SourceModel> s{SourceModel::complex_disk(1.0), SourceModel::complex_disk(1.0)};
  const ComplexMatrix y = m * sample_sources<cdouble>(s, 5000, 14);
  ExtractionConfig cfg;
  cfg.restarts = 2;
  const auto r = minimize_contrast<cdouble>(y, 1, cfg);
  EXPECT_GE(separation_quality<cdouble>(r.W, m).min_dominance, 0.95);
  EXPECT_NEAR(r.contrast_value, contrast<cdouble>(r.W, y), 1e-9);
}

TEST(Extract, Deterministic) {
  const RealMatrix y = RealMatrix(Eigen::Matrix2d{{1, 0.5}, {0.3, 1}}) * sample_sources<double>(unit_uniforms(2), 3000, 3);
  ExtractionConfig cfg;
  cfg.restarts = 2;
  const auto a = minimize_contrast<double>(y, 1, cfg);
  const auto b = minimize_contrast<double>(y, 1, cfg);
  EXPECT_TRUE(a.W == b.W);
  EXPECT_EQ(a.contrast_value, b.contrast_value);
}

TEST(Oracle, SeparatingDemixer) {
  CounterRng rng(15);
  const RealMatrix m = haar_unitary<double>(4, rng);
  const RealMatrix w = m.transpose().topRows(2);  // W M = [I | 0]
  const auto d = oracle_decompose<double>(w, m, unit_uniforms(4), 50000, 15);
  EXPECT_NEAR(d.C_h, 0.0, 0.03);
  EXPECT_NEAR(d.C_i, 0.0, 0.03);
  EXPECT_EQ(d.residual, 0.0);
  EXPECT_LE(std::abs(d.identity_defect()), 2.0 * d.std_error);
}

TEST(Oracle, MixedPairGap) {
  const RealMatrix m = RealMatrix::Identity(2, 2);
  RealMatrix w(1, 2);
  w << kR, kR;
  const auto d = oracle_decompose<double>(w, m, unit_uniforms(2), 50000, 16);
  EXPECT_NEAR(d.C_h, 0.5 - 0.5 * std::log(2.0), 0.02);
  EXPECT_NEAR(d.C_i, 0.0, 1e-12);  // a single row has no dependence term
}

TEST(Oracle, ResidualVanishesForEqualVariance) {
  CounterRng rng(17);
  for (int t = 0; t < 10; ++t) {
    const RealMatrix m = gaussian_matrix<double>(3, 3, rng);
    const RealMatrix w = gaussian_matrix<double>(2, 3, rng);
    const auto d = oracle_decompose<double>(w, m, unit_uniforms(3), 2000, static_cast<std::uint64_t>(t));
    EXPECT_EQ(d.residual, 0.0);
  }
}

TEST(Oracle, ResidualReportedForUnequalVariance) {
  // Equal entropy, different variances: uniform and laplace normalised to 0 nats.
  const auto n = normalize_entropies(std::vector<SourceModel>{SourceModel::uniform(0, 1), SourceModel::laplace(1.0)});
  RealMatrix w(1, 2);
  w << 0.6, 0.8;
  const auto d = oracle_decompose<double>(w, RealMatrix::Identity(2, 2), n.models, 20000, 18);
  const double v0 = n.models[0].variance(), v1 = n.models[1].variance();
  EXPECT_NEAR(d.residual, -0.5 * std::log(0.36 * v0 + 0.64 * v1), 1e-12);
  EXPECT_THROW(oracle_decompose<double>(w, RealMatrix::Identity(2, 2), unit_uniforms(1), 2000, 1), Error);
  const std::vector<SourceModel> unequal{SourceModel::uniform(0, 1), SourceModel::laplace(1.0)};
  EXPECT_THROW(oracle_decompose<double>(w, RealMatrix::Identity(2, 2), unequal, 2000, 1), Error);
}

TEST(SeparationQuality, Examples) {
  auto q = separation_quality<double>(RealMatrix::Identity(2, 3), RealMatrix::Identity(3, 3));
  EXPECT_EQ(q.dominance, (std::vector<double>{1.0, 1.0}));
  EXPECT_TRUE(q.success);

  RealMatrix w(1, 2);
  w << 1, 0.1;
  q = separation_quality<double>(w, RealMatrix::Identity(2, 2));
  EXPECT_NEAR(q.dominance[0], 1 / 1.01, 1e-15);
  EXPECT_NEAR(q.dominance[0], 0.9901, 1e-4);

  RealMatrix same(2, 2);
  same << 1, 0, 1, 0.01;
  q = separation_quality<double>(same, RealMatrix::Identity(2, 2));
  EXPECT_FALSE(q.distinct);
  EXPECT_FALSE(q.success);
  EXPECT_EQ(q.argmax, (std::vector<Index>{0, 0}));
}
