#pragma once

// Differential entropy estimators (m-spacing for scalars, Kozachenko-Leonenko
// k-nearest-neighbour for vectors), entropy-matched Gaussian surrogates and the
// closed-form entropy of linear mixtures of independent Gaussians. All values in nats.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>

#include "mepi/distributions.hpp"
#include "mepi/errors.hpp"
#include "mepi/kdtree.hpp"
#include "mepi/matrix_analysis.hpp"
#include "mepi/mixing_matrix.hpp"
#include "mepi/rng.hpp"

namespace mepi {

enum class EstimatorMethod { Spacing, Knn, ClosedForm };

inline std::string_view to_string(EstimatorMethod m) {
  switch (m) {
    case EstimatorMethod::Spacing: return "spacing";
    case EstimatorMethod::Knn: return "knn";
    case EstimatorMethod::ClosedForm: return "closed_form";
  }
  return "unknown";
}

inline EstimatorMethod parse_method(std::string_view s) {
  if (s == "spacing") return EstimatorMethod::Spacing;
  if (s == "knn") return EstimatorMethod::Knn;
  if (s == "closed_form") return EstimatorMethod::ClosedForm;
  throw Error(ErrorCode::ParseError, "unknown estimator method '" + std::string(s) + "'");
}

struct EntropyEstimate {
  double value = 0.0;  ///< nats
  EstimatorMethod method = EstimatorMethod::ClosedForm;
  std::size_t param = 0;  ///< spacing m or neighbour count k
  std::size_t n = 0;
  double std_error = 0.0;  ///< asymptotic: sd of the per-sample log-density terms / sqrt(N)
};

struct KnnOptions {
  std::size_t k = 4;
  bool jitter = true;  ///< break exact duplicates with a deterministic 1e-10 * scale perturbation
  std::uint64_t seed = kDefaultSeed;
};

namespace detail {

inline double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double log_unit_ball_volume(std::size_t d) {
  const double half = 0.5 * static_cast<double>(d);
  return half * std::log(std::numbers::pi) - std::lgamma(half + 1.0);
}

}  // namespace detail

/// m-spacing estimate with the exact uniform bias correction psi(N+1) - psi(m):
///   H = mean_i log(x_(i+m) - x_(i)) + psi(N+1) - psi(m),  i = 1..N-m.
/// Default m = round(N^(1/3)). Scale equivariant: estimate(a X) = estimate(X) + log|a|.
inline EntropyEstimate spacing_entropy(std::span<const double> samples, std::optional<std::size_t> m_spacing = {}) {
  const std::size_t n = samples.size();
  if (n < 10) throw Error(ErrorCode::TooFewSamples, "spacing estimator needs N >= 10, got " + std::to_string(n));
  for (double x : samples)
    if (!std::isfinite(x)) throw Error(ErrorCode::InvalidArgument, "samples must be finite");

  std::vector<double> x(samples.begin(), samples.end());
  std::sort(x.begin(), x.end());
  if (x.front() == x.back()) throw Error(ErrorCode::DegenerateData, "all samples are equal");

  std::size_t m = m_spacing.value_or(static_cast<std::size_t>(std::llround(std::cbrt(static_cast<double>(n)))));
  m = std::clamp<std::size_t>(m, 1, n - 1);

  using boost::math::digamma;
  const double correction = digamma(static_cast<double>(n) + 1.0) - digamma(static_cast<double>(m));
  std::vector<double> terms(n - m);
  for (std::size_t i = 0; i + m < n; ++i) {
    const double gap = x[i + m] - x[i];
    if (!(gap > 0.0))
      throw Error(ErrorCode::DegenerateData, "more than m tied samples; spacing entropy undefined");
    terms[i] = std::log(gap) + correction;
  }
  EntropyEstimate est;
  est.method = EstimatorMethod::Spacing;
  est.param = m;
  est.n = n;
  est.value = std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(terms.size());
  est.std_error = detail::sample_sd(terms) / std::sqrt(static_cast<double>(n));
  return est;
}

/// Kozachenko-Leonenko estimate for N points in d dimensions (row-major):
///   H = psi(N) - psi(k) + log V_d + (d / N) sum_i log eps_i,
/// eps_i the Euclidean distance from point i to its k-th nearest neighbour.
inline EntropyEstimate knn_entropy(std::span<const double> points, std::size_t dim, const KnnOptions& opts = {}) {
  if (dim < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be at least 1");
  if (points.size() % dim != 0) throw Error(ErrorCode::InvalidArgument, "point array is not a multiple of dim");
  const std::size_t n = points.size() / dim;
  if (n < 50) throw Error(ErrorCode::TooFewSamples, "knn estimator needs N >= 50, got " + std::to_string(n));
  if (opts.k < 1 || opts.k >= n) throw Error(ErrorCode::InvalidArgument, "k must satisfy 1 <= k < N");
  for (double v : points)
    if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, "samples must be finite");

  // Find exact duplicates by lexicographic sort.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto row = [&](std::size_t i) { return points.subspan(i * dim, dim); };
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = row(a), rb = row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
  std::vector<std::size_t> dups;
  for (std::size_t t = 1; t < n; ++t) {
    const auto ra = row(order[t - 1]), rb = row(order[t]);
    if (std::equal(ra.begin(), ra.end(), rb.begin())) dups.push_back(order[t]);
  }

  std::span<const double> data = points;
  std::vector<double> jittered;
  if (!dups.empty()) {
    if (!opts.jitter)
      throw Error(ErrorCode::DuplicatePoints, std::to_string(dups.size()) + " duplicate points");
    double scale = 0.0;
    for (std::size_t a = 0; a < dim; ++a) {
      double lo = points[a], hi = points[a];
      for (std::size_t i = 0; i < n; ++i) {
        lo = std::min(lo, points[i * dim + a]);
        hi = std::max(hi, points[i * dim + a]);
      }
      scale = std::max(scale, hi - lo);
    }
    if (scale == 0.0) throw Error(ErrorCode::DegenerateData, "all points are equal");
    jittered.assign(points.begin(), points.end());
    std::sort(dups.begin(), dups.end());
    CounterRng rng(opts.seed, 0x6A177E5ULL);
    for (std::size_t i : dups)
      for (std::size_t a = 0; a < dim; ++a) jittered[i * dim + a] += 1e-10 * scale * (rng.uniform() - 0.5);
    data = jittered;
  }

  const detail::KdTree tree(data, dim);
  std::vector<double> terms(n);
  const double d = static_cast<double>(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const double eps = tree.kth_neighbor_distance(i, opts.k);
    if (!(eps > 0.0)) throw Error(ErrorCode::DuplicatePoints, "zero neighbour distance after jitter");
    terms[i] = d * std::log(eps);
  }
  using boost::math::digamma;
  EntropyEstimate est;
  est.method = EstimatorMethod::Knn;
  est.param = opts.k;
  est.n = n;
  est.value = digamma(static_cast<double>(n)) - digamma(static_cast<double>(opts.k)) +
              detail::log_unit_ball_volume(dim) +
              std::accumulate(terms.begin(), terms.end(), 0.0) / static_cast<double>(n);
  est.std_error = detail::sample_sd(terms) / std::sqrt(static_cast<double>(n));
  return est;
}

/// Knn estimate on the columns of a d x N matrix (each column one observation).
inline EntropyEstimate knn_entropy(const RealMatrix& columns, const KnnOptions& opts = {}) {
  // Column-major storage of a d x N matrix is exactly the row-major N x d layout.
  return knn_entropy(std::span<const double>(columns.data(), static_cast<std::size_t>(columns.size())),
                     static_cast<std::size_t>(columns.rows()), opts);
}

/// Estimator choice for entropies of linear mixtures.
struct EstimatorSettings {
  std::optional<std::size_t> m_spacing;  ///< spacing window; default round(N^(1/3))
  std::size_t k = 4;                     ///< knn neighbour count
  std::optional<double> tolerance;       ///< absolute violation tolerance; default 3 std_error
};

/// Entropy of the joint law of the rows of z (one observation per column).
/// Real single row: spacing. Real multi-row: knn. Complex: knn on the
/// interleaved (Re, Im) embedding, 2m dimensions.
template <class Scalar>
EntropyEstimate estimate_entropy(const Mat<Scalar>& z, const EstimatorSettings& settings, std::uint64_t seed) {
  KnnOptions opts;
  opts.k = settings.k;
  opts.seed = seed;
  if constexpr (std::is_same_v<Scalar, double>) {
    if (z.rows() == 1) {
      const RealVector row = z.row(0).transpose();
      return spacing_entropy(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())),
                             settings.m_spacing);
    }
    return knn_entropy(z, opts);
  } else {
    RealMatrix emb(2 * z.rows(), z.cols());
    for (Index i = 0; i < z.rows(); ++i) {
      emb.row(2 * i) = z.row(i).real();
      emb.row(2 * i + 1) = z.row(i).imag();
    }
    return knn_entropy(emb, opts);
  }
}

/// Scale of the Gaussian whose entropy is h: real N(0, sigma^2), complex CN(0, sigma^2).
inline double surrogate_sigma(double h, Field field) {
  if (!std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "entropy must be finite");
  constexpr double pi = std::numbers::pi;
  constexpr double e = std::numbers::e;
  return field == Field::Real ? std::exp(h) / std::sqrt(2.0 * pi * e) : std::exp(0.5 * h) / std::sqrt(pi * e);
}

struct GaussianSurrogate {
  std::vector<double> sigmas;
  Field field = Field::Real;
};

inline GaussianSurrogate make_surrogate(std::span<const SourceModel> models) {
  GaussianSurrogate s;
  if (!models.empty()) s.field = models.front().field();
  for (const auto& m : models) {
    if (m.field() != s.field) throw Error(ErrorCode::InvalidArgument, "sources mix real and complex fields");
    s.sigmas.push_back(surrogate_sigma(exact_entropy(m), s.field));
  }
  return s;
}

/// Entropy of A X* with independent X*_j ~ N(0, sigma_j^2) (real) or CN(0, sigma_j^2) (complex):
///   real:    1/2 log((2 pi e)^m |A S A^t|)
///   complex: log((pi e)^m |A S A^H|),      S = diag(sigma_j^2).
/// Throws RankDeficient when A does not have full row rank (the entropy is -infinity).
template <class Scalar>
double gaussian_mix_entropy(const Mat<Scalar>& a, const GaussianSurrogate& surrogate) {
  if (static_cast<Index>(surrogate.sigmas.size()) != a.cols())
    throw Error(ErrorCode::InvalidArgument, "surrogate length must equal the number of columns");
  if (surrogate.field != field_of<Scalar>())
    throw Error(ErrorCode::InvalidArgument, "surrogate field does not match the matrix field");
  detail::require_full_row_rank(a);
  RealVector var(a.cols());
  for (Index j = 0; j < a.cols(); ++j) {
    const double s = surrogate.sigmas[static_cast<std::size_t>(j)];
    if (!(s > 0.0)) throw Error(ErrorCode::InvalidArgument, "surrogate sigmas must be positive");
    var(j) = s * s;
  }
  const Mat<Scalar> cov = a * var.cast<Scalar>().asDiagonal() * a.adjoint();
  double logdet = 0.0;
  if (!detail::hermitian_logdet(cov, logdet)) throw Error(ErrorCode::RankDeficient, "A S A^H is singular");
  const double m = static_cast<double>(a.rows());
  constexpr double pi = std::numbers::pi;
  constexpr double e = std::numbers::e;
  if constexpr (std::is_same_v<Scalar, double>)
    return 0.5 * m * std::log(2.0 * pi * e) + 0.5 * logdet;
  else
    return m * std::log(pi * e) + logdet;
}

}  // namespace mepi
