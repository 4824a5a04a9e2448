#pragma once

// Blind source extraction by minimizing the contrast
//   C(W) = sum_i h(w_i Y) - 1/2 log|W K_Y W^t|          (real)
//   C(W) = sum_i h(w_i Y) - log|W K_Y W^H|              (complex)
// over m x n demixers W, with an oracle decomposition C = C_h + C_i + residual + m h
// available when the mixture is known.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mepi/distributions.hpp"
#include "mepi/entropy_estimation.hpp"
#include "mepi/errors.hpp"
#include "mepi/matrix_analysis.hpp"
#include "mepi/mixing_matrix.hpp"
#include "mepi/random_matrix.hpp"
#include "mepi/rng.hpp"

namespace mepi {

struct GroundTruth {
  MixingMatrix mixing;
  std::vector<SourceModel> sources;
};

/// n channels x N observations (one observation per column).
template <class Scalar>
struct Observation {
  Mat<Scalar> data;
  std::optional<GroundTruth> truth;

  Index channels() const noexcept { return data.rows(); }
  Index samples() const noexcept { return data.cols(); }
};

/// Maximum-likelihood (1/N) centered covariance; Hermitian in the complex field.
template <class Scalar>
Mat<Scalar> sample_covariance(const Mat<Scalar>& y) {
  if (y.cols() < y.rows() + 1)
    throw Error(ErrorCode::TooFewSamples, "covariance needs N >= n + 1 observations");
  const auto mean = y.rowwise().mean();
  const Mat<Scalar> centered = y.colwise() - mean;
  Mat<Scalar> k = centered * centered.adjoint() / static_cast<double>(y.cols());
  // Exact Hermitian symmetry.
  k = (0.5 * (k + k.adjoint())).eval();
  return k;
}

template <class Scalar>
struct Whitened {
  Mat<Scalar> data;  ///< Cinv * Y
  Mat<Scalar> cinv;  ///< symmetric inverse square root of the sample covariance
};

template <class Scalar>
Whitened<Scalar> whiten(const Mat<Scalar>& y) {
  const Mat<Scalar> k = sample_covariance(y);
  Eigen::SelfAdjointEigenSolver<Mat<Scalar>> eig(k);
  const RealVector& ev = eig.eigenvalues();
  if (!(ev.minCoeff() > 1e-10 * ev.maxCoeff()) || !(ev.maxCoeff() > 0.0))
    throw Error(ErrorCode::SingularCovariance, "sample covariance is singular or near-singular");
  const RealVector inv_sqrt = ev.cwiseSqrt().cwiseInverse();
  Whitened<Scalar> out;
  out.cinv = eig.eigenvectors() * inv_sqrt.cast<Scalar>().asDiagonal() * eig.eigenvectors().adjoint();
  out.data = out.cinv * y;
  return out;
}

/// Entropy of a single row of projected data.
template <class Scalar>
EntropyEstimate row_entropy(const RowVec<Scalar>& z, const EstimatorSettings& settings, std::uint64_t seed = kDefaultSeed) {
  const Mat<Scalar> as_matrix = z;
  return estimate_entropy(as_matrix, settings, seed);
}

/// Evaluates the contrast against a fixed data set, caching K_Y.
template <class Scalar>
class ContrastEvaluator {
 public:
  ContrastEvaluator(const Mat<Scalar>& y, EstimatorSettings settings)
      : y_(y), k_(sample_covariance(y)), settings_(std::move(settings)) {}

  double operator()(const Mat<Scalar>& w) const { return evaluate(w).value; }

  struct Terms {
    double value = 0.0;
    std::vector<EntropyEstimate> marginals;  ///< h(w_i Y)
    double logdet_term = 0.0;                ///< coefficient * log|W K W^H|
  };

  Terms evaluate(const Mat<Scalar>& w) const {
    if (w.cols() != y_.rows()) throw Error(ErrorCode::InvalidArgument, "W has the wrong number of columns");
    if (w.rows() > w.cols()) throw Error(ErrorCode::InvalidArgument, "W must have m <= n rows");
    detail::require_full_row_rank(w);
    Terms t;
    double logdet = 0.0;
    if (!detail::hermitian_logdet(Mat<Scalar>(w * k_ * w.adjoint()), logdet))
      throw Error(ErrorCode::RankDeficient, "W K_Y W^H is singular");
    t.logdet_term = (std::is_same_v<Scalar, double> ? 0.5 : 1.0) * logdet;
    double sum = 0.0;
    for (Index i = 0; i < w.rows(); ++i) {
      const RowVec<Scalar> z = w.row(i) * y_;
      t.marginals.push_back(row_entropy<Scalar>(z, settings_));
      sum += t.marginals.back().value;
    }
    t.value = sum - t.logdet_term;
    return t;
  }

  const Mat<Scalar>& covariance() const noexcept { return k_; }
  const EstimatorSettings& settings() const noexcept { return settings_; }

 private:
  const Mat<Scalar>& y_;
  Mat<Scalar> k_;
  EstimatorSettings settings_;
};

template <class Scalar>
double contrast(const Mat<Scalar>& w, const Mat<Scalar>& y, const EstimatorSettings& settings = {}) {
  return ContrastEvaluator<Scalar>(y, settings)(w);
}

struct ExtractionConfig {
  std::size_t restarts = 5;
  std::size_t max_sweeps = 50;
  double sweep_tolerance = 1e-5;  ///< nats of improvement per sweep
  std::size_t line_evaluations = 40;
  double angle_tolerance = 1e-6;  ///< golden-section stops when the bracket is narrower
  std::uint64_t seed = kDefaultSeed;
  EstimatorSettings estimator;
};

struct RestartTrace {
  std::uint64_t seed = 0;
  std::vector<double> sweeps;  ///< objective after initialization and after each sweep
  bool converged = false;
};

template <class Scalar>
struct ExtractionResult {
  Mat<Scalar> W;  ///< m x n, unit-norm rows
  double contrast_value = 0.0;
  Mat<Scalar> whitener;
  std::vector<RestartTrace> restarts;
  std::size_t best_restart = 0;
  bool converged = false;  ///< false means NoConvergence: sweep budget exhausted, best returned
};

namespace detail {

struct LineSearchResult {
  double angle = 0.0;
  double value = 0.0;
};

/// Golden-section search on [lo, hi]; returns the best point evaluated.
template <class F>
LineSearchResult golden_section(F&& f, double lo, double hi, std::size_t max_evals, double tol) {
  constexpr double inv_phi = 0.6180339887498949;
  double a = lo, b = hi;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c), fd = f(d);
  std::size_t evals = 2;
  LineSearchResult best = fc <= fd ? LineSearchResult{c, fc} : LineSearchResult{d, fd};
  while (evals < max_evals && (b - a) > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
      if (fc < best.value) best = {c, fc};
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
      if (fd < best.value) best = {d, fd};
    }
    ++evals;
  }
  return best;
}

/// Givens-type rotation of rows p and q of u. In the complex field, `imaginary`
/// selects the generator with phase pi/2.
template <class Scalar>
void rotate_rows(Mat<Scalar>& u, Index p, Index q, double angle, bool imaginary) {
  const double c = std::cos(angle), s = std::sin(angle);
  const RowVec<Scalar> up = u.row(p);
  const RowVec<Scalar> uq = u.row(q);
  if constexpr (std::is_same_v<Scalar, double>) {
    (void)imaginary;
    u.row(p) = c * up + s * uq;
    u.row(q) = -s * up + c * uq;
  } else {
    const Scalar phase = imaginary ? Scalar(0.0, 1.0) : Scalar(1.0, 0.0);
    u.row(p) = c * up + (s * phase) * uq;
    u.row(q) = (-s * std::conj(phase)) * up + c * uq;
  }
}

template <class Scalar>
struct RestartOutcome {
  Mat<Scalar> u;
  double value = 0.0;
  RestartTrace trace;
};

template <class Scalar>
RestartOutcome<Scalar> run_restart(const Mat<Scalar>& yw, Index m, const ExtractionConfig& cfg, std::uint64_t seed) {
  const Index n = yw.rows();
  CounterRng rng(seed);
  RestartOutcome<Scalar> out;
  out.trace.seed = seed;
  out.u = haar_unitary<Scalar>(n, rng);

  auto entropy_of = [&](const RowVec<Scalar>& v) { return row_entropy<Scalar>(RowVec<Scalar>(v * yw), cfg.estimator).value; };

  std::vector<double> h(static_cast<std::size_t>(m));
  for (Index i = 0; i < m; ++i) h[static_cast<std::size_t>(i)] = entropy_of(out.u.row(i));
  auto total = [&] {
    double s = 0.0;
    for (double v : h) s += v;
    return s;
  };
  double current = total();
  out.trace.sweeps.push_back(current);

  constexpr bool is_complex = !std::is_same_v<Scalar, double>;
  for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
    const double start = current;
    for (Index p = 0; p < m; ++p) {
      for (Index q = p + 1; q < n; ++q) {
        for (int gen = 0; gen < (is_complex ? 2 : 1); ++gen) {
          const bool imaginary = gen == 1;
          const bool both = q < m;
          const double before = h[static_cast<std::size_t>(p)] + (both ? h[static_cast<std::size_t>(q)] : 0.0);
          auto objective = [&](double angle) {
            Mat<Scalar> pair(2, n);
            pair << out.u.row(p), out.u.row(q);
            rotate_rows(pair, 0, 1, angle, imaginary);
            double v = entropy_of(pair.row(0));
            if (both) v += entropy_of(pair.row(1));
            return v;
          };
          const auto best = golden_section(objective, -std::numbers::pi / 4, std::numbers::pi / 4,
                                           cfg.line_evaluations, cfg.angle_tolerance);
          if (best.value < before) {
            rotate_rows(out.u, p, q, best.angle, imaginary);
            h[static_cast<std::size_t>(p)] = entropy_of(out.u.row(p));
            if (both) h[static_cast<std::size_t>(q)] = entropy_of(out.u.row(q));
            current = total();
          }
        }
      }
    }
    out.trace.sweeps.push_back(current);
    if (start - current < cfg.sweep_tolerance) {
      out.trace.converged = true;
      break;
    }
  }
  out.value = current;
  return out;
}

}  // namespace detail

/// Whitens Y, then minimizes sum_i h(v_i Y_w) over the first m rows V of a unitary matrix
/// by cyclic Givens coordinate descent with golden-section line searches, keeping the best
/// of several seeded restarts. Returns W = V Cinv with rows normalized to unit length.
template <class Scalar>
ExtractionResult<Scalar> minimize_contrast(const Mat<Scalar>& y, Index m, const ExtractionConfig& cfg = {}) {
  const Index n = y.rows();
  if (m < 1 || m > n) throw Error(ErrorCode::InvalidArgument, "need 1 <= m <= n");
  if (cfg.restarts < 1) throw Error(ErrorCode::InvalidArgument, "need at least one restart");
  const auto white = whiten(y);

  ExtractionResult<Scalar> res;
  res.whitener = white.cinv;
  std::optional<detail::RestartOutcome<Scalar>> best;
  for (std::size_t r = 0; r < cfg.restarts; ++r) {
    auto outcome = detail::run_restart<Scalar>(white.data, m, cfg, derive_stream(cfg.seed, r));
    res.restarts.push_back(outcome.trace);
    if (!best || outcome.value < best->value) {
      res.best_restart = r;
      best = std::move(outcome);
    }
  }
  res.converged = best->trace.converged;
  Mat<Scalar> w = best->u.topRows(m) * white.cinv;
  for (Index i = 0; i < m; ++i) w.row(i) /= w.row(i).norm();
  res.W = std::move(w);
  res.contrast_value = contrast(res.W, y, cfg.estimator);
  return res;
}

struct ContrastDecomposition {
  double C = 0.0;
  double C_h = 0.0;  ///< h(AX) - h(AX*)
  double C_i = 0.0;  ///< sum_i h(Z_i) - h(Z)
  double residual = 0.0;  ///< c log|A A^H| - c log|A K_X A^H|, c = 1/2 (real) or 1 (complex)
  double h_common = 0.0;  ///< common source entropy
  Index m = 0;
  double std_error = 0.0;  ///< combined std error of the estimated terms
  /// C - C_h - C_i - residual - m h_common; zero up to covariance sampling error.
  double identity_defect() const { return C - C_h - C_i - residual - static_cast<double>(m) * h_common; }
};

/// Decomposes the contrast at W for a known mixture Y = M X. Sources must share one entropy.
template <class Scalar>
ContrastDecomposition oracle_decompose(const Mat<Scalar>& w, const Mat<Scalar>& mixing,
                                       const std::vector<SourceModel>& sources, std::size_t n_samples,
                                       std::uint64_t seed, const EstimatorSettings& settings = {}) {
  if (mixing.rows() != mixing.cols() || static_cast<Index>(sources.size()) != mixing.cols())
    throw Error(ErrorCode::InvalidArgument, "mixing matrix must be square with one source per column");
  const double h0 = exact_entropy(sources.front());
  for (const auto& s : sources)
    if (std::abs(exact_entropy(s) - h0) > 1e-9)
      throw Error(ErrorCode::InvalidArgument, "sources must have equal entropies (apply normalize_entropies)");

  const Mat<Scalar> a = w * mixing;
  const Mat<Scalar> x = sample_sources<Scalar>(sources, n_samples, seed);
  const Mat<Scalar> y = mixing * x;
  const Mat<Scalar> z = w * y;

  const ContrastEvaluator<Scalar> eval(y, settings);
  const auto terms = eval.evaluate(w);
  const EntropyEstimate joint = estimate_entropy(z, settings, seed);
  const double h_star = gaussian_mix_entropy(a, make_surrogate(sources));

  double sum_marg = 0.0, var = joint.std_error * joint.std_error;
  for (const auto& e : terms.marginals) {
    sum_marg += e.value;
    var += e.std_error * e.std_error;
  }
  RealVector kx(mixing.cols());
  for (Index j = 0; j < kx.size(); ++j) kx(j) = sources[static_cast<std::size_t>(j)].variance();
  const double coef = std::is_same_v<Scalar, double> ? 0.5 : 1.0;
  double residual = 0.0;
  const double kx_mean = kx.mean();
  if ((kx.array() - kx_mean).abs().maxCoeff() <= 1e-12 * kx_mean) {
    // K_X = v I: the residual is -c m ln v; unit variance up to parameter rounding counts as v = 1.
    if (std::abs(kx_mean - 1.0) > 1e-12) residual = -coef * static_cast<double>(w.rows()) * std::log(kx_mean);
  } else {
    double ld_aa = 0.0, ld_akxa = 0.0;
    detail::hermitian_logdet(Mat<Scalar>(a * a.adjoint()), ld_aa);
    detail::hermitian_logdet(Mat<Scalar>(a * kx.cast<Scalar>().asDiagonal() * a.adjoint()), ld_akxa);
    residual = coef * (ld_aa - ld_akxa);
  }

  ContrastDecomposition d;
  d.C = terms.value;
  d.C_h = joint.value - h_star;
  d.C_i = sum_marg - joint.value;
  d.residual = residual;
  d.h_common = h0;
  d.m = w.rows();
  d.std_error = std::sqrt(var);
  return d;
}

struct SeparationQuality {
  std::vector<double> dominance;
  std::vector<Index> argmax;  ///< 0-based source index dominating each row
  double min_dominance = 0.0;
  bool distinct = false;
  bool success = false;
};

/// Row dominance of P = W M: max_j |P_ij|^2 / sum_j |P_ij|^2.
template <class Scalar>
SeparationQuality separation_quality(const Mat<Scalar>& w, const Mat<Scalar>& mixing, double threshold = 0.95) {
  if (w.cols() != mixing.rows()) throw Error(ErrorCode::InvalidArgument, "W and M dimensions do not agree");
  const Mat<Scalar> p = w * mixing;
  SeparationQuality q;
  q.min_dominance = std::numeric_limits<double>::infinity();
  std::set<Index> cols;
  for (Index i = 0; i < p.rows(); ++i) {
    const RealVector mag = p.row(i).cwiseAbs2().transpose();
    Index j = 0;
    const double top = mag.maxCoeff(&j);
    const double total = mag.sum();
    const double dom = total > 0.0 ? top / total : 0.0;
    q.dominance.push_back(dom);
    q.argmax.push_back(j);
    q.min_dominance = std::min(q.min_dominance, dom);
    cols.insert(j);
  }
  q.distinct = cols.size() == q.argmax.size();
  q.success = q.distinct && q.min_dominance >= threshold;
  return q;
}

}  // namespace mepi
