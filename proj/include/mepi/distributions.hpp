#pragma once

// Source models with closed-form entropies, seeded sampling, entropy
// normalization and monotone transport maps from the standard normal.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "mepi/errors.hpp"
#include "mepi/mixing_matrix.hpp"
#include "mepi/rng.hpp"

namespace mepi {

namespace dist {

struct Gaussian {
  double mean = 0.0;
  double sigma = 1.0;
  friend bool operator==(const Gaussian&, const Gaussian&) = default;
};
struct Uniform {
  double low = 0.0;
  double high = 1.0;
  friend bool operator==(const Uniform&, const Uniform&) = default;
};
struct Laplace {
  double mean = 0.0;
  double scale = 1.0;
  friend bool operator==(const Laplace&, const Laplace&) = default;
};
/// Support [0, inf); not centered. Used for estimator calibration only.
struct Exponential {
  double rate = 1.0;
  friend bool operator==(const Exponential&, const Exponential&) = default;
};
struct GaussianMixture2 {
  double weight = 0.5;  ///< weight of the first component
  double mean1 = -1.0;
  double sigma1 = 0.5;
  double mean2 = 1.0;
  double sigma2 = 0.5;
  friend bool operator==(const GaussianMixture2&, const GaussianMixture2&) = default;
};
/// Circularly symmetric complex normal CN(0, sigma^2): E|X|^2 = sigma^2.
struct ComplexCircularGaussian {
  double sigma = 1.0;
  friend bool operator==(const ComplexCircularGaussian&, const ComplexCircularGaussian&) = default;
};
struct ComplexUniformDisk {
  double radius = 1.0;
  friend bool operator==(const ComplexUniformDisk&, const ComplexUniformDisk&) = default;
};

}  // namespace dist

class SourceModel {
 public:
  using Params = std::variant<dist::Gaussian, dist::Uniform, dist::Laplace, dist::Exponential,
                              dist::GaussianMixture2, dist::ComplexCircularGaussian, dist::ComplexUniformDisk>;

  SourceModel() = default;
  template <class P>
    requires std::is_constructible_v<Params, P>
  SourceModel(P p) : params_(std::move(p)) {  // NOLINT(google-explicit-constructor)
    validate();
  }

  static SourceModel gaussian(double sigma, double mean = 0.0) { return dist::Gaussian{mean, sigma}; }
  static SourceModel uniform(double low, double high) { return dist::Uniform{low, high}; }
  /// Zero-mean uniform with the given variance.
  static SourceModel uniform_with_variance(double var) {
    const double half = std::sqrt(3.0 * var);
    return dist::Uniform{-half, half};
  }
  static SourceModel laplace(double scale, double mean = 0.0) { return dist::Laplace{mean, scale}; }
  static SourceModel exponential(double rate) { return dist::Exponential{rate}; }
  static SourceModel complex_gaussian(double sigma) { return dist::ComplexCircularGaussian{sigma}; }
  static SourceModel complex_disk(double radius) { return dist::ComplexUniformDisk{radius}; }

  const Params& params() const noexcept { return params_; }

  Field field() const noexcept {
    return std::holds_alternative<dist::ComplexCircularGaussian>(params_) ||
                   std::holds_alternative<dist::ComplexUniformDisk>(params_)
               ? Field::Complex
               : Field::Real;
  }

  std::string_view family() const noexcept {
    constexpr std::string_view names[] = {"gaussian",    "uniform",           "laplace",
                                          "exponential", "gaussian_mixture_2", "complex_circular_gaussian",
                                          "complex_uniform_disk"};
    return names[params_.index()];
  }

  bool is_gaussian() const noexcept {
    return std::holds_alternative<dist::Gaussian>(params_) ||
           std::holds_alternative<dist::ComplexCircularGaussian>(params_);
  }

  /// Law of c * X for c > 0.
  SourceModel scaled(double c) const {
    if (!(c > 0.0) || !std::isfinite(c)) throw Error(ErrorCode::InvalidArgument, "scale factor must be positive");
    return std::visit(
        [c](auto p) -> SourceModel {
          using T = decltype(p);
          if constexpr (std::is_same_v<T, dist::Gaussian>) return dist::Gaussian{p.mean * c, p.sigma * c};
          if constexpr (std::is_same_v<T, dist::Uniform>) return dist::Uniform{p.low * c, p.high * c};
          if constexpr (std::is_same_v<T, dist::Laplace>) return dist::Laplace{p.mean * c, p.scale * c};
          if constexpr (std::is_same_v<T, dist::Exponential>) return dist::Exponential{p.rate / c};
          if constexpr (std::is_same_v<T, dist::GaussianMixture2>)
            return dist::GaussianMixture2{p.weight, p.mean1 * c, p.sigma1 * c, p.mean2 * c, p.sigma2 * c};
          if constexpr (std::is_same_v<T, dist::ComplexCircularGaussian>)
            return dist::ComplexCircularGaussian{p.sigma * c};
          if constexpr (std::is_same_v<T, dist::ComplexUniformDisk>) return dist::ComplexUniformDisk{p.radius * c};
        },
        params_);
  }

  /// Variance (E|X - EX|^2 for complex families).
  double variance() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, dist::Gaussian>) return p.sigma * p.sigma;
          if constexpr (std::is_same_v<T, dist::Uniform>) return (p.high - p.low) * (p.high - p.low) / 12.0;
          if constexpr (std::is_same_v<T, dist::Laplace>) return 2.0 * p.scale * p.scale;
          if constexpr (std::is_same_v<T, dist::Exponential>) return 1.0 / (p.rate * p.rate);
          if constexpr (std::is_same_v<T, dist::GaussianMixture2>) {
            const double w = p.weight;
            const double mu = w * p.mean1 + (1 - w) * p.mean2;
            return w * (p.sigma1 * p.sigma1 + p.mean1 * p.mean1) +
                   (1 - w) * (p.sigma2 * p.sigma2 + p.mean2 * p.mean2) - mu * mu;
          }
          if constexpr (std::is_same_v<T, dist::ComplexCircularGaussian>) return p.sigma * p.sigma;
          if constexpr (std::is_same_v<T, dist::ComplexUniformDisk>) return 0.5 * p.radius * p.radius;
        },
        params_);
  }

  double mean() const {
    return std::visit(
        [](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, dist::Gaussian> || std::is_same_v<T, dist::Laplace>) return p.mean;
          if constexpr (std::is_same_v<T, dist::Uniform>) return 0.5 * (p.low + p.high);
          if constexpr (std::is_same_v<T, dist::Exponential>) return 1.0 / p.rate;
          if constexpr (std::is_same_v<T, dist::GaussianMixture2>)
            return p.weight * p.mean1 + (1 - p.weight) * p.mean2;
          return 0.0;
        },
        params_);
  }

  friend bool operator==(const SourceModel& a, const SourceModel& b) { return a.params_ == b.params_; }

 private:
  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0) || !std::isfinite(v))
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be positive and finite");
    };
    auto finite = [](double v, const char* what) {
      if (!std::isfinite(v)) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be finite");
    };
    std::visit(
        [&](const auto& p) {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, dist::Gaussian>) {
            finite(p.mean, "mean");
            positive(p.sigma, "sigma");
          } else if constexpr (std::is_same_v<T, dist::Uniform>) {
            finite(p.low, "low");
            finite(p.high, "high");
            positive(p.high - p.low, "width");
          } else if constexpr (std::is_same_v<T, dist::Laplace>) {
            finite(p.mean, "mean");
            positive(p.scale, "scale");
          } else if constexpr (std::is_same_v<T, dist::Exponential>) {
            positive(p.rate, "rate");
          } else if constexpr (std::is_same_v<T, dist::GaussianMixture2>) {
            if (!(p.weight > 0.0 && p.weight < 1.0))
              throw Error(ErrorCode::InvalidArgument, "mixture weight must lie in (0, 1)");
            finite(p.mean1, "mean1");
            finite(p.mean2, "mean2");
            positive(p.sigma1, "sigma1");
            positive(p.sigma2, "sigma2");
          } else if constexpr (std::is_same_v<T, dist::ComplexCircularGaussian>) {
            positive(p.sigma, "sigma");
          } else {
            positive(p.radius, "radius");
          }
        },
        params_);
  }

  Params params_ = dist::Gaussian{};
};

namespace detail {

inline constexpr double kInvSqrt2 = 0.70710678118654752440;

/// Standard normal CDF Phi(x).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }
inline double normal_log_pdf(double x) { return -0.5 * x * x - 0.5 * std::log(2.0 * std::numbers::pi); }
inline double normal_pdf(double x) { return std::exp(normal_log_pdf(x)); }

inline double mixture_log_pdf(const dist::GaussianMixture2& p, double x) {
  const double z1 = (x - p.mean1) / p.sigma1;
  const double z2 = (x - p.mean2) / p.sigma2;
  const double a = std::log(p.weight / p.sigma1) + normal_log_pdf(z1);
  const double b = std::log((1.0 - p.weight) / p.sigma2) + normal_log_pdf(z2);
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

inline double mixture_cdf(const dist::GaussianMixture2& p, double x) {
  return p.weight * normal_cdf((x - p.mean1) / p.sigma1) + (1 - p.weight) * normal_cdf((x - p.mean2) / p.sigma2);
}

inline double mixture_survival(const dist::GaussianMixture2& p, double x) {
  return p.weight * normal_cdf(-(x - p.mean1) / p.sigma1) + (1 - p.weight) * normal_cdf(-(x - p.mean2) / p.sigma2);
}

/// -integral f log f for a two-component Gaussian mixture, adaptive Gauss-Kronrod to 1e-10.
inline double mixture_entropy(const dist::GaussianMixture2& p) {
  using boost::math::quadrature::gauss_kronrod;
  auto integrand = [&](double x) {
    const double lf = mixture_log_pdf(p, x);
    return lf < -745.0 ? 0.0 : -std::exp(lf) * lf;
  };
  const double lo = std::min(p.mean1 - 40.0 * p.sigma1, p.mean2 - 40.0 * p.sigma2);
  const double hi = std::max(p.mean1 + 40.0 * p.sigma1, p.mean2 + 40.0 * p.sigma2);
  std::vector<double> cuts{lo, std::min(p.mean1, p.mean2), std::max(p.mean1, p.mean2), hi};
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
    if (cuts[i + 1] <= cuts[i]) continue;
    total += gauss_kronrod<double, 31>::integrate(integrand, cuts[i], cuts[i + 1], 20, 1e-13);
  }
  return total;
}

}  // namespace detail

/// Differential entropy in nats. The two-component mixture uses quadrature.
inline double exact_entropy(const SourceModel& model) {
  constexpr double pi = std::numbers::pi;
  constexpr double e = std::numbers::e;
  return std::visit(
      [](const auto& p) -> double {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, dist::Gaussian>) return 0.5 * std::log(2.0 * pi * e * p.sigma * p.sigma);
        if constexpr (std::is_same_v<T, dist::Uniform>) return std::log(p.high - p.low);
        if constexpr (std::is_same_v<T, dist::Laplace>) return 1.0 + std::log(2.0 * p.scale);
        if constexpr (std::is_same_v<T, dist::Exponential>) return 1.0 - std::log(p.rate);
        if constexpr (std::is_same_v<T, dist::GaussianMixture2>) return detail::mixture_entropy(p);
        if constexpr (std::is_same_v<T, dist::ComplexCircularGaussian>) return std::log(pi * e * p.sigma * p.sigma);
        if constexpr (std::is_same_v<T, dist::ComplexUniformDisk>) return std::log(pi * p.radius * p.radius);
      },
      model.params());
}

/// One draw, returned as a complex number (imaginary part zero for real families).
inline cdouble draw(const SourceModel& model, CounterRng& rng) {
  return std::visit(
      [&rng](const auto& p) -> cdouble {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, dist::Gaussian>) return p.mean + p.sigma * rng.normal();
        if constexpr (std::is_same_v<T, dist::Uniform>) return rng.uniform(p.low, p.high);
        if constexpr (std::is_same_v<T, dist::Laplace>) {
          const double u = rng.uniform() - 0.5;
          return p.mean - p.scale * std::copysign(std::log1p(-2.0 * std::abs(u)), u);
        }
        if constexpr (std::is_same_v<T, dist::Exponential>) return -std::log(rng.uniform()) / p.rate;
        if constexpr (std::is_same_v<T, dist::GaussianMixture2>) {
          const bool first = rng.uniform() < p.weight;
          const double z = rng.normal();
          return first ? p.mean1 + p.sigma1 * z : p.mean2 + p.sigma2 * z;
        }
        if constexpr (std::is_same_v<T, dist::ComplexCircularGaussian>) {
          const double s = p.sigma * detail::kInvSqrt2;
          const double re = rng.normal();
          const double im = rng.normal();
          return {s * re, s * im};
        }
        if constexpr (std::is_same_v<T, dist::ComplexUniformDisk>) {
          const double r = p.radius * std::sqrt(rng.uniform());
          const double a = 2.0 * std::numbers::pi * rng.uniform();
          return std::polar(r, a);
        }
      },
      model.params());
}

/// N draws as an N x d array (d = 1 for real families, 2 = (re, im) for complex ones).
inline RealMatrix sample(const SourceModel& model, std::size_t n, std::uint64_t seed, std::uint64_t stream = 0) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
  CounterRng rng(seed, stream);
  const bool cplx = model.field() == Field::Complex;
  RealMatrix out(static_cast<Index>(n), cplx ? 2 : 1);
  for (Index i = 0; i < out.rows(); ++i) {
    const cdouble z = draw(model, rng);
    out(i, 0) = z.real();
    if (cplx) out(i, 1) = z.imag();
  }
  return out;
}

/// Independent sources stacked as an n_sources x N matrix; source j uses stream j.
template <class Scalar>
Mat<Scalar> sample_sources(std::span<const SourceModel> models, std::size_t n, std::uint64_t seed) {
  Mat<Scalar> x(static_cast<Index>(models.size()), static_cast<Index>(n));
  for (Index j = 0; j < x.rows(); ++j) {
    const auto& model = models[static_cast<std::size_t>(j)];
    if constexpr (std::is_same_v<Scalar, double>) {
      if (model.field() != Field::Real)
        throw Error(ErrorCode::UnsupportedFamily, "complex source in a real mixture");
    }
    CounterRng rng(seed, static_cast<std::uint64_t>(j));
    for (Index i = 0; i < x.cols(); ++i) {
      const cdouble z = draw(model, rng);
      if constexpr (std::is_same_v<Scalar, double>)
        x(j, i) = z.real();
      else
        x(j, i) = z;
    }
  }
  return x;
}

struct DiagonalScaling {
  std::vector<double> deltas;  ///< X_j is replaced by X_j / delta_j
};

struct NormalizedSources {
  std::vector<SourceModel> models;
  DiagonalScaling scaling;
};

/// Rescales every source to entropy 0 nats with delta_j = exp h(X_j) (or exp(h/2)
/// for complex sources, where h(aX) = h(X) + 2 ln|a|).
inline NormalizedSources normalize_entropies(std::span<const SourceModel> models) {
  NormalizedSources out;
  for (const auto& m : models) {
    const double h = exact_entropy(m);
    if (!std::isfinite(h)) throw Error(ErrorCode::InvalidArgument, "source entropy is not finite");
    const double delta = m.field() == Field::Real ? std::exp(h) : std::exp(0.5 * h);
    out.scaling.deltas.push_back(delta);
    out.models.push_back(m.scaled(1.0 / delta));
  }
  return out;
}

/// Monotone map T = F^{-1} o Phi pushing N(0, 1) onto a real scalar target.
class TransportMap1D {
 public:
  explicit TransportMap1D(SourceModel target) : target_(std::move(target)) {
    if (target_.field() != Field::Real)
      throw Error(ErrorCode::UnsupportedFamily, "quantile transport needs a real scalar target");
  }

  const SourceModel& target() const noexcept { return target_; }

  double operator()(double x) const {
    // Work from whichever tail keeps the probability accurate.
    const bool lower = x <= 0.0;
    const double tail = detail::normal_cdf(lower ? x : -x);
    return std::visit(
        [&](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, dist::Gaussian>) return p.mean + p.sigma * x;
          if constexpr (std::is_same_v<T, dist::Uniform>)
            return lower ? p.low + (p.high - p.low) * tail : p.high - (p.high - p.low) * tail;
          if constexpr (std::is_same_v<T, dist::Laplace>)
            return lower ? p.mean + p.scale * std::log(2.0 * tail) : p.mean - p.scale * std::log(2.0 * tail);
          if constexpr (std::is_same_v<T, dist::Exponential>)
            return lower ? -std::log1p(-tail) / p.rate : -std::log(tail) / p.rate;
          if constexpr (std::is_same_v<T, dist::GaussianMixture2>) return mixture_quantile(p, tail, lower);
          return std::numeric_limits<double>::quiet_NaN();
        },
        target_.params());
  }

  /// log T'(x) = log phi(x) - log f(T(x)).
  double log_derivative(double x) const {
    const bool lower = x <= 0.0;
    const double tail = detail::normal_cdf(lower ? x : -x);
    const double lphi = detail::normal_log_pdf(x);
    return std::visit(
        [&](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, dist::Gaussian>) return std::log(p.sigma);
          if constexpr (std::is_same_v<T, dist::Uniform>) return lphi + std::log(p.high - p.low);
          // Laplace density at its own quantile equals min(F, 1-F) / b.
          if constexpr (std::is_same_v<T, dist::Laplace>) return lphi - std::log(tail / p.scale);
          // Exponential density at the quantile equals rate * (1 - F).
          if constexpr (std::is_same_v<T, dist::Exponential>)
            return lphi - std::log(p.rate * (lower ? 1.0 - tail : tail));
          if constexpr (std::is_same_v<T, dist::GaussianMixture2>)
            return lphi - detail::mixture_log_pdf(p, mixture_quantile(p, tail, lower));
          return std::numeric_limits<double>::quiet_NaN();
        },
        target_.params());
  }

  double derivative(double x) const { return std::exp(log_derivative(x)); }

 private:
  static double mixture_quantile(const dist::GaussianMixture2& p, double tail, bool lower) {
    const double lo_edge = std::min(p.mean1 - 40.0 * p.sigma1, p.mean2 - 40.0 * p.sigma2);
    const double hi_edge = std::max(p.mean1 + 40.0 * p.sigma1, p.mean2 + 40.0 * p.sigma2);
    auto fn = [&](double y) {
      return lower ? detail::mixture_cdf(p, y) - tail : tail - detail::mixture_survival(p, y);
    };
    std::uintmax_t iters = 200;
    auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-12; };
    const auto r = boost::math::tools::toms748_solve(fn, lo_edge, hi_edge, tol, iters);
    return 0.5 * (r.first + r.second);
  }

  SourceModel target_;
};

inline TransportMap1D quantile_transport(const SourceModel& target) { return TransportMap1D(target); }

/// Radial map T(x) = g(|x|) x / |x| pushing N(0, I_2) onto a circularly symmetric target.
class RadialTransportMap2D {
 public:
  explicit RadialTransportMap2D(SourceModel target) : target_(std::move(target)) {
    if (!std::holds_alternative<dist::ComplexCircularGaussian>(target_.params()) &&
        !std::holds_alternative<dist::ComplexUniformDisk>(target_.params()))
      throw Error(ErrorCode::NotCircular, "radial transport needs a circularly symmetric complex target");
  }

  const SourceModel& target() const noexcept { return target_; }

  /// Radial profile g(r), chosen so that F_target_radius(g(r)) = 1 - exp(-r^2 / 2).
  double g(double r) const {
    if (const auto* p = std::get_if<dist::ComplexCircularGaussian>(&target_.params()))
      return p->sigma * detail::kInvSqrt2 * r;
    const double radius = std::get<dist::ComplexUniformDisk>(target_.params()).radius;
    return radius * std::sqrt(-std::expm1(-0.5 * r * r));
  }

  double g_prime(double r) const {
    if (const auto* p = std::get_if<dist::ComplexCircularGaussian>(&target_.params()))
      return p->sigma * detail::kInvSqrt2;
    const double radius = std::get<dist::ComplexUniformDisk>(target_.params()).radius;
    const double s = -std::expm1(-0.5 * r * r);
    if (s <= 0.0) return radius * detail::kInvSqrt2;
    return radius * r * std::exp(-0.5 * r * r) / (2.0 * std::sqrt(s));
  }

  /// g(r) / r, continuous at r = 0.
  double g_over_r(double r) const {
    if (r < 1e-8) return g_prime(0.0);
    return g(r) / r;
  }

  Eigen::Vector2d operator()(const Eigen::Vector2d& x) const { return g_over_r(x.norm()) * x; }

  /// Jacobian g'(r) u u^t + (g(r)/r) (I - u u^t) with u = x / |x|.
  Eigen::Matrix2d jacobian(const Eigen::Vector2d& x) const {
    const double r = x.norm();
    if (r < 1e-8) return g_prime(0.0) * Eigen::Matrix2d::Identity();
    const Eigen::Vector2d u = x / r;
    const Eigen::Matrix2d uu = u * u.transpose();
    return g_prime(r) * uu + g_over_r(r) * (Eigen::Matrix2d::Identity() - uu);
  }

  /// CDF of |X| under the target.
  double target_radius_cdf(double rho) const {
    if (rho <= 0.0) return 0.0;
    if (const auto* p = std::get_if<dist::ComplexCircularGaussian>(&target_.params()))
      return -std::expm1(-rho * rho / (p->sigma * p->sigma));
    const double radius = std::get<dist::ComplexUniformDisk>(target_.params()).radius;
    return std::min(1.0, (rho / radius) * (rho / radius));
  }

 private:
  SourceModel target_;
};

inline RadialTransportMap2D radial_transport(const SourceModel& target) { return RadialTransportMap2D(target); }

/// Monte Carlo estimate of E log T'(X*) with X* ~ N(0, 1).
inline double transport_log_derivative_expectation(const TransportMap1D& map, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "sample count must be at least 1");
  CounterRng rng(seed);
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += map.log_derivative(rng.normal());
  return acc / static_cast<double>(n);
}

}  // namespace mepi
