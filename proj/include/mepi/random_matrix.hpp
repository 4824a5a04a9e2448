#pragma once

#include <cmath>
#include <complex>

#include <Eigen/Dense>

#include "mepi/distributions.hpp"
#include "mepi/mixing_matrix.hpp"
#include "mepi/rng.hpp"

namespace mepi {

template <class Scalar>
Scalar random_normal_scalar(CounterRng& rng) {
  if constexpr (std::is_same_v<Scalar, double>) {
    return rng.normal();
  } else {
    const double re = rng.normal();
    const double im = rng.normal();
    return Scalar(re, im) * detail::kInvSqrt2;
  }
}

template <class Scalar>
Mat<Scalar> gaussian_matrix(Index rows, Index cols, CounterRng& rng) {
  Mat<Scalar> a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) a(i, j) = random_normal_scalar<Scalar>(rng);
  return a;
}

template <class Scalar>
Mat<Scalar> uniform_matrix(Index rows, Index cols, double lo, double hi, CounterRng& rng) {
  Mat<Scalar> a(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) {
      if constexpr (std::is_same_v<Scalar, double>) {
        a(i, j) = rng.uniform(lo, hi);
      } else {
        const double re = rng.uniform(lo, hi);
        const double im = rng.uniform(lo, hi);
        a(i, j) = Scalar(re, im);
      }
    }
  return a;
}

/// Haar-distributed orthogonal (unitary) n x n matrix: QR of a Gaussian matrix
/// with the phases of diag(R) absorbed into Q.
template <class Scalar>
Mat<Scalar> haar_unitary(Index n, CounterRng& rng) {
  const Mat<Scalar> g = gaussian_matrix<Scalar>(n, n, rng);
  Eigen::HouseholderQR<Mat<Scalar>> qr(g);
  Mat<Scalar> q = qr.householderQ();
  const auto& r = qr.matrixQR();
  for (Index i = 0; i < n; ++i) {
    const double mag = std::abs(r(i, i));
    if (mag > 0.0) q.col(i) *= r(i, i) / mag;
  }
  return q;
}

/// First m rows of a Haar unitary: uniformly distributed orthonormal rows.
template <class Scalar>
Mat<Scalar> haar_orthonormal_rows(Index m, Index n, CounterRng& rng) {
  return haar_unitary<Scalar>(n, rng).topRows(m);
}

}  // namespace mepi
