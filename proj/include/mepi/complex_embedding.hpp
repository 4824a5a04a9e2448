#pragma once

// Real 2x2-block embedding of complex scalars, vectors and matrices:
//   a  ->  [[Re a, -Im a], [Im a, Re a]]
// Vectors are embedded as interleaved (Re x_1, Im x_1, Re x_2, Im x_2, ...), so
// hat(A x) = hat(A) hat(x), hat(A B) = hat(A) hat(B), hat(A^H) = hat(A)^t and
// det hat(A) = |det A|^2.

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "mepi/errors.hpp"
#include "mepi/mixing_matrix.hpp"

namespace mepi {

inline Eigen::Matrix2d hat(cdouble a) {
  Eigen::Matrix2d m;
  m << a.real(), -a.imag(), a.imag(), a.real();
  return m;
}

inline RealMatrix hat_embed(const ComplexMatrix& a) {
  RealMatrix out(2 * a.rows(), 2 * a.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j) out.block<2, 2>(2 * i, 2 * j) = hat(a(i, j));
  return out;
}

inline RealVector hat_embed_vector(const ComplexVector& x) {
  RealVector out(2 * x.size());
  for (Index i = 0; i < x.size(); ++i) {
    out(2 * i) = x(i).real();
    out(2 * i + 1) = x(i).imag();
  }
  return out;
}

/// Inverse of hat_embed. Each 2x2 block must match [[a, -b], [b, a]] within tol.
inline ComplexMatrix unhat(const RealMatrix& m, double tol = 1e-10) {
  if (m.rows() % 2 != 0 || m.cols() % 2 != 0)
    throw Error(ErrorCode::BadBlockStructure, "dimensions must be even");
  ComplexMatrix out(m.rows() / 2, m.cols() / 2);
  for (Index i = 0; i < out.rows(); ++i) {
    for (Index j = 0; j < out.cols(); ++j) {
      const auto b = m.block<2, 2>(2 * i, 2 * j);
      if (std::abs(b(0, 0) - b(1, 1)) > tol || std::abs(b(0, 1) + b(1, 0)) > tol)
        throw Error(ErrorCode::BadBlockStructure,
                    "block (" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ") is not of the form [[a,-b],[b,a]]");
      out(i, j) = cdouble(b(0, 0), b(1, 0));
    }
  }
  return out;
}

/// lambda = R(theta) diag(d1, d2) R(theta)^t with d1 >= d2 > 0 and theta in (-pi/2, pi/2].
struct BlockPolar {
  double theta = 0.0;
  double d1 = 1.0;
  double d2 = 1.0;

  Eigen::Matrix2d rotation() const {
    const double c = std::cos(theta), s = std::sin(theta);
    Eigen::Matrix2d r;
    r << c, -s, s, c;
    return r;
  }

  Eigen::Matrix2d reconstruct() const {
    const Eigen::Matrix2d r = rotation();
    return r * Eigen::Vector2d(d1, d2).asDiagonal() * r.transpose();
  }
};

inline BlockPolar block_polar(const Eigen::Matrix2d& lambda) {
  const double a = lambda(0, 0), b = lambda(0, 1), c = lambda(1, 1);
  if (std::abs(b - lambda(1, 0)) > 1e-10) throw Error(ErrorCode::NotSpd, "block is not symmetric");
  const double det = a * c - b * b;
  if (!(a > 0.0) || !(det > 0.0)) throw Error(ErrorCode::NotSpd, "block is not positive definite");

  BlockPolar out;
  const double half_diff = 0.5 * (a - c);
  const double radius = std::hypot(half_diff, b);
  out.d1 = 0.5 * (a + c) + radius;
  out.d2 = det / out.d1;
  if (radius == 0.0) {
    out.theta = 0.0;
  } else {
    out.theta = 0.5 * std::atan2(2.0 * b, a - c);  // in (-pi/2, pi/2]
    if (out.theta <= -std::numbers::pi / 2) out.theta += std::numbers::pi;
  }
  return out;
}

}  // namespace mepi
