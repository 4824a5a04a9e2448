#pragma once

// Structural analysis of mixing matrices: numerical rank, present/recoverable
// components, the canonical block form [[I_r, 0], [0, A_u]], row
// orthonormalization with orthogonal completion, and the log-det concavity gap.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "mepi/complex_embedding.hpp"
#include "mepi/errors.hpp"
#include "mepi/mixing_matrix.hpp"

namespace mepi {

/// Numerical rank with threshold max(m, n) * eps * sigma_max.
template <class Derived>
Index rank_of(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  if (a.size() == 0) return 0;
  Eigen::JacobiSVD<Mat<Scalar>> svd(a.derived());
  const auto& s = svd.singularValues();
  const double tol = static_cast<double>(std::max(a.rows(), a.cols())) *
                     std::numeric_limits<double>::epsilon() * s(0);
  Index r = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tol) ++r;
  return r;
}

inline Index rank_of(const MixingMatrix& a) {
  return a.is_real() ? rank_of(a.real()) : rank_of(a.complex());
}

/// Residual tolerance for recoverability tests, scaled by the Frobenius norm.
template <class Derived>
double recoverability_tolerance(const Eigen::MatrixBase<Derived>& a) {
  return 1e-8 * (1.0 + a.norm());
}

template <class Scalar>
struct ComponentClassification {
  std::vector<Index> present;      ///< 0-based indices of nonzero columns
  std::vector<Index> recoverable;  ///< subset of present
  std::map<Index, RowVec<Scalar>> witnesses;  ///< b_j with b_j * A = e_j
};

template <class Scalar>
struct CanonicalDecomposition {
  Mat<Scalar> B;                  ///< invertible m x m
  std::vector<Index> permutation;  ///< permutation[k] = original column placed at position k
  Index r = 0;
  Mat<Scalar> A_u;                ///< (m - r) x (n - r)

  /// Column permutation matrix P with (A P)(:, k) = A(:, permutation[k]).
  Mat<Scalar> permutation_matrix() const {
    const auto n = static_cast<Index>(permutation.size());
    Mat<Scalar> p = Mat<Scalar>::Zero(n, n);
    for (Index k = 0; k < n; ++k) p(permutation[static_cast<std::size_t>(k)], k) = Scalar(1);
    return p;
  }

  /// The block matrix [[I_r, 0], [0, A_u]].
  Mat<Scalar> block_form() const {
    const Index m = B.rows();
    const auto n = static_cast<Index>(permutation.size());
    Mat<Scalar> out = Mat<Scalar>::Zero(m, n);
    out.topLeftCorner(r, r).setIdentity();
    out.bottomRightCorner(m - r, n - r) = A_u;
    return out;
  }
};

template <class Scalar>
struct OrthonormalReduction {
  Mat<Scalar> L;   ///< m x m lower triangular, Q = L A
  Mat<Scalar> Q;   ///< m x n, orthonormal rows
  Mat<Scalar> Qc;  ///< (n - m) x n complement; empty unless requested
};

namespace detail {

template <class Derived>
void require_full_row_rank(const Eigen::MatrixBase<Derived>& a) {
  const Index r = rank_of(a);
  if (r < a.rows())
    throw Error(ErrorCode::RankDeficient, "matrix has rank " + std::to_string(r) + " < " +
                                              std::to_string(a.rows()) + " rows");
}

template <class Derived>
void require_orthonormal_rows(const Eigen::MatrixBase<Derived>& q, double tol) {
  using Scalar = typename Derived::Scalar;
  const Mat<Scalar> g = q * q.adjoint();
  const double dev = max_abs(g - Mat<Scalar>::Identity(q.rows(), q.rows()));
  if (!(dev <= tol))
    throw Error(ErrorCode::NotOrthonormal, "rows deviate from orthonormality by " + std::to_string(dev));
}

}  // namespace detail

template <class Scalar>
ComponentClassification<Scalar> classify_components(const Mat<Scalar>& a) {
  detail::require_full_row_rank(a);
  const Index n = a.cols();
  const double eps = recoverability_tolerance(a);

  ComponentClassification<Scalar> out;
  for (Index j = 0; j < n; ++j)
    if (a.col(j).cwiseAbs().maxCoeff() > eps) out.present.push_back(j);

  // Minimum-norm least squares for all unit vectors at once: A^t x_j = e_j, b_j = x_j^t.
  Eigen::CompleteOrthogonalDecomposition<Mat<Scalar>> cod(a.transpose());
  const Mat<Scalar> sol = cod.solve(Mat<Scalar>::Identity(n, n));  // m x n
  for (Index j : out.present) {
    RowVec<Scalar> b = sol.col(j).transpose();
    RowVec<Scalar> res = b * a;
    res(j) -= Scalar(1);
    if (res.cwiseAbs().maxCoeff() <= eps) {
      out.recoverable.push_back(j);
      out.witnesses.emplace(j, std::move(b));
    }
  }
  return out;
}

template <class Scalar>
CanonicalDecomposition<Scalar> canonical_form(const Mat<Scalar>& a) {
  detail::require_full_row_rank(a);
  const Index m = a.rows();
  const Index n = a.cols();
  const double eps = recoverability_tolerance(a);
  for (Index j = 0; j < n; ++j)
    if (a.col(j).cwiseAbs().maxCoeff() <= eps)
      throw Error(ErrorCode::ZeroColumn, "column " + std::to_string(j + 1) + " is zero");

  const auto cls = classify_components(a);
  const auto r = static_cast<Index>(cls.recoverable.size());

  CanonicalDecomposition<Scalar> out;
  out.r = r;
  std::vector<bool> is_rec(static_cast<std::size_t>(n), false);
  for (Index j : cls.recoverable) {
    is_rec[static_cast<std::size_t>(j)] = true;
    out.permutation.push_back(j);
  }
  std::vector<Index> tail;
  for (Index j = 0; j < n; ++j)
    if (!is_rec[static_cast<std::size_t>(j)]) tail.push_back(j);
  out.permutation.insert(out.permutation.end(), tail.begin(), tail.end());

  Mat<Scalar> witness(r, m);
  Mat<Scalar> a_rec(m, r);
  for (Index k = 0; k < r; ++k) {
    const Index j = cls.recoverable[static_cast<std::size_t>(k)];
    witness.row(k) = cls.witnesses.at(j);
    a_rec.col(k) = a.col(j);
  }

  // Rows of (I - A_R W) A vanish on the recoverable columns and span a space of
  // dimension m - r; pick m - r of them greedily in row order.
  const Mat<Scalar> proj = Mat<Scalar>::Identity(m, m) - a_rec * witness;
  Mat<Scalar> chosen(m - r, m);
  Mat<Scalar> basis(m - r, m);  // orthonormalized copy of the chosen rows
  Index count = 0;
  for (Index i = 0; i < m && count < m - r; ++i) {
    RowVec<Scalar> v = proj.row(i);
    for (Index k = 0; k < count; ++k) v -= basis.row(k).dot(v) * basis.row(k);
    const double norm = v.norm();
    if (norm <= eps) continue;
    chosen.row(count) = proj.row(i);
    basis.row(count) = v / norm;
    ++count;
  }
  if (count != m - r)
    throw Error(ErrorCode::RankDeficient, "could not complete canonical factor");

  out.B.resize(m, m);
  out.B.topRows(r) = witness;
  out.B.bottomRows(m - r) = chosen;
  const Mat<Scalar> ba = out.B * a;
  out.A_u.resize(m - r, n - r);
  for (Index k = 0; k < n - r; ++k) out.A_u.col(k) = ba.col(tail[static_cast<std::size_t>(k)]).tail(m - r);
  return out;
}

/// Orthonormalizes the rows of a full-row-rank matrix: Q = L A with L lower
/// triangular with positive real diagonal (the Gram-Schmidt factor).
template <class Scalar>
OrthonormalReduction<Scalar> gram_schmidt_rows(const Mat<Scalar>& a) {
  detail::require_full_row_rank(a);
  const Index m = a.rows();
  // A^H = Q_t R  =>  A = R^H Q_t^H; normalize so diag(R) > 0.
  Eigen::HouseholderQR<Mat<Scalar>> qr(a.adjoint());
  Mat<Scalar> qt = qr.householderQ() * Mat<Scalar>::Identity(a.cols(), m);
  Mat<Scalar> r = qr.matrixQR().topRows(m).template triangularView<Eigen::Upper>();
  for (Index i = 0; i < m; ++i) {
    const double mag = std::abs(r(i, i));
    const Scalar phase = r(i, i) / mag;
    r.row(i) *= Eigen::numext::conj(phase);
    qt.col(i) *= phase;
  }
  OrthonormalReduction<Scalar> out;
  out.Q = qt.adjoint();
  const Mat<Scalar> rh = r.adjoint();
  out.L = rh.template triangularView<Eigen::Lower>().solve(Mat<Scalar>::Identity(m, m));
  return out;
}

/// Rows completing Q to a square orthogonal (unitary) matrix.
template <class Scalar>
Mat<Scalar> orthogonal_complement(const Mat<Scalar>& q) {
  const Index m = q.rows();
  const Index n = q.cols();
  if (m >= n) throw Error(ErrorCode::AlreadySquare, "no complement for an m >= n matrix");
  detail::require_orthonormal_rows(q, 1e-8);
  Eigen::HouseholderQR<Mat<Scalar>> qr(q.adjoint());
  const Mat<Scalar> full = qr.householderQ();
  return full.rightCols(n - m).adjoint();
}

/// log|Q diag(lambda) Q^H| - tr(Q [log lambda] Q^H) for Q with orthonormal rows; never negative.
template <class Scalar>
double log_concavity_gap(const Mat<Scalar>& q, std::span<const double> lambda) {
  if (static_cast<Index>(lambda.size()) != q.cols())
    throw Error(ErrorCode::InvalidArgument, "lambda length must equal the number of columns");
  detail::require_orthonormal_rows(q, 1e-8);
  for (double l : lambda)
    if (!(l > 0.0)) throw Error(ErrorCode::NonPositiveLambda, "lambda entries must be positive");

  const Eigen::Map<const RealVector> lam(lambda.data(), static_cast<Index>(lambda.size()));
  const Mat<Scalar> m = q * lam.cast<Scalar>().asDiagonal() * q.adjoint();
  double logdet = 0.0;
  if (!detail::hermitian_logdet(m, logdet))
    throw Error(ErrorCode::NotSpd, "Q Lambda Q^H is not positive definite");
  const RealVector weights = q.cwiseAbs2().colwise().sum().transpose();
  return logdet - weights.dot(lam.array().log().matrix());
}

/// Block-diagonal variant on the real embedding: Lambda = diag(lambda_1, ..., lambda_n)
/// with SPD 2x2 blocks and Qhat the hat embedding of a complex matrix with orthonormal rows.
inline double log_concavity_gap_blocks(const RealMatrix& qhat, std::span<const Eigen::Matrix2d> blocks) {
  const ComplexMatrix q = unhat(qhat);  // BadBlockStructure on violation
  const Index n = q.cols();
  if (static_cast<Index>(blocks.size()) != n)
    throw Error(ErrorCode::BadBlockStructure, "expected " + std::to_string(n) + " 2x2 blocks, got " +
                                                  std::to_string(blocks.size()));
  detail::require_orthonormal_rows(qhat, 1e-8);

  RealMatrix lam = RealMatrix::Zero(2 * n, 2 * n);
  RealVector logdets(n);
  for (Index j = 0; j < n; ++j) {
    const auto& b = blocks[static_cast<std::size_t>(j)];
    if (std::abs(b(0, 1) - b(1, 0)) > 1e-10)
      throw Error(ErrorCode::NotSpd, "block " + std::to_string(j + 1) + " is not symmetric");
    const double det = b(0, 0) * b(1, 1) - b(0, 1) * b(1, 0);
    if (!(b(0, 0) > 0.0) || !(det > 0.0))
      throw Error(ErrorCode::NotSpd, "block " + std::to_string(j + 1) + " is not positive definite");
    lam.block<2, 2>(2 * j, 2 * j) = b;
    logdets(j) = std::log(det);
  }
  double logdet = 0.0;
  if (!detail::hermitian_logdet(RealMatrix(qhat * lam * qhat.transpose()), logdet))
    throw Error(ErrorCode::NotSpd, "Qhat Lambda Qhat^t is not positive definite");
  // Diagonal blocks of Qhat^t Qhat are c_j I_2 with c_j = sum_i |Q_ij|^2, so
  // tr(Qhat [log Lambda] Qhat^t) = sum_j c_j log|lambda_j|.
  const RealVector weights = q.cwiseAbs2().colwise().sum().transpose();
  return logdet - weights.dot(logdets);
}

}  // namespace mepi
