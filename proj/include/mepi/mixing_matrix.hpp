#pragma once

#include <cmath>
#include <complex>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "mepi/errors.hpp"

namespace mepi {

using Index = Eigen::Index;
using cdouble = std::complex<double>;
using RealMatrix = Eigen::MatrixXd;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;
using ComplexVector = Eigen::VectorXcd;

template <class Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <class Scalar>
using RowVec = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

enum class Field { Real, Complex };

inline std::string_view to_string(Field f) { return f == Field::Real ? "real" : "complex"; }

inline Field parse_field(std::string_view s) {
  if (s == "real") return Field::Real;
  if (s == "complex") return Field::Complex;
  throw Error(ErrorCode::ParseError, "unknown field '" + std::string(s) + "'");
}

template <class Scalar>
constexpr Field field_of() {
  return std::is_same_v<Scalar, double> ? Field::Real : Field::Complex;
}

/// A real or complex m x n matrix. Real matrices keep a zero imaginary part.
class MixingMatrix {
 public:
  MixingMatrix() = default;

  explicit MixingMatrix(const RealMatrix& a) : field_(Field::Real), entries_(a.cast<cdouble>()) {
    validate();
  }

  explicit MixingMatrix(const ComplexMatrix& a) : field_(Field::Complex), entries_(a) { validate(); }

  Field field() const noexcept { return field_; }
  Index rows() const noexcept { return entries_.rows(); }
  Index cols() const noexcept { return entries_.cols(); }
  bool is_real() const noexcept { return field_ == Field::Real; }

  RealMatrix real() const {
    if (field_ != Field::Real)
      throw Error(ErrorCode::InvalidArgument, "complex matrix used where a real one is required");
    return entries_.real();
  }

  const ComplexMatrix& complex() const noexcept { return entries_; }

  friend bool operator==(const MixingMatrix& a, const MixingMatrix& b) {
    return a.field_ == b.field_ && a.entries_.rows() == b.entries_.rows() &&
           a.entries_.cols() == b.entries_.cols() && a.entries_ == b.entries_;
  }

 private:
  void validate() const {
    if (entries_.rows() < 1 || entries_.cols() < 1)
      throw Error(ErrorCode::InvalidArgument, "matrix must have at least one row and column");
    if (!entries_.allFinite()) throw Error(ErrorCode::InvalidArgument, "matrix entries must be finite");
  }

  Field field_ = Field::Real;
  ComplexMatrix entries_;
};

namespace detail {

/// log det of a Hermitian positive-definite matrix; returns false if not PD.
template <class Derived>
bool hermitian_logdet(const Eigen::MatrixBase<Derived>& m, double& out) {
  using Scalar = typename Derived::Scalar;
  Eigen::LLT<Mat<Scalar>> llt(m.derived());
  if (llt.info() != Eigen::Success) return false;
  double s = 0.0;
  const auto& l = llt.matrixLLT();
  for (Index i = 0; i < l.rows(); ++i) {
    const double d = std::real(l(i, i));
    if (!(d > 0.0)) return false;
    s += std::log(d);
  }
  out = 2.0 * s;
  return true;
}

template <class Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

}  // namespace detail

}  // namespace mepi
