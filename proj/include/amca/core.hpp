#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace amca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Rows are channels or sources, columns are samples.
using SignalMatrix = Matrix;
// Rows are channels or sources, columns are frame coefficients.
using CoefficientMatrix = Matrix;
using MixingMatrix = Matrix;
// One positive weight per coefficient column.
using WeightVector = Vector;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class SeparationFailure : public Error {
 public:
  using Error::Error;
};

class DegenerateMatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Relative singular-value cutoff used wherever a Gram or mixing matrix is
// inverted.
inline constexpr double kPinvTolerance = 1e-12;

/// Moore-Penrose pseudo-inverse. Singular values below
/// `rel_tol * sigma_max` are treated as zero.
inline Matrix pinv(const Matrix& a, double rel_tol = kPinvTolerance) {
  if (a.size() == 0) return Matrix::Zero(a.cols(), a.rows());
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  const double cutoff = rel_tol * (sv.size() > 0 ? sv(0) : 0.0);
  Vector inv = Vector::Zero(sv.size());
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > cutoff && sv(i) > 0.0) inv(i) = 1.0 / sv(i);
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

inline Eigen::Index numerical_rank(const Matrix& a, double rel_tol = 1e-10) {
  Eigen::JacobiSVD<Matrix> svd(a);
  const Vector& sv = svd.singularValues();
  if (sv.size() == 0 || sv(0) == 0.0) return 0;
  return (sv.array() > rel_tol * sv(0)).count();
}

/// Rescales every column of `a` to unit l2 norm and applies the inverse scale
/// to the matching row of `s`, leaving the product a*s unchanged. Zero columns
/// are left alone.
inline void normalize_columns(Matrix& a, Matrix& s) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double norm = a.col(j).norm();
    if (norm > 0.0) {
      a.col(j) /= norm;
      if (j < s.rows()) s.row(j) *= norm;
    }
  }
}

inline void normalize_columns(Matrix& a) {
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const double norm = a.col(j).norm();
    if (norm > 0.0) a.col(j) /= norm;
  }
}

}  // namespace amca
