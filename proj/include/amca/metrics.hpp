#pragma once

#include "amca/core.hpp"
#include "amca/result.hpp"
#include "amca/spcgen.hpp"

#include <limits>
#include <numeric>
#include <vector>

namespace amca {

inline constexpr double kSdrCapDb = 300.0;

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// O(n^3)). Returns row_for_col, where row_for_col[j] is the row assigned to
/// column j.
inline std::vector<Eigen::Index> solve_assignment(const Matrix& cost) {
  const Eigen::Index n = cost.rows();
  if (cost.cols() != n) throw InvalidArgument("assignment cost matrix must be square");
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is a virtual start.
  std::vector<double> u(static_cast<std::size_t>(n + 1), 0.0), v(u);
  std::vector<Eigen::Index> row_of(static_cast<std::size_t>(n + 1), 0);
  std::vector<Eigen::Index> way(static_cast<std::size_t>(n + 1), 0);
  for (Eigen::Index i = 1; i <= n; ++i) {
    row_of[0] = i;
    Eigen::Index col = 0;
    std::vector<double> minv(static_cast<std::size_t>(n + 1), inf);
    std::vector<char> used(static_cast<std::size_t>(n + 1), 0);
    do {
      used[static_cast<std::size_t>(col)] = 1;
      const Eigen::Index row = row_of[static_cast<std::size_t>(col)];
      double delta = inf;
      Eigen::Index next = 0;
      for (Eigen::Index j = 1; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) continue;
        const double reduced =
            cost(row - 1, j - 1) - u[static_cast<std::size_t>(row)] - v[uj];
        if (reduced < minv[uj]) {
          minv[uj] = reduced;
          way[uj] = col;
        }
        if (minv[uj] < delta) {
          delta = minv[uj];
          next = j;
        }
      }
      for (Eigen::Index j = 0; j <= n; ++j) {
        const auto uj = static_cast<std::size_t>(j);
        if (used[uj]) {
          u[static_cast<std::size_t>(row_of[uj])] += delta;
          v[uj] -= delta;
        } else {
          minv[uj] -= delta;
        }
      }
      col = next;
    } while (row_of[static_cast<std::size_t>(col)] != 0);
    do {
      const Eigen::Index prev = way[static_cast<std::size_t>(col)];
      row_of[static_cast<std::size_t>(col)] = row_of[static_cast<std::size_t>(prev)];
      col = prev;
    } while (col != 0);
  }
  std::vector<Eigen::Index> row_for_col(static_cast<std::size_t>(n));
  for (Eigen::Index j = 1; j <= n; ++j) {
    row_for_col[static_cast<std::size_t>(j - 1)] = row_of[static_cast<std::size_t>(j)] - 1;
  }
  return row_for_col;
}

struct MatchResult {
  // permutation[j] is the estimated source index matched to true source j.
  std::vector<Eigen::Index> permutation;
  // scales[j] multiplies row permutation[j] of pinv(A_est) * A_true.
  std::vector<double> scales;
  Matrix corrected_product;  // unit diagonal
};

/// Resolves the permutation and scale indeterminacies of A_est against
/// A_true. The matching maximizes sum_j |M(perm[j], j)| with
/// M = pinv(A_est) * A_true.
inline MatchResult match_and_scale(const MixingMatrix& a_est, const MixingMatrix& a_true) {
  if (a_est.rows() != a_true.rows() || a_est.cols() != a_true.cols()) {
    throw InvalidArgument("mixing matrices must have the same shape");
  }
  const Matrix product = pinv(a_est) * a_true;
  const Matrix magnitude = product.cwiseAbs();
  const Matrix cost = magnitude.maxCoeff() - magnitude.array();

  MatchResult result;
  result.permutation = solve_assignment(cost);
  const Eigen::Index n = product.cols();
  result.scales.resize(static_cast<std::size_t>(n));
  result.corrected_product.resize(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto row = result.permutation[static_cast<std::size_t>(j)];
    const double diag = product(row, j);
    if (std::abs(diag) < 1e-12) {
      throw DegenerateMatch("matched entry for source " + std::to_string(j) +
                            " is numerically zero");
    }
    result.scales[static_cast<std::size_t>(j)] = 1.0 / diag;
    result.corrected_product.row(j) = product.row(row) / diag;
    result.corrected_product(j, j) = 1.0;
  }
  return result;
}

/// C_A: entrywise l1 norm of the corrected product minus the identity.
inline double mixing_criterion(const MixingMatrix& a_est, const MixingMatrix& a_true) {
  const auto match = match_and_scale(a_est, a_true);
  const auto n = match.corrected_product.rows();
  return (match.corrected_product - Matrix::Identity(n, n)).cwiseAbs().sum();
}

struct SdrDecomposition {
  double e_target = 0.0;
  double e_interf = 0.0;
  double e_noise = 0.0;
  double e_artefacts = 0.0;
  double sdr_db = 0.0;
};

inline double capped_db(double numerator, double denominator) {
  if (numerator <= 0.0 && denominator <= 0.0) return 0.0;
  if (denominator <= 0.0) return kSdrCapDb;
  if (numerator <= 0.0) return -kSdrCapDb;
  return std::clamp(10.0 * std::log10(numerator / denominator), -kSdrCapDb, kSdrCapDb);
}

/// Orthonormal bases for the nested spans used by the SDR decomposition:
/// all true sources, then sources plus noise rows. Built once per ground
/// truth and reused for every estimated source.
class SdrProjector {
 public:
  SdrProjector(const SignalMatrix& sources, const SignalMatrix& noise)
      : sources_(sources),
        source_basis_(orthonormal_basis(sources.transpose())),
        full_basis_(orthonormal_basis(stack(sources, noise))) {
    if (noise.size() != 0 && noise.cols() != sources.cols()) {
      throw InvalidArgument("noise and sources must have the same length");
    }
  }

  Eigen::Index samples() const { return sources_.cols(); }

  SdrDecomposition decompose(const Vector& estimate, Eigen::Index target) const {
    if (estimate.size() != sources_.cols()) {
      throw InvalidArgument("estimate length does not match the true sources");
    }
    if (target < 0 || target >= sources_.rows()) throw InvalidArgument("target index out of range");
    const Vector truth = sources_.row(target).transpose();
    const double truth_energy = truth.squaredNorm();
    if (!(truth_energy > 0.0)) throw InvalidArgument("target source is identically zero");

    // Successive residuals keep each component orthogonal to the next.
    const Vector s_target = (truth.dot(estimate) / truth_energy) * truth;
    const Vector r1 = estimate - s_target;
    const Vector s_interf = project(source_basis_, r1);
    const Vector r2 = r1 - s_interf;
    const Vector s_noise = project(full_basis_, r2);
    const Vector s_artefacts = r2 - s_noise;

    SdrDecomposition d;
    d.e_target = s_target.squaredNorm();
    d.e_interf = s_interf.squaredNorm();
    d.e_noise = s_noise.squaredNorm();
    d.e_artefacts = s_artefacts.squaredNorm();
    d.sdr_db = capped_db(d.e_target, (r1).squaredNorm());
    return d;
  }

 private:
  static Matrix stack(const SignalMatrix& sources, const SignalMatrix& noise) {
    Matrix basis(sources.cols(), sources.rows() + noise.rows());
    basis.leftCols(sources.rows()) = sources.transpose();
    if (noise.rows() > 0) basis.rightCols(noise.rows()) = noise.transpose();
    return basis;
  }

  // Left singular vectors whose singular values exceed the pinv tolerance.
  static Matrix orthonormal_basis(const Matrix& columns) {
    if (columns.cols() == 0) return Matrix(columns.rows(), 0);
    Eigen::BDCSVD<Matrix> svd(columns, Eigen::ComputeThinU);
    const Vector& sv = svd.singularValues();
    Eigen::Index rank = 0;
    const double cutoff = kPinvTolerance * (sv.size() ? sv(0) : 0.0);
    while (rank < sv.size() && sv(rank) > cutoff && sv(rank) > 0.0) ++rank;
    return svd.matrixU().leftCols(rank);
  }

  static Vector project(const Matrix& basis, const Vector& v) {
    if (basis.cols() == 0) return Vector::Zero(v.size());
    return basis * (basis.transpose() * v);
  }

  SignalMatrix sources_;
  Matrix source_basis_;
  Matrix full_basis_;
};

/// SDR decomposition of one estimated source against true source `target`.
inline SdrDecomposition sdr(const Vector& estimate, const SignalMatrix& sources,
                            const SignalMatrix& noise, Eigen::Index target) {
  return SdrProjector(sources, noise).decompose(estimate, target);
}

struct Scores {
  double mean_sdr = 0.0;
  double min_sdr = 0.0;
  double ca = 0.0;
};

/// Aligns estimated sources with the truth through the mixing-matrix match,
/// then reports mean and minimum SDR and C_A.
inline Scores score_estimate(const MixingMatrix& a_est, const SignalMatrix& s_est,
                             const MixingMatrix& a_true, const SdrProjector& projector) {
  const auto match = match_and_scale(a_est, a_true);
  const auto n = a_true.cols();
  if (s_est.rows() != n) throw InvalidArgument("estimated source count mismatch");
  Scores scores;
  scores.ca = (match.corrected_product - Matrix::Identity(n, n)).cwiseAbs().sum();
  scores.min_sdr = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto row = match.permutation[static_cast<std::size_t>(j)];
    const double value = projector.decompose(s_est.row(row).transpose(), j).sdr_db;
    total += value;
    scores.min_sdr = std::min(scores.min_sdr, value);
  }
  scores.mean_sdr = total / static_cast<double>(n);
  return scores;
}

inline Scores score_estimate(const MixingMatrix& a_est, const SignalMatrix& s_est,
                             const MixingMatrix& a_true, const SignalMatrix& s_true,
                             const SignalMatrix& noise) {
  return score_estimate(a_est, s_est, a_true, SdrProjector(s_true, noise));
}

inline Scores score_result(const SeparationResult& result, const GroundTruth& truth,
                           const SdrProjector& projector) {
  return score_estimate(result.a_est, result.s_est, truth.mixing, projector);
}

inline Scores score_result(const SeparationResult& result, const GroundTruth& truth) {
  return score_result(result, truth, SdrProjector(truth.sources, truth.noise));
}

}  // namespace amca
