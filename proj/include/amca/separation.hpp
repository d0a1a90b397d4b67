#pragma once

// GMCA and AMCA share one alternating engine over frame coefficients:
//
//   S' = pinv(A) X          least-squares sources
//   S  = threshold(S', mu)  per-row hard or soft thresholding
//   w  = weights(S, q)      AMCA only; GMCA uses w = 1
//   A  = X W S^T (S W S^T)^-1, then unit-norm columns
//
// Thresholds decrease from the largest coefficient of each source to a
// multiple of its MAD noise estimate; q decreases geometrically. By default
// only the detail bands enter the fit, and the coarse band is recovered by
// least squares at the end.

#include "amca/core.hpp"
#include "amca/metrics.hpp"
#include "amca/result.hpp"
#include "amca/rng.hpp"
#include "amca/spcgen.hpp"
#include "amca/transforms.hpp"

#include <functional>
#include <string>
#include <vector>

namespace amca {

enum class Algorithm { gmca, amca };
enum class ThresholdMode { hard, soft };
enum class ThresholdLaw { linear, geometric };

inline std::string to_string(Algorithm a) { return a == Algorithm::gmca ? "gmca" : "amca"; }

inline Algorithm parse_algorithm(std::string_view name) {
  if (name == "gmca") return Algorithm::gmca;
  if (name == "amca") return Algorithm::amca;
  throw InvalidConfig("unknown algorithm '" + std::string(name) + "'");
}

inline std::string to_string(ThresholdMode m) { return m == ThresholdMode::hard ? "hard" : "soft"; }

inline std::string to_string(ThresholdLaw l) {
  return l == ThresholdLaw::linear ? "linear" : "geometric";
}

inline ThresholdLaw parse_threshold_law(std::string_view name) {
  if (name == "linear") return ThresholdLaw::linear;
  if (name == "geometric") return ThresholdLaw::geometric;
  throw InvalidConfig("unknown threshold law '" + std::string(name) + "'");
}

inline ThresholdMode parse_threshold_mode(std::string_view name) {
  if (name == "hard") return ThresholdMode::hard;
  if (name == "soft") return ThresholdMode::soft;
  throw InvalidConfig("unknown threshold mode '" + std::string(name) + "'");
}

struct AlgoParams {
  Algorithm algorithm = Algorithm::amca;
  int p_max = 500;
  double epsilon = 1e-6;
  double q_start = 1.0;
  double q_final = 0.01;
  double final_sigma_mult = 3.0;
  ThresholdMode threshold_mode = ThresholdMode::hard;
  ThresholdLaw threshold_law = ThresholdLaw::geometric;
  bool weight_square = false;
  bool early_stop = false;
  bool fit_coarse = false;  // include the coarse band in the mixing fit
  std::uint64_t init_seed = 0;

  void validate() const {
    if (p_max < 1) throw InvalidConfig("p_max must be >= 1");
    if (!(epsilon > 0.0)) throw InvalidConfig("epsilon must be positive");
    if (!(q_final > 0.0 && q_final <= q_start && q_start <= 1.0)) {
      throw InvalidConfig("need 0 < q_final <= q_start <= 1");
    }
    if (!(final_sigma_mult > 0.0)) throw InvalidConfig("final_sigma_mult must be positive");
  }
};

// ---------------------------------------------------------------------------
// Thresholding

/// Keeps entries with |y| > mu (strict), zeroes the rest.
inline Vector hard_threshold(const Vector& y, double mu) {
  if (mu < 0.0) throw InvalidArgument("threshold must be non-negative");
  return (y.array().abs() > mu).select(y, 0.0);
}

/// sign(y) * max(|y| - mu, 0).
inline Vector soft_threshold(const Vector& y, double mu) {
  if (mu < 0.0) throw InvalidArgument("threshold must be non-negative");
  return y.array().sign() * (y.array().abs() - mu).max(0.0);
}

/// Thresholds row j of `s` at mu[j], in place.
inline void threshold_rows(CoefficientMatrix& s, const Vector& mu, ThresholdMode mode) {
  if (mu.size() != s.rows()) throw InvalidArgument("one threshold per row required");
  if ((mu.array() < 0.0).any()) throw InvalidArgument("threshold must be non-negative");
  for (Eigen::Index j = 0; j < s.rows(); ++j) {
    auto row = s.row(j).array();
    if (mode == ThresholdMode::hard) {
      row = (row.abs() > mu(j)).select(row, 0.0);
    } else {
      row = row.sign() * (row.abs() - mu(j)).max(0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Noise level

inline double median_inplace(std::vector<double>& v) {
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (v.size() % 2 == 1) return *mid;
  return 0.5 * (*mid + *std::max_element(v.begin(), mid));
}

/// Gaussian-consistent MAD scale: median(|x - median(x)|) / 0.6745.
template <typename Derived>
double mad_sigma(const Eigen::DenseBase<Derived>& x) {
  if (x.size() == 0) throw InvalidArgument("MAD of an empty vector");
  std::vector<double> buf(static_cast<std::size_t>(x.size()));
  for (Eigen::Index i = 0; i < x.size(); ++i) buf[static_cast<std::size_t>(i)] = x(i);
  const double med = median_inplace(buf);
  for (auto& v : buf) v = std::abs(v - med);
  return median_inplace(buf) / 0.6745;
}

// ---------------------------------------------------------------------------
// Updates

/// Random unit-norm, full-rank starting point for the mixing matrix.
inline MixingMatrix init_mixing(const CoefficientMatrix& x_coef, int n, std::uint64_t seed) {
  if (n < 1 || n > x_coef.rows()) {
    throw InvalidConfig("source count " + std::to_string(n) + " exceeds channel count " +
                        std::to_string(x_coef.rows()));
  }
  Rng rng(seed);
  return sample_mixing(static_cast<int>(x_coef.rows()), n, rng);
}

inline CoefficientMatrix least_squares_sources(const MixingMatrix& a,
                                               const CoefficientMatrix& x_coef) {
  return pinv(a) * x_coef;
}

/// Thresholded least-squares source estimate.
inline CoefficientMatrix update_sources(const MixingMatrix& a, const CoefficientMatrix& x_coef,
                                        const Vector& mu, ThresholdMode mode) {
  CoefficientMatrix s = least_squares_sources(a, x_coef);
  threshold_rows(s, mu, mode);
  return s;
}

/// w[t] = 1 / (||column t||_q + eps), rescaled so that max(w) = 1.
///
/// The l_q quasi-norm is evaluated in the log domain and clamped at 1e300 so
/// that small q does not overflow.
inline WeightVector compute_weights(const CoefficientMatrix& s_coef, double q, double epsilon,
                                    bool rescale = true) {
  if (!(q > 0.0)) throw InvalidArgument("q must be positive");
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  static const double kLogClamp = std::log(1e300);
  const Eigen::Index rows = s_coef.rows();
  WeightVector w(s_coef.cols());
  std::vector<double> logs(static_cast<std::size_t>(rows));
  for (Eigen::Index t = 0; t < s_coef.cols(); ++t) {
    std::size_t active = 0;
    double log_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < rows; ++i) {
      const double v = std::abs(s_coef(i, t));
      if (v == 0.0) continue;
      const double l = q * std::log(v);
      logs[active++] = l;
      log_max = std::max(log_max, l);
    }
    double norm = 0.0;
    if (active == 1) {
      norm = std::exp(logs[0] / q);
    } else if (active > 1) {
      double sum = 0.0;
      for (std::size_t i = 0; i < active; ++i) sum += std::exp(logs[i] - log_max);
      norm = std::exp(std::min((log_max + std::log(sum)) / q, kLogClamp));
    }
    w(t) = 1.0 / (norm + epsilon);
  }
  if (rescale) w /= w.maxCoeff();
  return w;
}

/// Weighted least-squares mixing matrix, X W S^T (S W S^T)^+, with
/// W = diag(w) or diag(w*w). Columns are not normalized here.
inline MixingMatrix update_mixing(const CoefficientMatrix& x_coef, const CoefficientMatrix& s_coef,
                                  const WeightVector& w, bool weight_square = false) {
  if (x_coef.cols() != s_coef.cols() || w.size() != s_coef.cols()) {
    throw InvalidArgument("update_mixing shape mismatch");
  }
  const Matrix sw = weight_square ? Matrix(s_coef * w.cwiseAbs2().asDiagonal())
                                  : Matrix(s_coef * w.asDiagonal());
  const Matrix cross = x_coef * sw.transpose();
  const Matrix gram = s_coef * sw.transpose();
  return cross * pinv(gram);
}

// ---------------------------------------------------------------------------
// Schedules

/// mu(k) = mu_start + (k / p_max) (mu_final - mu_start).
inline Vector threshold_schedule(int k, int p_max, const Vector& mu_start, const Vector& mu_final) {
  const double frac = static_cast<double>(k) / static_cast<double>(p_max);
  if (k == p_max) return mu_final;
  return mu_start + frac * (mu_final - mu_start);
}

/// mu(k) = mu_start (mu_final / mu_start)^(k / p_max), per entry. Entries
/// with mu_final = 0 fall back to the linear law.
inline Vector geometric_threshold_schedule(int k, int p_max, const Vector& mu_start,
                                           const Vector& mu_final) {
  if (k == p_max) return mu_final;
  Vector mu = threshold_schedule(k, p_max, mu_start, mu_final);
  const double frac = static_cast<double>(k) / static_cast<double>(p_max);
  for (Eigen::Index j = 0; j < mu.size(); ++j) {
    if (mu_final(j) > 0.0 && mu_start(j) > 0.0) {
      mu(j) = mu_start(j) * std::pow(mu_final(j) / mu_start(j), frac);
    }
  }
  return mu;
}

/// q(k) = q_start (q_final / q_start)^(k / p_max).
inline double q_schedule(int k, int p_max, double q_start, double q_final) {
  if (k == 0) return q_start;
  if (k == p_max) return q_final;
  return q_start * std::pow(q_final / q_start, static_cast<double>(k) / p_max);
}

// ---------------------------------------------------------------------------
// Driver

using WeightFunction =
    std::function<WeightVector(const CoefficientMatrix& s_coef, double q, double epsilon)>;

namespace detail {

// Leading left singular vectors of r, largest first.
inline Matrix dominant_directions(const Matrix& r, Eigen::Index count) {
  const Matrix gram = r * r.transpose();
  Eigen::SelfAdjointEigenSolver<Matrix> eig(gram);
  const Matrix& vecs = eig.eigenvectors();  // ascending eigenvalues
  Matrix out(r.rows(), count);
  for (Eigen::Index i = 0; i < count; ++i) out.col(i) = vecs.col(r.rows() - 1 - i);
  return out;
}

// Columns that fall (numerically) into the span of the columns before them
// are replaced by the dominant direction of the data left unexplained by the
// others. Returns the number of columns replaced.
inline int reseed_collapsed_columns(MixingMatrix& a, const CoefficientMatrix& x_coef,
                                    double tol = 1e-6) {
  int replaced = 0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const Vector col = a.col(j);
    const Matrix basis = a.leftCols(j);
    const Vector off = j == 0 ? col : Vector(col - basis * (pinv(basis) * col));
    if (off.norm() > tol) continue;
    Matrix others(a.rows(), a.cols() - 1);
    others << a.leftCols(j), a.rightCols(a.cols() - j - 1);
    const Matrix residual = x_coef - others * (pinv(others) * x_coef);
    a.col(j) = dominant_directions(residual, 1).col(0);
    ++replaced;
  }
  return replaced;
}

// Thresholded fit coefficients followed by the least-squares estimate of
// any bands left out of the fit.
inline CoefficientMatrix full_sources(const MixingMatrix& a, const CoefficientMatrix& x_all,
                                      const CoefficientMatrix& s_fit) {
  if (s_fit.cols() == x_all.cols()) return s_fit;
  CoefficientMatrix out(s_fit.rows(), x_all.cols());
  out.leftCols(s_fit.cols()) = s_fit;
  out.rightCols(x_all.cols() - s_fit.cols()) =
      least_squares_sources(a, x_all.rightCols(x_all.cols() - s_fit.cols()));
  return out;
}

inline double trace_sdr(const MixingMatrix& a, const CoefficientMatrix& s_coef,
                        const FrameSpec& frame, const GroundTruth& truth,
                        const SdrProjector& projector) {
  try {
    return score_estimate(a, synthesize_matrix(s_coef, frame), truth.mixing, projector).mean_sdr;
  } catch (const Error&) {
    return std::numeric_limits<double>::quiet_NaN();
  }
}

inline SeparationResult run_with_weights(const SignalMatrix& x, int n, const AlgoParams& params,
                                         const FrameSpec& frame, const GroundTruth* truth,
                                         const WeightFunction& weights) {
  params.validate();
  if (n < 1 || n > x.rows()) throw InvalidConfig("need 1 <= n <= number of channels");
  const bool reweight = params.algorithm == Algorithm::amca;

  const CoefficientMatrix x_all = analyze_matrix(x, frame);
  const Eigen::Index fit_cols = params.fit_coarse ? x_all.cols() : frame.levels * x.cols();
  const CoefficientMatrix x_coef = x_all.leftCols(fit_cols);
  MixingMatrix a = init_mixing(x_coef, n, params.init_seed);

  std::optional<SdrProjector> projector;
  if (truth) projector.emplace(truth->sources, truth->noise);

  CoefficientMatrix s_ls = least_squares_sources(a, x_coef);

  SeparationResult result;
  result.trace.reserve(static_cast<std::size_t>(params.p_max));
  std::vector<int> dead_streak(static_cast<std::size_t>(n), 0);
  const int dead_limit = std::max(1, params.p_max / 10);
  CoefficientMatrix s;

  for (int k = 0; k < params.p_max; ++k) {
    if (k > 0) s_ls = least_squares_sources(a, x_coef);

    Vector mu_start(n), mu_final(n);
    for (int j = 0; j < n; ++j) {
      mu_start(j) = s_ls.row(j).cwiseAbs().maxCoeff();
      mu_final(j) = std::min(params.final_sigma_mult * mad_sigma(s_ls.row(j)), mu_start(j));
    }
    // Evaluated one step ahead so the first pass does not annihilate every row.
    const Vector mu = params.threshold_law == ThresholdLaw::linear
                          ? threshold_schedule(k + 1, params.p_max, mu_start, mu_final)
                          : geometric_threshold_schedule(k + 1, params.p_max, mu_start, mu_final);

    s = s_ls;
    threshold_rows(s, mu, params.threshold_mode);

    const double q =
        reweight ? q_schedule(k, params.p_max, params.q_start, params.q_final) : 1.0;
    const WeightVector w = weights(s, q, params.epsilon);

    std::vector<Eigen::Index> alive, dead;
    for (int j = 0; j < n; ++j) {
      const bool is_dead = (s.row(j).array() == 0.0).all();
      (is_dead ? dead : alive).push_back(j);
      auto& streak = dead_streak[static_cast<std::size_t>(j)];
      streak = is_dead ? streak + 1 : 0;
      if (streak > dead_limit) {
        throw SeparationFailure("source " + std::to_string(j) + " stayed empty for " +
                                std::to_string(streak) + " iterations");
      }
    }

    MixingMatrix a_next(a.rows(), n);
    if (dead.empty()) {
      a_next = update_mixing(x_coef, s, w, params.weight_square);
    } else {
      if (!alive.empty()) {
        CoefficientMatrix s_alive(static_cast<Eigen::Index>(alive.size()), s.cols());
        for (std::size_t i = 0; i < alive.size(); ++i) s_alive.row(static_cast<Eigen::Index>(i)) = s.row(alive[i]);
        const MixingMatrix a_alive = update_mixing(x_coef, s_alive, w, params.weight_square);
        for (std::size_t i = 0; i < alive.size(); ++i) a_next.col(alive[i]) = a_alive.col(static_cast<Eigen::Index>(i));
      }
      // Re-seed empty sources from what the others leave unexplained.
      const Matrix residual = x_coef - a * s;
      const Matrix dirs = dominant_directions(residual, static_cast<Eigen::Index>(dead.size()));
      for (std::size_t i = 0; i < dead.size(); ++i) a_next.col(dead[i]) = dirs.col(static_cast<Eigen::Index>(i));
    }
    normalize_columns(a_next, s);
    reseed_collapsed_columns(a_next, x_coef);

    const double change = (a_next - a).norm();
    a = std::move(a_next);

    TraceEntry entry;
    entry.iteration = k;
    entry.q = q;
    entry.mu = mu;
    if (projector) entry.sdr = trace_sdr(a, full_sources(a, x_all, s), frame, *truth, *projector);
    result.trace.push_back(std::move(entry));

    if (params.early_stop && change < 1e-9) break;
  }

  result.a_est = a;
  result.s_coef = full_sources(a, x_all, s);
  result.s_est = synthesize_matrix(result.s_coef, frame);
  return result;
}

}  // namespace detail

/// Runs GMCA or AMCA on observations x (m x T) for n sources. When `truth`
/// is given, the mean SDR of every iterate is recorded in the trace.
inline SeparationResult run(const SignalMatrix& x, int n, const AlgoParams& params,
                            const FrameSpec& frame, const GroundTruth* truth = nullptr) {
  WeightFunction weights;
  if (params.algorithm == Algorithm::amca) {
    weights = [](const CoefficientMatrix& s, double q, double eps) {
      return compute_weights(s, q, eps);
    };
  } else {
    weights = [](const CoefficientMatrix& s, double, double) {
      return WeightVector::Ones(s.cols());
    };
  }
  return detail::run_with_weights(x, n, params, frame, truth, weights);
}

}  // namespace amca
