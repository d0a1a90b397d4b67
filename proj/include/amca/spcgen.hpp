#pragma once

// Synthetic sparse, partially correlated (SPC) sources: K-sparse rows that
// share L = round(c*K) active positions, smoothed by a Laplacian kernel and
// mixed by a random Gaussian matrix with additive white Gaussian noise.

#include "amca/core.hpp"
#include "amca/rng.hpp"

#include <algorithm>
#include <cstdint>
#include <iterator>
#include <optional>
#include <vector>

namespace amca {

struct SpcConfig {
  int n = 10;              // sources
  int m = 10;              // channels
  Eigen::Index T = 4096;   // samples per source
  double sparsity = 0.02;  // K / T
  double coherence = 0.0;  // c = L / K
  double tau = 4.0;        // std of shared-entry amplitudes
  double fwhm = 15.0;      // Laplacian kernel width in samples
  std::optional<double> snr_db = 120.0;  // nullopt means noiseless
  std::uint64_t seed = 0;

  Eigen::Index active_count() const {
    return static_cast<Eigen::Index>(std::llround(sparsity * static_cast<double>(T)));
  }
  Eigen::Index shared_count() const {
    return static_cast<Eigen::Index>(
        std::llround(coherence * static_cast<double>(active_count())));
  }

  void validate() const {
    if (n < 1) throw InvalidConfig("source count must be positive");
    if (m < n) throw InvalidConfig("channel count must be >= source count");
    if (T < 1) throw InvalidConfig("sample count must be positive");
    if (!(sparsity > 0.0 && sparsity < 1.0)) throw InvalidConfig("sparsity must lie in (0,1)");
    if (!(coherence >= 0.0 && coherence <= 1.0)) {
      throw InvalidConfig("coherence must lie in [0,1]");
    }
    if (!(tau > 0.0)) throw InvalidConfig("tau must be positive");
    if (!(fwhm > 0.0)) throw InvalidConfig("fwhm must be positive");
    const auto k = active_count();
    if (k < 1) throw InvalidConfig("sparsity * T rounds to zero active entries");
    if (k > T) throw InvalidConfig("active count exceeds sample count");
  }
};

struct SupportSets {
  std::vector<Eigen::Index> shared;                    // identical for all sources
  std::vector<std::vector<Eigen::Index>> independent;  // per source, disjoint from shared
};

struct GroundTruth {
  SignalMatrix sources;  // n x T, after smoothing
  MixingMatrix mixing;   // m x n
  SignalMatrix noise;    // m x T
  SignalMatrix observations;
  SupportSets supports;
};

namespace detail {

// Draws `count` distinct elements of `pool` (partial Fisher-Yates). Sorted.
inline std::vector<Eigen::Index> draw_without_replacement(std::vector<Eigen::Index> pool,
                                                          Eigen::Index count, Rng& rng) {
  const auto size = pool.size();
  for (std::size_t i = 0; i < static_cast<std::size_t>(count); ++i) {
    const auto j = i + static_cast<std::size_t>(rng.uniform_index(size - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(static_cast<std::size_t>(count));
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace detail

inline SupportSets sample_supports(const SpcConfig& cfg, Rng& rng) {
  const Eigen::Index k = cfg.active_count();
  const Eigen::Index l = cfg.shared_count();
  if (k > cfg.T) throw InvalidConfig("active count exceeds sample count");
  if (k < 1 || l > k) throw InvalidConfig("invalid support cardinalities");

  std::vector<Eigen::Index> all(static_cast<std::size_t>(cfg.T));
  for (Eigen::Index t = 0; t < cfg.T; ++t) all[static_cast<std::size_t>(t)] = t;

  SupportSets sets;
  sets.shared = detail::draw_without_replacement(all, l, rng);

  std::vector<Eigen::Index> complement;
  complement.reserve(all.size() - sets.shared.size());
  std::set_difference(all.begin(), all.end(), sets.shared.begin(), sets.shared.end(),
                      std::back_inserter(complement));
  sets.independent.reserve(static_cast<std::size_t>(cfg.n));
  for (int j = 0; j < cfg.n; ++j) {
    sets.independent.push_back(detail::draw_without_replacement(complement, k - l, rng));
  }
  return sets;
}

/// Spiky pre-smoothing sources: N(0, tau^2) on shared positions, N(0, 1) on
/// independent positions, zero elsewhere.
inline SignalMatrix sample_amplitudes(const SupportSets& supports, const SpcConfig& cfg,
                                      Rng& rng) {
  SignalMatrix s = SignalMatrix::Zero(static_cast<Eigen::Index>(supports.independent.size()),
                                      cfg.T);
  for (Eigen::Index j = 0; j < s.rows(); ++j) {
    for (auto t : supports.shared) s(j, t) = rng.normal(0.0, cfg.tau);
    for (auto t : supports.independent[static_cast<std::size_t>(j)]) s(j, t) = rng.normal();
  }
  return s;
}

/// Peak-normalized Laplacian kernel, h[t] = exp(-|t| ln2 / (fwhm/2)) for
/// t in [-4 fwhm, 4 fwhm]. Index `radius` holds t = 0.
inline std::vector<double> laplacian_kernel(double fwhm) {
  if (!(fwhm > 0.0)) throw InvalidArgument("fwhm must be positive");
  const auto radius = static_cast<Eigen::Index>(std::floor(4.0 * fwhm));
  std::vector<double> h(static_cast<std::size_t>(2 * radius + 1));
  const double rate = std::log(2.0) / (fwhm / 2.0);
  for (Eigen::Index t = -radius; t <= radius; ++t) {
    h[static_cast<std::size_t>(t + radius)] = std::exp(-static_cast<double>(std::abs(t)) * rate);
  }
  return h;
}

/// Circular convolution of every row with the Laplacian kernel.
inline SignalMatrix laplacian_smooth(const SignalMatrix& s, double fwhm) {
  const auto h = laplacian_kernel(fwhm);
  const auto radius = static_cast<Eigen::Index>(h.size() / 2);
  const Eigen::Index n = s.cols();
  SignalMatrix out = SignalMatrix::Zero(s.rows(), n);
  for (Eigen::Index r = 0; r < s.rows(); ++r) {
    for (Eigen::Index t = 0; t < n; ++t) {
      const double v = s(r, t);
      if (v == 0.0) continue;
      for (Eigen::Index k = -radius; k <= radius; ++k) {
        Eigen::Index idx = (t + k) % n;
        if (idx < 0) idx += n;
        out(r, idx) += v * h[static_cast<std::size_t>(k + radius)];
      }
    }
  }
  return out;
}

/// Gaussian m x n matrix with unit-norm columns and full column rank.
inline MixingMatrix sample_mixing(int m, int n, Rng& rng) {
  if (n < 1 || m < n) throw InvalidConfig("mixing matrix needs m >= n >= 1");
  for (int attempt = 0; attempt < 100; ++attempt) {
    MixingMatrix a(m, n);
    for (int j = 0; j < n; ++j) {
      for (int i = 0; i < m; ++i) a(i, j) = rng.normal();
    }
    normalize_columns(a);
    if (numerical_rank(a) == n) return a;
  }
  throw GenerationError("could not draw a full-rank mixing matrix in 100 attempts");
}

struct NoisyMixture {
  SignalMatrix observations;
  SignalMatrix noise;
};

/// X = A S + Z with Z scaled so that the realized Frobenius SNR equals snr_db.
inline NoisyMixture mix_with_noise(const MixingMatrix& a, const SignalMatrix& s,
                                   std::optional<double> snr_db, Rng& rng) {
  if (a.cols() != s.rows()) throw InvalidArgument("mixing/source shape mismatch");
  NoisyMixture out;
  const SignalMatrix clean = a * s;
  out.noise = SignalMatrix::Zero(clean.rows(), clean.cols());
  if (snr_db) {
    const double signal_energy = clean.squaredNorm();
    if (!(signal_energy > 0.0)) throw InvalidArgument("SNR undefined for zero signal");
    for (Eigen::Index j = 0; j < out.noise.cols(); ++j) {
      for (Eigen::Index i = 0; i < out.noise.rows(); ++i) out.noise(i, j) = rng.normal();
    }
    const double target = signal_energy / std::pow(10.0, *snr_db / 10.0);
    out.noise *= std::sqrt(target / out.noise.squaredNorm());
  }
  out.observations = clean + out.noise;
  return out;
}

/// Full draw of the SPC model. Identical configs give identical output.
inline GroundTruth generate(const SpcConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  GroundTruth truth;
  truth.supports = sample_supports(cfg, rng);
  truth.sources = laplacian_smooth(sample_amplitudes(truth.supports, cfg, rng), cfg.fwhm);
  truth.mixing = sample_mixing(cfg.m, cfg.n, rng);
  auto mixed = mix_with_noise(truth.mixing, truth.sources, cfg.snr_db, rng);
  truth.observations = std::move(mixed.observations);
  truth.noise = std::move(mixed.noise);
  return truth;
}

}  // namespace amca
