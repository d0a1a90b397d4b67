#pragma once

// Undecimated (translation-invariant) 1D wavelet frame with periodic
// boundaries. Each level splits the current approximation with filters
// h/sqrt(2) and g/sqrt(2) dilated by 2^(level-1), which makes the analysis
// operator a Parseval frame: it preserves energy and its adjoint inverts it.

#include "amca/core.hpp"

#include <charconv>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace amca {

enum class FilterFamily { haar, daubechies4 };

inline std::string to_string(FilterFamily family) {
  return family == FilterFamily::haar ? "haar" : "daubechies4";
}

inline FilterFamily parse_filter_family(std::string_view name) {
  if (name == "haar") return FilterFamily::haar;
  if (name == "daubechies4" || name == "db4") return FilterFamily::daubechies4;
  throw InvalidConfig("unknown filter family '" + std::string(name) + "'");
}

/// Detail scales used when a frame spec gives none.
inline constexpr int kDefaultLevels = 1;

struct FrameSpec {
  FilterFamily family = FilterFamily::daubechies4;
  int levels = kDefaultLevels;  // number of detail scales J

  /// Total coefficient count (J+1)*T for signals of length T.
  Eigen::Index coefficient_count(Eigen::Index samples) const {
    return static_cast<Eigen::Index>(levels + 1) * samples;
  }
};

/// Parses "family:levels" or "family".
inline FrameSpec parse_frame_spec(std::string_view text) {
  FrameSpec spec;
  const auto colon = text.find(':');
  spec.family = parse_filter_family(text.substr(0, colon));
  spec.levels = kDefaultLevels;
  if (colon != std::string_view::npos) {
    const auto digits = text.substr(colon + 1);
    int levels = 0;
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), levels);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || levels < 1) {
      throw InvalidConfig("bad frame levels in '" + std::string(text) + "'");
    }
    spec.levels = levels;
  }
  return spec;
}

inline std::string to_string(const FrameSpec& spec) {
  return to_string(spec.family) + ":" + std::to_string(spec.levels);
}

namespace detail {

struct FilterPair {
  std::vector<double> lowpass;
  std::vector<double> highpass;
};

// Orthonormal QMF pair scaled by 1/sqrt(2).
inline const FilterPair& frame_filters(FilterFamily family) {
  static const FilterPair haar = [] {
    const double c = 0.5;  // (1/sqrt2) * (1/sqrt2)
    return FilterPair{{c, c}, {c, -c}};
  }();
  // Daubechies with 4 vanishing moments (8 taps).
  static const FilterPair db4 = [] {
    std::vector<double> h = {0.2303778133088965,    0.7148465705529157,   0.6308807679298589,
                             -0.027983769416859854, -0.18703481171909309, 0.030841381835560764,
                             0.0328830116668852,    -0.010597401785069032};
    const std::size_t len = h.size();
    for (auto& v : h) v /= std::sqrt(2.0);
    std::vector<double> g(len);
    for (std::size_t k = 0; k < len; ++k) {
      g[k] = ((k % 2 == 0) ? 1.0 : -1.0) * h[len - 1 - k];
    }
    return FilterPair{h, g};
  }();
  return family == FilterFamily::haar ? haar : db4;
}

inline void validate(Eigen::Index samples, const FrameSpec& spec) {
  if (spec.levels < 1) throw InvalidConfig("frame levels must be positive");
  if (samples < 1) throw InvalidConfig("signal length must be positive");
  if (spec.levels >= 62) throw InvalidConfig("frame levels too large");
  const Eigen::Index scale = Eigen::Index{1} << spec.levels;
  if (scale > samples || samples % scale != 0) {
    throw InvalidConfig("signal length " + std::to_string(samples) +
                        " is not divisible by 2^" + std::to_string(spec.levels));
  }
}

// out[t] = sum_k f[k] * in[(t + k*step) mod T]
inline void correlate_periodic(std::span<const double> in, std::span<const double> filter,
                               Eigen::Index step, std::span<double> out) {
  const auto n = static_cast<Eigen::Index>(in.size());
  for (Eigen::Index t = 0; t < n; ++t) {
    double acc = 0.0;
    Eigen::Index idx = t;
    for (double f : filter) {
      acc += f * in[static_cast<std::size_t>(idx)];
      idx += step;
      if (idx >= n) idx -= n;
    }
    out[static_cast<std::size_t>(t)] = acc;
  }
}

// out[u] += sum_k f[k] * in[(u - k*step) mod T]   (adjoint of the above)
inline void accumulate_adjoint(std::span<const double> in, std::span<const double> filter,
                               Eigen::Index step, std::span<double> out) {
  const auto n = static_cast<Eigen::Index>(in.size());
  for (Eigen::Index t = 0; t < n; ++t) {
    const double v = in[static_cast<std::size_t>(t)];
    Eigen::Index idx = t;
    for (double f : filter) {
      out[static_cast<std::size_t>(idx)] += f * v;
      idx += step;
      if (idx >= n) idx -= n;
    }
  }
}

inline void analyze_into(std::span<const double> x, const FrameSpec& spec, std::span<double> out) {
  const auto n = static_cast<Eigen::Index>(x.size());
  const auto& filters = frame_filters(spec.family);
  std::vector<double> approx(x.begin(), x.end());
  std::vector<double> next(x.size());
  Eigen::Index step = 1;
  for (int level = 0; level < spec.levels; ++level) {
    auto detail_band = out.subspan(static_cast<std::size_t>(level * n), x.size());
    correlate_periodic(approx, filters.highpass, step % n, detail_band);
    correlate_periodic(approx, filters.lowpass, step % n, next);
    approx.swap(next);
    step *= 2;
  }
  std::copy(approx.begin(), approx.end(),
            out.begin() + static_cast<std::ptrdiff_t>(spec.levels * n));
}

inline void synthesize_into(std::span<const double> c, const FrameSpec& spec,
                            std::span<double> out) {
  const auto n = static_cast<Eigen::Index>(out.size());
  const auto& filters = frame_filters(spec.family);
  std::vector<double> approx(c.begin() + static_cast<std::ptrdiff_t>(spec.levels * n), c.end());
  std::vector<double> prev(out.size());
  Eigen::Index step = Eigen::Index{1} << (spec.levels - 1);
  for (int level = spec.levels - 1; level >= 0; --level) {
    std::fill(prev.begin(), prev.end(), 0.0);
    accumulate_adjoint(approx, filters.lowpass, step % n, prev);
    accumulate_adjoint(c.subspan(static_cast<std::size_t>(level * n), out.size()),
                       filters.highpass, step % n, prev);
    approx.swap(prev);
    step /= 2;
  }
  std::copy(approx.begin(), approx.end(), out.begin());
}

}  // namespace detail

/// Undecimated wavelet coefficients of x: detail bands 1..J, then the coarse
/// band, each of length T.
inline Vector analyze(const Vector& x, const FrameSpec& spec) {
  detail::validate(x.size(), spec);
  Vector out(spec.coefficient_count(x.size()));
  detail::analyze_into({x.data(), static_cast<std::size_t>(x.size())}, spec,
                       {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

/// Adjoint of analyze; also its left inverse.
inline Vector synthesize(const Vector& c, const FrameSpec& spec) {
  if (spec.levels < 1 || c.size() % (spec.levels + 1) != 0) {
    throw InvalidArgument("coefficient vector length " + std::to_string(c.size()) +
                          " does not match a frame with " + std::to_string(spec.levels) +
                          " levels");
  }
  const Eigen::Index samples = c.size() / (spec.levels + 1);
  detail::validate(samples, spec);
  Vector out(samples);
  detail::synthesize_into({c.data(), static_cast<std::size_t>(c.size())}, spec,
                          {out.data(), static_cast<std::size_t>(out.size())});
  return out;
}

inline CoefficientMatrix analyze_matrix(const SignalMatrix& m, const FrameSpec& spec) {
  detail::validate(m.cols(), spec);
  CoefficientMatrix out(m.rows(), spec.coefficient_count(m.cols()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    out.row(r) = analyze(m.row(r).transpose(), spec).transpose();
  }
  return out;
}

inline SignalMatrix synthesize_matrix(const CoefficientMatrix& c, const FrameSpec& spec) {
  if (spec.levels < 1 || c.cols() % (spec.levels + 1) != 0) {
    throw InvalidArgument("coefficient matrix has " + std::to_string(c.cols()) +
                          " columns, not a multiple of " + std::to_string(spec.levels + 1));
  }
  SignalMatrix out(c.rows(), c.cols() / (spec.levels + 1));
  for (Eigen::Index r = 0; r < c.rows(); ++r) {
    out.row(r) = synthesize(c.row(r).transpose(), spec).transpose();
  }
  return out;
}

}  // namespace amca
