#pragma once

#include "amca/core.hpp"

#include <limits>
#include <vector>

namespace amca {

struct TraceEntry {
  int iteration = 0;
  double q = 1.0;
  Vector mu;
  double sdr = std::numeric_limits<double>::quiet_NaN();  // mean SDR when truth is known
};

struct SeparationResult {
  MixingMatrix a_est;
  SignalMatrix s_est;
  CoefficientMatrix s_coef;
  std::vector<TraceEntry> trace;
};

}  // namespace amca
