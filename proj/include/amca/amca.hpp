#pragma once

#include "amca/core.hpp"
#include "amca/harness.hpp"
#include "amca/matio.hpp"
#include "amca/metrics.hpp"
#include "amca/result.hpp"
#include "amca/rng.hpp"
#include "amca/separation.hpp"
#include "amca/spcgen.hpp"
#include "amca/transforms.hpp"
