#pragma once

//! Umbrella header: transformation kernel estimation of tail densities,
//! histogram and parametric baselines, tail indices, theory checks and the
//! simulation harness.

#include "bandwidth.hpp"
#include "core.hpp"
#include "csv.hpp"
#include "estimators.hpp"
#include "harness.hpp"
#include "histogram.hpp"
#include "json_io.hpp"
#include "kde.hpp"
#include "kernels.hpp"
#include "optimize.hpp"
#include "parametric.hpp"
#include "sampling.hpp"
#include "tailindex.hpp"
#include "theory.hpp"
#include "transform.hpp"
