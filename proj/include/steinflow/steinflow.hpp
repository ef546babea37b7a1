#pragma once

// Everything except the CLI and config layers, which need the vendored
// CLI11 and json headers.

#include "steinflow/continuum.hpp"
#include "steinflow/discrepancy.hpp"
#include "steinflow/drift.hpp"
#include "steinflow/ensemble.hpp"
#include "steinflow/errors.hpp"
#include "steinflow/kernels.hpp"
#include "steinflow/lp.hpp"
#include "steinflow/parallel.hpp"
#include "steinflow/random.hpp"
#include "steinflow/svgd.hpp"
#include "steinflow/targets.hpp"
#include "steinflow/verify.hpp"
