#pragma once

// Umbrella header.

#include "tabbench/bench.hpp"
#include "tabbench/bif.hpp"
#include "tabbench/ci_test.hpp"
#include "tabbench/dag.hpp"
#include "tabbench/error.hpp"
#include "tabbench/generators.hpp"
#include "tabbench/metrics.hpp"
#include "tabbench/rng.hpp"
#include "tabbench/scm.hpp"
#include "tabbench/stats.hpp"
#include "tabbench/table.hpp"
