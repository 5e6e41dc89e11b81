#pragma once

// Umbrella header for the cpemd library: approximate Earth Mover's Distance
// for high-dimensional l1 point sets, built on a closest-pair oracle.

#include "aspect.hpp"
#include "cli.hpp"
#include "close_pairs.hpp"
#include "core.hpp"
#include "cp_oracle.hpp"
#include "duals.hpp"
#include "exact.hpp"
#include "geometry.hpp"
#include "io.hpp"
#include "mwu.hpp"
#include "sampler.hpp"
#include "selfcheck.hpp"
#include "stats.hpp"
#include "tree.hpp"
