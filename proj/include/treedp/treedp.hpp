// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors
//
// Umbrella header: differentially private subtree-sum release over known
// rooted trees, with baselines, an additive-multiplicative approximation
// pipeline, error metrics, and executable lower-bound machinery.

#pragma once

#include "treedp/baselines.hpp"
#include "treedp/bounds.hpp"
#include "treedp/budget.hpp"
#include "treedp/errors.hpp"
#include "treedp/hierarchy.hpp"
#include "treedp/io.hpp"
#include "treedp/metrics.hpp"
#include "treedp/noise.hpp"
#include "treedp/rng.hpp"
#include "treedp/svt.hpp"
#include "treedp/tree.hpp"
