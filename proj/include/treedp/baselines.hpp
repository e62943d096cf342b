// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <cmath>
#include <cstdint>

#include "treedp/errors.hpp"
#include "treedp/noise.hpp"
#include "treedp/rng.hpp"
#include "treedp/tree.hpp"

namespace treedp {

// Pure-DP baseline: each node's exact subtree sum plus independent
// Lap(d/eps) noise, d the tree depth. One unit change at a leaf moves the d
// sums on its root path by 1 each, so the L1 sensitivity of the full vector
// is d and the release is (eps, 0)-DP. The scale uses the tree's max depth
// for every node, matching the vector-sensitivity argument.
inline NodeEstimates laplace_tree(const TreeShape& tree,
                                  const NodeWeights& weights, double eps,
                                  RngState rng) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw input_error("laplace_tree: eps must be finite and > 0");
  double sigma = static_cast<double>(tree.depth()) / eps;
  NodeEstimates out;
  out.value.resize(static_cast<std::size_t>(tree.node_count()));
  for (int i = 0; i < tree.node_count(); ++i)
    out.value[static_cast<std::size_t>(i)] =
        static_cast<double>(weights.w[static_cast<std::size_t>(i)]) +
        sample_laplace(sigma, rng);
  return out;
}

inline NodeEstimates laplace_tree(const TreeShape& tree,
                                  const LeafCounts& counts, double eps,
                                  RngState rng) {
  return laplace_tree(tree, aggregate_exact(tree, counts), eps, rng);
}

// Gaussian-noise standard deviation for an (eps, delta)-DP release of a
// vector with L2 sensitivity sqrt(d): sigma = sqrt(2 ln(1.25/delta)) *
// sqrt(d) / eps. The calibration is valid for eps in (0, 1].
inline double gaussian_tree_sigma(int depth, double eps, double delta) {
  if (!(eps > 0.0 && eps <= 1.0))
    throw input_error("gaussian_tree: eps must be in (0, 1]");
  if (!(delta > 0.0 && delta < 1.0))
    throw input_error("gaussian_tree: delta must be in (0, 1)");
  if (depth < 1) throw input_error("gaussian_tree: depth must be >= 1");
  return std::sqrt(2.0 * std::log(1.25 / delta)) *
         std::sqrt(static_cast<double>(depth)) / eps;
}

// Approximate-DP baseline: each node's exact subtree sum plus independent
// N(0, sigma^2) noise with sigma from gaussian_tree_sigma. One unit change
// at a leaf moves the output vector by an L2 distance of sqrt(d), so the
// release is (eps, delta)-DP.
inline NodeEstimates gaussian_tree(const TreeShape& tree,
                                   const NodeWeights& weights, double eps,
                                   double delta, RngState rng) {
  double sigma = gaussian_tree_sigma(tree.depth(), eps, delta);
  NodeEstimates out;
  out.value.resize(static_cast<std::size_t>(tree.node_count()));
  for (int i = 0; i < tree.node_count(); ++i)
    out.value[static_cast<std::size_t>(i)] =
        static_cast<double>(weights.w[static_cast<std::size_t>(i)]) +
        sample_gaussian(sigma, rng);
  return out;
}

inline NodeEstimates gaussian_tree(const TreeShape& tree,
                                   const LeafCounts& counts, double eps,
                                   double delta, RngState rng) {
  return gaussian_tree(tree, aggregate_exact(tree, counts), eps, delta, rng);
}

}  // namespace treedp
