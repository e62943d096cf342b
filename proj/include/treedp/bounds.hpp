// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Eigenvalues>

#include "treedp/errors.hpp"
#include "treedp/metrics.hpp"
#include "treedp/rng.hpp"
#include "treedp/tree.hpp"

namespace treedp {

// Base-2 entropy of a coin, continuous at the endpoints.
inline double binary_entropy(double x) {
  if (!(x >= 0.0 && x <= 1.0))
    throw input_error("binary_entropy: x must be in [0, 1]");
  double h = 0.0;
  if (x > 0.0) h += x * std::log2(1.0 / x);
  if (x < 1.0) h += (1.0 - x) * std::log2(1.0 / (1.0 - x));
  return h;
}

// Reconstruction-attack configuration over the complete binary tree of
// depth d with uniform thresholds tau_max.
struct AttackConfig {
  int d = 1;
  double tau_max = 1.0;
  double alpha = 0.0;
  double eta = 0.0;
  std::int64_t D = 2;    // per-dataset mass: 2 * ceil(tau_max / (1 - alpha))
  double kappa = 1.0;    // decoder bias: 1 - 4 * eta
  std::int64_t trials = 1;
  int s = 1;             // median-of-s amplification runs per trial
  // When positive and smaller than the leaf count, measure only this many
  // uniformly sampled leaf indices (keeps deep trees at desk scale).
  std::int64_t index_sample = 0;
};

// Median-of-s run count sufficient to push per-run failure eta below 1/4.
inline int amplification_count(double eta, double kappa) {
  if (!(eta >= 0.0 && eta < 0.5))
    throw input_error("amplification_count: eta must be in [0, 1/2)");
  if (!(kappa > 0.0 && kappa <= 1.0))
    throw input_error("amplification_count: kappa must be in (0, 1]");
  double gap = 0.5 - eta;
  return static_cast<int>(
      std::ceil(std::log(4.0 / kappa) / (2.0 * gap * gap)));
}

// Builds a validated AttackConfig; D and kappa follow from the inputs.
inline AttackConfig attack_config(int d, double tau_max, double alpha,
                                  double eta, std::int64_t trials, int s,
                                  std::int64_t index_sample = 0) {
  if (d < 1) throw input_error("attack_config: depth must be >= 1");
  if (!(tau_max > 0.0) || !std::isfinite(tau_max))
    throw input_error("attack_config: tau_max must be finite and > 0");
  if (!(alpha >= 0.0 && alpha < 1.0))
    throw input_error("attack_config: alpha must be in [0, 1)");
  if (!(eta >= 0.0 && eta <= 0.125))
    throw input_error(
        "attack_config: eta must be in [0, 1/8] so the decoder bias "
        "kappa = 1 - 4*eta stays in [1/2, 1]");
  if (trials < 1) throw input_error("attack_config: trials must be >= 1");
  if (s < 1) throw input_error("attack_config: s must be >= 1");
  if (index_sample < 0)
    throw input_error("attack_config: index_sample must be >= 0");
  AttackConfig cfg;
  cfg.d = d;
  cfg.tau_max = tau_max;
  cfg.alpha = alpha;
  cfg.eta = eta;
  cfg.D = 2 * static_cast<std::int64_t>(std::ceil(tau_max / (1.0 - alpha)));
  cfg.kappa = 1.0 - 4.0 * eta;
  cfg.trials = trials;
  cfg.s = s;
  cfg.index_sample = index_sample;
  return cfg;
}

// The i-th packing dataset on the complete binary tree of depth d: leaf i
// (1-based, left to right) holds D/2, every other leaf holds 0.
inline LeafCounts packing_dataset(int d, std::int64_t D,
                                  std::int64_t leaf_index) {
  if (d < 1 || d > 62) throw input_error("packing_dataset: bad depth");
  if (D < 2 || D % 2 != 0)
    throw input_error("packing_dataset: D must be even and >= 2");
  std::int64_t n_leaves = std::int64_t{1} << (d - 1);
  if (leaf_index < 1 || leaf_index > n_leaves)
    throw input_error("packing_dataset: leaf index out of range");
  std::int64_t first_leaf_heap = n_leaves;  // heap index of the leftmost leaf
  LeafCounts counts;
  for (std::int64_t i = 1; i <= n_leaves; ++i) {
    counts.values["n" + std::to_string(first_leaf_heap - 1 + i)] =
        (i == leaf_index) ? D / 2 : 0;
  }
  return counts;
}

// Biased random walk from the root of the complete binary tree of depth d:
// at each internal node, compare both children's estimates against tau_max;
// if exactly one clears it, step there with probability kappa, otherwise
// pick uniformly. Returns the 1-based index of the leaf reached. Estimates
// are in canonical order for complete_binary(d) (heap order n1, n2, ...).
inline std::int64_t decode(const NodeEstimates& estimates, int d,
                           double tau_max, double kappa, RngState& rng) {
  if (d < 1 || d > 62) throw input_error("decode: bad depth");
  if (!(kappa >= 0.0 && kappa <= 1.0))
    throw input_error("decode: kappa must be in [0, 1]");
  std::int64_t n_nodes = (std::int64_t{1} << d) - 1;
  if (static_cast<std::int64_t>(estimates.value.size()) != n_nodes)
    throw input_error(
        "decode: estimates do not cover the complete binary tree of depth " +
        std::to_string(d));
  std::int64_t first_leaf_heap = std::int64_t{1} << (d - 1);
  std::int64_t a = 1;
  while (a < first_leaf_heap) {
    std::int64_t left = 2 * a, right = 2 * a + 1;
    bool left_high =
        estimates.value[static_cast<std::size_t>(left - 1)] >= tau_max;
    bool right_high =
        estimates.value[static_cast<std::size_t>(right - 1)] >= tau_max;
    double u = rng.uniform01();  // exactly one draw per step, every branch
    if (left_high == right_high) {
      a = (u < 0.5) ? left : right;
    } else {
      std::int64_t favored = left_high ? left : right;
      std::int64_t other = left_high ? right : left;
      a = (u < kappa) ? favored : other;
    }
  }
  return a - (first_leaf_heap - 1);
}

// Per-leaf-index empirical success of decode(mechanism(packing dataset)).
struct AttackReport {
  struct Row {
    std::int64_t leaf_index = 0;
    std::int64_t successes = 0;
    std::int64_t trials = 0;
    double rate = 0.0;
    double wilson = 0.0;  // z = 1 half-width
  };
  std::vector<Row> per_index;
  double overall_rate = 0.0;
  double overall_stderr = 0.0;
  // The packing argument's guarantee for any mechanism meeting the
  // (alpha, eta)-accuracy contract at uniform thresholds tau_max:
  // (1/4) * 2^{-(d-1) * H(4 eta)}.
  double analytic_floor = 0.0;
  std::int64_t trials_per_index = 0;
  int s = 1;
};

// Runs the reconstruction attack: for each measured leaf index i, release
// the packing dataset x^i through the mechanism (entry-wise median of s
// independent runs when s > 1), decode, and count how often the walk lands
// back on i.
inline AttackReport attack_success_rate(const Mechanism& mechanism,
                                        const AttackConfig& config,
                                        RngState rng) {
  if (config.d < 1) throw input_error("attack_success_rate: bad depth");
  if (!(config.kappa >= 0.5 && config.kappa <= 1.0))
    throw input_error(
        "attack_success_rate: config violates kappa in [1/2, 1]");
  if (config.D < 2 || config.D % 2 != 0)
    throw input_error("attack_success_rate: config violates D even >= 2");
  if (config.trials < 1 || config.s < 1)
    throw input_error("attack_success_rate: trials and s must be >= 1");
  TreeShape tree = complete_binary(config.d);
  std::int64_t n_leaves = std::int64_t{1} << (config.d - 1);
  std::size_t n_nodes = static_cast<std::size_t>(tree.node_count());

  // Indices to measure: all of them, or a uniform sample without
  // replacement drawn from a dedicated stream (split key 0; per-index
  // streams use the 1-based index so they never collide).
  std::vector<std::int64_t> indices;
  if (config.index_sample > 0 && config.index_sample < n_leaves) {
    std::vector<std::int64_t> pool(static_cast<std::size_t>(n_leaves));
    for (std::int64_t i = 0; i < n_leaves; ++i)
      pool[static_cast<std::size_t>(i)] = i + 1;
    RngState pick = rng.split(0);
    for (std::int64_t k = 0; k < config.index_sample; ++k) {
      std::int64_t j =
          k + static_cast<std::int64_t>(pick.uniform01() *
                                        static_cast<double>(n_leaves - k));
      j = std::min(j, n_leaves - 1);
      std::swap(pool[static_cast<std::size_t>(k)],
                pool[static_cast<std::size_t>(j)]);
    }
    indices.assign(pool.begin(), pool.begin() + config.index_sample);
    std::sort(indices.begin(), indices.end());
  } else {
    indices.resize(static_cast<std::size_t>(n_leaves));
    for (std::int64_t i = 0; i < n_leaves; ++i)
      indices[static_cast<std::size_t>(i)] = i + 1;
  }

  AttackReport report;
  report.trials_per_index = config.trials;
  report.s = config.s;
  report.analytic_floor =
      0.25 * std::pow(2.0, -(config.d - 1) * binary_entropy(4.0 * config.eta));

  std::int64_t total_successes = 0;
  std::vector<NodeEstimates> runs(static_cast<std::size_t>(config.s));
  std::vector<double> column(static_cast<std::size_t>(config.s));
  for (std::int64_t idx : indices) {
    NodeWeights weights =
        aggregate_exact(tree, packing_dataset(config.d, config.D, idx));
    RngState idx_rng = rng.split(static_cast<std::uint64_t>(idx));
    std::int64_t successes = 0;
    for (std::int64_t t = 0; t < config.trials; ++t) {
      RngState trial_rng = idx_rng.split(static_cast<std::uint64_t>(t));
      for (int k = 0; k < config.s; ++k)
        runs[static_cast<std::size_t>(k)] = mechanism(
            tree, weights, trial_rng.split(static_cast<std::uint64_t>(k)));
      NodeEstimates released;
      if (config.s == 1) {
        released = std::move(runs[0]);
      } else {
        released.value.resize(n_nodes);
        for (std::size_t v = 0; v < n_nodes; ++v) {
          for (int k = 0; k < config.s; ++k)
            column[static_cast<std::size_t>(k)] =
                runs[static_cast<std::size_t>(k)].value[v];
          std::sort(column.begin(), column.end());
          std::size_t m = column.size();
          released.value[v] = (m % 2 == 1)
                                  ? column[m / 2]
                                  : 0.5 * (column[m / 2 - 1] + column[m / 2]);
        }
      }
      RngState walk_rng =
          trial_rng.split(static_cast<std::uint64_t>(config.s));
      if (decode(released, config.d, config.tau_max, config.kappa,
                 walk_rng) == idx)
        ++successes;
    }
    total_successes += successes;
    report.per_index.push_back(
        {idx, successes, config.trials,
         static_cast<double>(successes) / static_cast<double>(config.trials),
         wilson_halfwidth(successes, config.trials, 1.0)});
  }
  std::int64_t total_trials =
      config.trials * static_cast<std::int64_t>(indices.size());
  report.overall_rate =
      static_cast<double>(total_successes) / static_cast<double>(total_trials);
  report.overall_stderr =
      std::sqrt(report.overall_rate * (1.0 - report.overall_rate) /
                static_cast<double>(total_trials));
  return report;
}

// Certified nuclear-norm witness for the subtree-sum matrix of the complete
// binary tree of depth d, evaluated from its closed-form eigensystem.
// With n = 2^{d-1} leaves and lambda = 1/(n*d):
//   - the all-ones direction has eigenvalue lambda * sum_{j=0}^{d-1} 2^{d-1-2j};
//   - each internal node at 0-indexed depth l contributes one eigenvector
//     with eigenvalue lambda * sum_{j=l+1}^{d-1} 2^{d-1-2j}.
// The witness value is sqrt(all-ones eigenvalue)
// + sum_{l=0}^{d-2} 2^l * sqrt(level-l eigenvalue), and the eigenvector
// count 1 + sum_{l=0}^{d-2} 2^l = n is asserted to be complete.
inline double gamma2_witness_value(int d) {
  if (d < 1) throw input_error("gamma2_witness_value: depth must be >= 1");
  if (d > 62)
    throw resource_error("gamma2_witness_value: depth above 62 overflows "
                         "exact index arithmetic");
  double n = std::ldexp(1.0, d - 1);
  double lambda = 1.0 / (n * static_cast<double>(d));
  auto tail = [&](int from) {
    double s = 0.0;
    for (int j = from; j <= d - 1; ++j) s += std::ldexp(1.0, d - 1 - 2 * j);
    return s;
  };
  std::int64_t eigvec_count = 1;
  for (int l = 0; l <= d - 2; ++l) eigvec_count += std::int64_t{1} << l;
  if (eigvec_count != (std::int64_t{1} << (d - 1)))
    throw std::logic_error("gamma2_witness_value: eigenvector count is not "
                           "the full leaf count");
  double value = std::sqrt(lambda * tail(0));
  for (int l = 0; l <= d - 2; ++l)
    value += std::ldexp(1.0, l) * std::sqrt(lambda * tail(l + 1));
  return value;
}

// Brute-force oracle for the same witness: materialize
// U[u][i] = [leaf i under node u] / sqrt(2^{depth(u)} * d * n) and sum the
// singular values via a dense symmetric eigen-decomposition of U^T U.
inline double nuclear_norm_bruteforce(int d) {
  if (d < 1) throw input_error("nuclear_norm_bruteforce: depth must be >= 1");
  if (d > 8)
    throw resource_error(
        "nuclear_norm_bruteforce: depth above 8 is past the dense cap");
  std::int64_t n_nodes = (std::int64_t{1} << d) - 1;
  std::int64_t n_leaves = std::int64_t{1} << (d - 1);
  double un = 1.0 / std::sqrt(static_cast<double>(n_leaves));
  Eigen::MatrixXd U(n_nodes, n_leaves);
  U.setZero();
  for (std::int64_t a = 1; a <= n_nodes; ++a) {
    int depth0 = 0;
    while ((std::int64_t{1} << (depth0 + 1)) <= a) ++depth0;
    double va =
        1.0 / std::sqrt(std::ldexp(1.0, depth0) * static_cast<double>(d));
    for (std::int64_t i = 1; i <= n_leaves; ++i) {
      std::int64_t leaf_heap = n_leaves - 1 + i;
      // Leaf i sits under node a iff shifting its heap index up to a's
      // depth lands exactly on a.
      if ((leaf_heap >> ((d - 1) - depth0)) == a)
        U(a - 1, i - 1) = va * un;
    }
  }
  Eigen::MatrixXd gram = U.transpose() * U;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("nuclear_norm_bruteforce: eigensolver failed");
  double total = 0.0;
  for (Eigen::Index k = 0; k < solver.eigenvalues().size(); ++k)
    total += std::sqrt(std::max(0.0, solver.eigenvalues()[k]));
  return total;
}

}  // namespace treedp
