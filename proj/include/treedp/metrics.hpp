// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "treedp/errors.hpp"
#include "treedp/hierarchy.hpp"
#include "treedp/rng.hpp"
#include "treedp/tree.hpp"

namespace treedp {

// A randomized release being measured: maps exact weights to estimates
// using the supplied stream. Must be re-runnable (each trial gets a fresh
// split stream).
using Mechanism = std::function<NodeEstimates(
    const TreeShape&, const NodeWeights&, RngState)>;

// A Monte Carlo point estimate with its standard error.
struct McEstimate {
  double value = 0.0;
  double stderr_ = 0.0;
  std::int64_t trials = 0;
};

// Half-width of the Wilson score interval for k successes out of n at z
// standard normal units. Well-defined for k = 0 and k = n (never zero
// unless n is huge), which is why it backs the acceptance margins.
inline double wilson_halfwidth(std::int64_t successes, std::int64_t n,
                               double z) {
  if (n < 1) throw input_error("wilson_halfwidth: n must be >= 1");
  if (successes < 0 || successes > n)
    throw input_error("wilson_halfwidth: successes outside [0, n]");
  double nn = static_cast<double>(n);
  double p = static_cast<double>(successes) / nn;
  double z2 = z * z;
  return z * std::sqrt(p * (1.0 - p) / nn + z2 / (4.0 * nn * nn)) /
         (1.0 + z2 / nn);
}

// One metric value for one node; ErrorReport rows serialize to CSV as
// (node_id, metric, value, stderr, trials).
struct ErrorReport {
  struct Row {
    std::string node_id;
    std::string metric;
    double value = 0.0;
    double stderr_ = 0.0;
    std::int64_t trials = 0;
  };
  std::vector<Row> rows;
  // Nodes whose accuracy failure rate exceeded eta by more than one Wilson
  // margin (filled by accuracy_check).
  std::vector<std::string> flagged;
};

namespace detail {

// sqrt of a mean of squares plus its delta-method standard error.
inline McEstimate rmse_from_squares(double sum_sq, double sum_sq2,
                                    std::int64_t n) {
  double m2 = sum_sq / static_cast<double>(n);
  double var_sq =
      std::max(0.0, sum_sq2 / static_cast<double>(n) - m2 * m2);
  double se_m2 = std::sqrt(var_sq / static_cast<double>(n));
  McEstimate out;
  out.trials = n;
  out.value = std::sqrt(std::max(0.0, m2));
  out.stderr_ = out.value > 0.0 ? se_m2 / (2.0 * out.value)
                                : std::sqrt(se_m2);
  return out;
}

}  // namespace detail

// Root-mean-square of the residual left after an alpha fraction of the true
// value is forgiven: sqrt(E[max{|w~ - w| - alpha*w, 0}^2]) at one node,
// estimated over `trials` runs of the mechanism.
inline McEstimate rmse_alpha_mc(const Mechanism& mechanism,
                                const TreeShape& tree,
                                const NodeWeights& weights, int node,
                                double alpha, std::int64_t trials,
                                RngState rng) {
  if (trials < 1) throw input_error("rmse_alpha_mc: trials must be >= 1");
  if (node < 0 || node >= tree.node_count())
    throw input_error("rmse_alpha_mc: node index out of range");
  if (!(alpha >= 0.0)) throw input_error("rmse_alpha_mc: alpha must be >= 0");
  double w = static_cast<double>(weights.w[static_cast<std::size_t>(node)]);
  double sum_sq = 0.0, sum_sq2 = 0.0;
  for (std::int64_t t = 0; t < trials; ++t) {
    NodeEstimates est =
        mechanism(tree, weights, rng.split(static_cast<std::uint64_t>(t)));
    double r = std::max(
        std::abs(est.value[static_cast<std::size_t>(node)] - w) - alpha * w,
        0.0);
    sum_sq += r * r;
    sum_sq2 += r * r * r * r;
  }
  return detail::rmse_from_squares(sum_sq, sum_sq2, trials);
}

inline McEstimate rmse_alpha_mc(const Mechanism& mechanism,
                                const TreeShape& tree,
                                const LeafCounts& counts,
                                const std::string& node_id, double alpha,
                                std::int64_t trials, RngState rng) {
  return rmse_alpha_mc(mechanism, tree, aggregate_exact(tree, counts),
                       tree.index_of(node_id), alpha, trials, rng);
}

// One declared input of an mRMSE suite. Non-owning views; the caller keeps
// the tree and counts alive.
struct SuiteEntry {
  const TreeShape* tree = nullptr;
  const LeafCounts* counts = nullptr;
  std::string label;
};

// Max over suite inputs and nodes of rmse_alpha_mc. The true max is over
// every possible input, which no experiment can sweep; this measures the
// declared suite only. Rows: one "rmse_alpha:<label>" per node per input,
// plus a final "mrmse_alpha" row at the arg-max node.
inline ErrorReport mrmse_over_suite(const Mechanism& mechanism,
                                    const std::vector<SuiteEntry>& suite,
                                    double alpha, std::int64_t trials,
                                    RngState rng) {
  if (suite.empty()) throw input_error("mrmse_over_suite: empty suite");
  if (trials < 1) throw input_error("mrmse_over_suite: trials must be >= 1");
  ErrorReport report;
  double best = -1.0;
  ErrorReport::Row best_row;
  for (std::size_t q = 0; q < suite.size(); ++q) {
    const SuiteEntry& entry = suite[q];
    if (entry.tree == nullptr || entry.counts == nullptr)
      throw input_error("mrmse_over_suite: null suite entry");
    const TreeShape& tree = *entry.tree;
    NodeWeights weights = aggregate_exact(tree, *entry.counts);
    std::size_t n = static_cast<std::size_t>(tree.node_count());
    std::vector<double> sum_sq(n, 0.0), sum_sq2(n, 0.0);
    RngState entry_rng = rng.split(static_cast<std::uint64_t>(q));
    for (std::int64_t t = 0; t < trials; ++t) {
      NodeEstimates est = mechanism(
          tree, weights, entry_rng.split(static_cast<std::uint64_t>(t)));
      for (std::size_t v = 0; v < n; ++v) {
        double r = std::max(std::abs(est.value[v] -
                                     static_cast<double>(weights.w[v])) -
                                alpha * static_cast<double>(weights.w[v]),
                            0.0);
        sum_sq[v] += r * r;
        sum_sq2[v] += r * r * r * r;
      }
    }
    for (std::size_t v = 0; v < n; ++v) {
      McEstimate e = detail::rmse_from_squares(sum_sq[v], sum_sq2[v], trials);
      ErrorReport::Row row{tree.id_of(static_cast<int>(v)),
                           "rmse_alpha:" + entry.label, e.value, e.stderr_,
                           e.trials};
      if (e.value > best) {
        best = e.value;
        best_row = row;
      }
      report.rows.push_back(std::move(row));
    }
  }
  best_row.metric = "mrmse_alpha";
  report.rows.push_back(std::move(best_row));
  return report;
}

// Per-node empirical failure frequency of the accuracy contract
// |w~_u - w_u| <= alpha * max{w_u, tau_u}. Rows: "fail_rate" per node with
// a one-Wilson-margin (z = 1) standard error column; nodes exceeding
// eta + one margin land in `flagged`.
inline ErrorReport accuracy_check(const Mechanism& mechanism,
                                  const TreeShape& tree,
                                  const LeafCounts& counts,
                                  const AccuracySpec& spec,
                                  std::int64_t trials, RngState rng) {
  if (trials < 1) throw input_error("accuracy_check: trials must be >= 1");
  if (spec.tau.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("accuracy_check: spec does not match tree");
  NodeWeights weights = aggregate_exact(tree, counts);
  std::size_t n = static_cast<std::size_t>(tree.node_count());
  std::vector<std::int64_t> fails(n, 0);
  for (std::int64_t t = 0; t < trials; ++t) {
    NodeEstimates est =
        mechanism(tree, weights, rng.split(static_cast<std::uint64_t>(t)));
    for (std::size_t v = 0; v < n; ++v) {
      double w = static_cast<double>(weights.w[v]);
      double allowed = spec.alpha * std::max(w, spec.tau[v]);
      if (std::abs(est.value[v] - w) > allowed) ++fails[v];
    }
  }
  ErrorReport report;
  for (std::size_t v = 0; v < n; ++v) {
    double rate = static_cast<double>(fails[v]) / static_cast<double>(trials);
    double margin = wilson_halfwidth(fails[v], trials, 1.0);
    report.rows.push_back({tree.id_of(static_cast<int>(v)), "fail_rate",
                           rate, margin, trials});
    if (rate > spec.eta + margin)
      report.flagged.push_back(tree.id_of(static_cast<int>(v)));
  }
  return report;
}

// Smoothed relative error at one node: E[|z~ - z|] / max{z, kappa} over
// stored trial outputs.
inline McEstimate rel_kappa(const std::vector<double>& estimate_samples,
                            double true_value, double kappa) {
  if (!(kappa > 0.0)) throw input_error("rel_kappa: kappa must be > 0");
  if (estimate_samples.empty())
    throw input_error("rel_kappa: no samples given");
  double n = static_cast<double>(estimate_samples.size());
  double sum = 0.0, sum2 = 0.0;
  for (double z : estimate_samples) {
    double a = std::abs(z - true_value);
    sum += a;
    sum2 += a * a;
  }
  double mean = sum / n;
  double var = std::max(0.0, sum2 / n - mean * mean);
  double denom = std::max(true_value, kappa);
  McEstimate out;
  out.value = mean / denom;
  out.stderr_ = std::sqrt(var / n) / denom;
  out.trials = estimate_samples.size();
  return out;
}

}  // namespace treedp
