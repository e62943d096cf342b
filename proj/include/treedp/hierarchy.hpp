// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "treedp/errors.hpp"
#include "treedp/noise.hpp"
#include "treedp/rng.hpp"
#include "treedp/svt.hpp"
#include "treedp/tree.hpp"

namespace treedp {

// Target accuracy for a release: with probability >= 1 - eta per node,
// |w~_u - w_u| <= alpha * max{w_u, tau_u}. Thresholds tau_u are per node;
// smaller thresholds are a stronger demand.
struct AccuracySpec {
  double alpha = 0.0;
  double eta = 0.0;
  std::vector<double> tau;  // aligned with TreeShape node indices
  double tau_min = 0.0;
  double tau_max = 0.0;

  static AccuracySpec uniform(const TreeShape& tree, double alpha, double eta,
                              double tau) {
    return from_thresholds(
        tree, alpha, eta,
        std::vector<double>(static_cast<std::size_t>(tree.node_count()), tau));
  }

  static AccuracySpec from_thresholds(const TreeShape& tree, double alpha,
                                      double eta, std::vector<double> tau) {
    if (!(alpha > 0.0 && alpha < 1.0))
      throw input_error("accuracy spec: alpha must be in (0, 1)");
    if (!(eta > 0.0 && eta < 1.0))
      throw input_error("accuracy spec: eta must be in (0, 1)");
    if (tau.size() != static_cast<std::size_t>(tree.node_count()))
      throw input_error("accuracy spec: one threshold per node required");
    AccuracySpec spec;
    spec.alpha = alpha;
    spec.eta = eta;
    spec.tau_min = std::numeric_limits<double>::infinity();
    spec.tau_max = 0.0;
    for (double t : tau) {
      if (!(t >= 0.0) || !std::isfinite(t))
        throw input_error("accuracy spec: thresholds must be finite and >= 0");
      spec.tau_min = std::min(spec.tau_min, t);
      spec.tau_max = std::max(spec.tau_max, t);
    }
    spec.tau = std::move(tau);
    return spec;
  }
};

// Classification output: one above/below-threshold verdict per node.
struct Labels {
  std::vector<std::uint8_t> is_top;  // aligned with TreeShape node indices
};

// Nodes labeled top all of whose children are non-top. Since top labels are
// upward-closed within a classified tree, these are the minimal top nodes;
// every top node is one of these or an ancestor of one.
inline std::vector<int> transition_nodes(const TreeShape& tree,
                                         const Labels& labels) {
  if (labels.is_top.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("transition_nodes: labels do not match tree");
  std::vector<int> out;
  for (int v = 0; v < tree.node_count(); ++v) {
    if (!labels.is_top[static_cast<std::size_t>(v)]) continue;
    bool has_top_child = false;
    for (int ch : tree.children_of(v))
      if (labels.is_top[static_cast<std::size_t>(ch)]) {
        has_top_child = true;
        break;
      }
    if (!has_top_child) out.push_back(v);
  }
  return out;
}

// Smallest threshold tau for which classify_tree certifies its accuracy
// contract at the given parameters (d = depth of the tree being classified).
// Privacy never depends on this bound; only the utility contract does.
inline double classify_min_tau(double M, double alpha, double eps,
                               double delta, double eta, int d) {
  double a = std::min(alpha, 0.5);
  double lead = std::sqrt(2.0 * M / (a * eps));
  double t1 = std::sqrt(48.0 * std::log(2.0 * d / eta));
  double t2 = std::sqrt(6.0 * std::log1p(std::expm1(eps / 2.0) / delta));
  return lead * std::max(t1, t2);
}

namespace detail {

// Classifies the subtree rooted at `root` against threshold tau, writing
// verdicts into `work` (-1 = unlabeled, 0 = bottom, 1 = top). Assumes every
// node of the subtree starts unlabeled. One sparse-vector session with top
// budget c = M/((1-alpha)tau) and budget eps/2 asks, per depth from the
// deepest up to the root, whether any still-unlabeled node at that depth
// reaches tau; on a top answer every such node is tested individually with
// truncated Laplace noise (budget eps/2 across all top answers), and a
// passing node is marked top together with all its ancestors up to `root`.
inline void classify_element(const TreeShape& tree, const NodeWeights& w,
                             int root, double M, double eta, double alpha,
                             double tau, double eps, double delta,
                             RngState rng, std::vector<signed char>& work) {
  alpha = std::min(alpha, 0.5);

  // Nodes of the subtree bucketed by depth relative to `root`.
  std::vector<std::vector<int>> levels;
  levels.push_back({root});
  for (std::size_t i = 0; i < levels.size(); ++i) {
    std::vector<int> next;
    for (int v : levels[i])
      for (int ch : tree.children_of(v)) next.push_back(ch);
    if (next.empty()) break;
    levels.push_back(std::move(next));
  }
  int dt = static_cast<int>(levels.size());

  if (M < tau) {  // nothing can reach tau: everything below, no noise drawn
    for (const auto& level : levels)
      for (int v : level) work[static_cast<std::size_t>(v)] = 0;
    return;
  }

  double c = M / ((1.0 - alpha) * tau);
  SvtSession svt(eta, c, tau, eps / 2.0, dt, rng.split(0));
  double delta_band = svt.accuracy_radius();  // 16c/eps * ln(2*dt/eta)
  double radius =
      2.0 * c / eps * std::log1p(c * std::expm1(eps / (2.0 * c)) / delta);
  TruncLapParams tl(2.0 * c / eps, radius);
  RngState node_rng = rng.split(1);

  for (int i = dt - 1; i >= 0; --i) {
    double level_max = -std::numeric_limits<double>::infinity();
    for (int v : levels[static_cast<std::size_t>(i)])
      if (work[static_cast<std::size_t>(v)] == -1)
        level_max = std::max(
            level_max, static_cast<double>(w.w[static_cast<std::size_t>(v)]));
    if (level_max == -std::numeric_limits<double>::infinity())
      continue;  // level fully labeled already: no query, no draw

    if (!svt.answer(level_max)) {
      for (int v : levels[static_cast<std::size_t>(i)])
        if (work[static_cast<std::size_t>(v)] == -1)
          work[static_cast<std::size_t>(v)] = 0;
      continue;
    }
    for (int u : levels[static_cast<std::size_t>(i)]) {
      if (work[static_cast<std::size_t>(u)] != -1) continue;
      double noisy = static_cast<double>(w.w[static_cast<std::size_t>(u)]) +
                     sample_trunc_laplace(tl, node_rng);
      if (noisy >= tau - delta_band - radius) {
        for (int v = u;; v = tree.parent_of(v)) {
          work[static_cast<std::size_t>(v)] = 1;
          if (v == root) break;
        }
      } else {
        work[static_cast<std::size_t>(u)] = 0;
      }
    }
  }

  for (const auto& level : levels)
    for (int v : level)
      if (work[static_cast<std::size_t>(v)] == -1)
        throw std::logic_error("classify_element: node left unlabeled");
}

}  // namespace detail

// Labels every node of `tree` as top (subtree sum plausibly >= tau) or
// bottom. (eps, delta)-DP unconditionally. If the root weight is at most M,
// then with probability >= 1 - eta: every node with w_u >= (1+alpha)tau is
// top and every node with w_u < (1-alpha)tau is bottom. The certified range
// requires tau >= classify_min_tau(...); violations are refused unless
// `force` (privacy still holds under force, the accuracy contract does not).
inline Labels classify_tree(const TreeShape& tree, const NodeWeights& weights,
                            double M, double eta, double alpha, double tau,
                            double eps, double delta, RngState rng,
                            bool force = false) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw input_error("classify: alpha must be in (0, 1)");
  if (!(eta > 0.0 && eta < 0.5))
    throw input_error("classify: eta must be in (0, 1/2)");
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw input_error("classify: eps must be finite and > 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw input_error("classify: delta must be in (0, 1)");
  if (!(tau >= 0.0) || !std::isfinite(tau))
    throw input_error("classify: tau must be finite and >= 0");
  if (!(M > 0.0) || !std::isfinite(M))
    throw input_error("classify: M must be finite and > 0");
  if (weights.w.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("classify: weights do not match tree");
  double min_tau =
      classify_min_tau(M, alpha, eps, delta, eta, tree.depth());
  if (!force && tau < min_tau)
    throw precondition_error(
        "classify: tau = " + std::to_string(tau) +
        " is below the certified minimum " + std::to_string(min_tau) +
        " for these parameters; raise tau (or pass force to run anyway "
        "with privacy intact but no accuracy contract)");

  std::vector<signed char> work(static_cast<std::size_t>(tree.node_count()),
                                -1);
  detail::classify_element(tree, weights, tree.root(), M, eta, alpha, tau,
                           eps, delta, rng.split(0), work);
  Labels out;
  out.is_top.resize(work.size());
  for (std::size_t i = 0; i < work.size(); ++i)
    out.is_top[i] = work[i] == 1 ? 1 : 0;
  return out;
}

inline Labels classify_tree(const TreeShape& tree, const LeafCounts& counts,
                            double M, double eta, double alpha, double tau,
                            double eps, double delta, RngState rng,
                            bool force = false) {
  return classify_tree(tree, aggregate_exact(tree, counts), M, eta, alpha,
                       tau, eps, delta, rng, force);
}

// Classifies each tree of a node-disjoint forest with the same parameters.
// Parallel composition over the disjoint trees keeps the whole call
// (eps, delta)-DP; the accuracy contract holds per tree with probability
// >= 1 - eta. `counts` may mention leaves of any tree; every id must belong
// to exactly one tree.
inline std::vector<Labels> classify_forest(
    const std::vector<TreeShape>& forest, const LeafCounts& counts, double M,
    double eta, double alpha, double tau, double eps, double delta,
    RngState rng, bool force = false) {
  if (forest.empty()) throw input_error("classify_forest: empty forest");
  std::set<std::string> seen;
  for (const auto& tree : forest)
    for (int v = 0; v < tree.node_count(); ++v)
      if (!seen.insert(tree.id_of(v)).second)
        throw input_error("classify_forest: node id '" + tree.id_of(v) +
                          "' appears in more than one tree");
  std::vector<LeafCounts> split(forest.size());
  for (const auto& [id, value] : counts.values) {
    bool placed = false;
    for (std::size_t j = 0; j < forest.size(); ++j)
      if (forest[j].contains(id)) {
        split[j].values.emplace(id, value);
        placed = true;
        break;
      }
    if (!placed)
      throw input_error("classify_forest: count id '" + id +
                        "' belongs to no tree");
  }
  std::vector<Labels> out;
  out.reserve(forest.size());
  for (std::size_t j = 0; j < forest.size(); ++j)
    out.push_back(classify_tree(forest[j], split[j], M, eta, alpha, tau, eps,
                                delta, rng.split(static_cast<std::uint64_t>(j)),
                                force));
  return out;
}

// Smallest uniform threshold under which estimate() certifies its accuracy
// contract for depth-d trees at the given parameters.
inline double estimate_min_tau(double alpha, double eps, double delta,
                               double eta, int d) {
  double lead = 324.0 * (1.0 + alpha) * (1.0 + alpha) /
                (alpha * alpha * alpha * alpha * eps);
  double t1 = 8.0 * std::log(4.0 * d / eta);
  double t2 = std::log1p(2.0 * std::expm1(eps / 4.0) / delta);
  return lead * std::max(t1, t2);
}

// The level plan the estimation pipeline runs: geometrically growing
// thresholds tau_i and root bounds M_i with per-level budgets
// (eps_i, delta_i) and failure shares eta_i. All arrays are 1-based over
// levels 1..ell; index 0 is unused except M[0], the base estimate assigned
// to everything never classified above a threshold.
//
// Constraints kept by construction and revalidated before use (an index in
// an error message refers to this list):
//   (1) per level, tau_i is at least the classification minimum for
//       (M_i, beta, eps_i, delta_i, eta_i) at depth d;
//   (2) the failure shares eta_i sum to at most eta;
//   (3) chaining: M_i >= (1+beta) tau_{i+1} for i < ell, and M_ell >= M;
//   (4) sandwich: (1-beta) tau_i <= M_i <= (1+alpha)(1-beta) tau_i;
//   (5) base: 0 <= M_0 <= alpha * tau_min.
// Budgets: sum eps_i <= eps/2 and sum delta_i <= delta/2 (the other halves
// pay for the private root bound in estimate()).
struct ScheduleParams {
  int ell = 0;
  double beta = 0.0;
  double growth = 0.0;  // r > 1: ratio of consecutive thresholds
  double C = 0.0;       // sum over i >= 1 of i * (1/r)^(i-1) = (1 - 1/r)^-2
  double alpha = 0.0;
  int d = 0;
  double tau_min = 0.0;
  double root_bound = 0.0;    // M: certified upper bound on the root weight
  double eps_budget = 0.0;    // full eps of the enclosing release
  double delta_budget = 0.0;  // full delta of the enclosing release
  double eta_budget = 0.0;
  bool forced = false;  // built under --force: accuracy contract void
  std::vector<double> tau, M, eps, delta, eta;  // [0..ell], see above
};

// Throws precondition_error naming the violated constraint (numbered as in
// the ScheduleParams comment) and level.
inline void validate_schedule(const ScheduleParams& s) {
  const double tol = 1.0 + 1e-9;
  auto fail = [](int constraint, int level, const std::string& detail) {
    throw precondition_error(
        "schedule constraint (" + std::to_string(constraint) +
        ") violated at level " + std::to_string(level) + ": " + detail);
  };
  for (int i = 1; i <= s.ell; ++i) {
    std::size_t k = static_cast<std::size_t>(i);
    double min_tau = classify_min_tau(s.M[k], s.beta, s.eps[k], s.delta[k],
                                      s.eta[k], s.d);
    if (!(s.tau[k] * tol >= min_tau))
      fail(1, i, "tau_i = " + std::to_string(s.tau[k]) +
                     " < classification minimum " + std::to_string(min_tau));
    if (!((1.0 - s.beta) * s.tau[k] <= s.M[k] * tol &&
          s.M[k] <= (1.0 + s.alpha) * (1.0 - s.beta) * s.tau[k] * tol))
      fail(4, i, "M_i = " + std::to_string(s.M[k]) + " outside [" +
                     std::to_string((1.0 - s.beta) * s.tau[k]) + ", " +
                     std::to_string((1.0 + s.alpha) * (1.0 - s.beta) *
                                    s.tau[k]) +
                     "]");
    if (i < s.ell &&
        !(s.M[k] * tol >= (1.0 + s.beta) * s.tau[k + 1]))
      fail(3, i, "M_i < (1+beta) tau_{i+1}");
  }
  if (s.ell >= 1 && !(s.M[0] * tol >= (1.0 + s.beta) * s.tau[1]))
    fail(3, 0, "M_0 < (1+beta) tau_1");
  if (!(s.M[static_cast<std::size_t>(s.ell)] * tol >= s.root_bound))
    fail(3, s.ell, "M_ell = " +
                       std::to_string(s.M[static_cast<std::size_t>(s.ell)]) +
                       " < root bound " + std::to_string(s.root_bound));
  double eta_sum = 0.0, eps_sum = 0.0, delta_sum = 0.0;
  for (int i = 1; i <= s.ell; ++i) {
    eta_sum += s.eta[static_cast<std::size_t>(i)];
    eps_sum += s.eps[static_cast<std::size_t>(i)];
    delta_sum += s.delta[static_cast<std::size_t>(i)];
  }
  if (!(eta_sum <= s.eta_budget * tol)) fail(2, 0, "sum of eta_i exceeds eta");
  if (!(s.M[0] >= 0.0 && s.M[0] <= s.alpha * s.tau_min * tol))
    fail(5, 0, "M_0 outside [0, alpha * tau_min]");
  if (!(eps_sum <= s.eps_budget / 2.0 * tol))
    throw precondition_error("schedule: sum of eps_i exceeds eps/2");
  if (!(delta_sum <= s.delta_budget / 2.0 * tol))
    throw precondition_error("schedule: sum of delta_i exceeds delta/2");
}

// Builds the level plan for root bound M. Levels: tau_i grows geometrically
// from alpha*tau_min/(1+beta) by r = (1+alpha)(1-beta)/(1+beta) per level
// until M_ell >= M. Per-level budgets eps_i = max(lambda * i * (1/r)^(i-1),
// floor_i), where floor_i is the smallest budget satisfying constraint (1)
// at level i and lambda is bisected so the total is exactly eps/2; the
// decaying-shape term spends the slack on early (small, hard) levels.
// delta_i = delta * eps_i / eps, which keeps constraint (1)'s second term
// valid level-wise and sums to at most delta/2.
inline ScheduleParams schedule_params(double alpha, double eps, double delta,
                                      double eta, double tau_min, double M,
                                      int d, bool force = false) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw input_error("schedule: alpha must be in (0, 1)");
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw input_error("schedule: eps must be finite and > 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw input_error("schedule: delta must be in (0, 1)");
  if (!(eta > 0.0 && eta < 0.5))
    throw input_error("schedule: eta must be in (0, 1/2)");
  if (!(tau_min > 0.0) || !std::isfinite(tau_min))
    throw input_error("schedule: tau_min must be finite and > 0");
  if (!(M > 0.0) || !std::isfinite(M))
    throw input_error("schedule: root bound M must be finite and > 0");
  if (d < 1) throw input_error("schedule: depth must be >= 1");

  double required = estimate_min_tau(alpha, eps, delta, eta, d);
  if (!force && tau_min < required * (1.0 - 1e-12))
    throw precondition_error(
        "schedule: tau_min = " + std::to_string(tau_min) +
        " is below the certified minimum " + std::to_string(required) +
        " for (alpha, eps, delta, eta, d); raise the thresholds (or pass "
        "force to run with privacy intact but no accuracy contract)");

  ScheduleParams s;
  s.alpha = alpha;
  s.d = d;
  s.tau_min = tau_min;
  s.root_bound = M;
  s.eps_budget = eps;
  s.delta_budget = delta;
  s.eta_budget = eta;
  s.forced = force;
  s.beta = alpha / (6.0 + 5.0 * alpha);
  s.growth = (1.0 + alpha) * (1.0 - s.beta) / (1.0 + s.beta);
  double g = 1.0 / s.growth;
  s.C = 1.0 / ((1.0 - g) * (1.0 - g));

  double base = alpha * tau_min;
  int ell = 0;
  if (M > base) {
    ell = static_cast<int>(
        std::ceil(std::log(M / base) / std::log(s.growth)));
    ell = std::max(ell, 1);
  }
  s.ell = ell;
  std::size_t n = static_cast<std::size_t>(ell) + 1;
  s.tau.assign(n, 0.0);
  s.M.assign(n, 0.0);
  s.eps.assign(n, 0.0);
  s.delta.assign(n, 0.0);
  s.eta.assign(n, 0.0);
  s.M[0] = base;
  for (int i = 1; i <= ell; ++i) {
    std::size_t k = static_cast<std::size_t>(i);
    s.tau[k] = base / (1.0 + s.beta) * std::pow(s.growth, i - 1);
    s.M[k] = base * std::pow(s.growth, i);
    s.eta[k] = eta / std::pow(2.0, i);
  }
  if (ell == 0) return s;  // M fits under alpha * tau_min: no levels needed

  // Per-level budget floors from constraint (1); the second term bounds
  // log1p(expm1(eps_i/2)/delta_i) for every eps_i <= eps/2 under the
  // delta_i coupling, since T*(e^(a/T)-1) <= e^a - 1 for T >= 1.
  double l2 = std::log1p(2.0 * std::expm1(eps / 4.0) / delta);
  std::vector<double> floor_eps(n, 0.0), shape(n, 0.0);
  double total_floor = 0.0;
  for (int i = 1; i <= ell; ++i) {
    std::size_t k = static_cast<std::size_t>(i);
    double l1 = std::log(2.0 * d / s.eta[k]);
    floor_eps[k] = std::max(96.0 * s.M[k] * l1, 12.0 * s.M[k] * l2) /
                   (s.beta * s.tau[k] * s.tau[k]);
    shape[k] = i * std::pow(g, i - 1);
    total_floor += floor_eps[k];
  }

  if (total_floor > eps / 2.0) {
    if (!force)
      throw precondition_error(
          "schedule: per-level budget floors sum to " +
          std::to_string(total_floor) + " > eps/2 = " +
          std::to_string(eps / 2.0) +
          "; raise tau_min by at least a factor of " +
          std::to_string(total_floor / (eps / 2.0)) + " (or raise eps)");
    // Forced: keep privacy by ignoring the floors and splitting eps/2
    // proportionally to the decaying shape. No accuracy contract.
    double shape_sum = 0.0;
    for (int i = 1; i <= ell; ++i)
      shape_sum += shape[static_cast<std::size_t>(i)];
    for (int i = 1; i <= ell; ++i) {
      std::size_t k = static_cast<std::size_t>(i);
      s.eps[k] = eps / 2.0 * shape[k] / shape_sum;
      s.delta[k] = delta * s.eps[k] / eps;
    }
    return s;
  }

  // Bisect lambda so that sum max(lambda * shape_i, floor_i) = eps/2.
  // lambda = eps overshoots (shape_1 = 1 alone gives eps > eps/2); keep the
  // lower end so the total never exceeds eps/2.
  double lo = 0.0, hi = eps;
  for (int iter = 0; iter < 200; ++iter) {
    double mid = 0.5 * (lo + hi);
    double total = 0.0;
    for (int i = 1; i <= ell; ++i) {
      std::size_t k = static_cast<std::size_t>(i);
      total += std::max(mid * shape[k], floor_eps[k]);
    }
    (total <= eps / 2.0 ? lo : hi) = mid;
  }
  for (int i = 1; i <= ell; ++i) {
    std::size_t k = static_cast<std::size_t>(i);
    s.eps[k] = std::max(lo * shape[k], floor_eps[k]);
    s.delta[k] = delta * s.eps[k] / eps;
  }
  if (!force) validate_schedule(s);
  return s;
}

// Runs the level plan: per level i = ell..1, classifies every tree of the
// current forest against tau_i (cutting the per-level budget), assigns M_i
// to every top node, and pushes each maximal bottom-rooted subtree (and
// every tree whose root answered bottom, wholesale) into the next round;
// whatever survives all levels gets the base value M_0. Consumes
// (sum eps_i, sum delta_i) <= (eps/2, delta/2) of the schedule's budgets.
// The caller warrants that the root weight is at most schedule.root_bound.
inline NodeEstimates reduce_estimate(const TreeShape& tree,
                                     const NodeWeights& weights,
                                     const ScheduleParams& schedule,
                                     RngState rng) {
  if (weights.w.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("reduce_estimate: weights do not match tree");
  if (schedule.d != tree.depth())
    throw input_error("reduce_estimate: schedule built for depth " +
                      std::to_string(schedule.d) + ", tree has depth " +
                      std::to_string(tree.depth()));
  if (!schedule.forced) validate_schedule(schedule);

  NodeEstimates out;
  out.value.assign(static_cast<std::size_t>(tree.node_count()), 0.0);
  std::vector<int> forest{tree.root()};
  std::vector<int> next_forest, stack;
  std::vector<signed char> work;
  for (int i = schedule.ell; i >= 1; --i) {
    std::size_t k = static_cast<std::size_t>(i);
    RngState round_rng = rng.split(static_cast<std::uint64_t>(i));
    work.assign(static_cast<std::size_t>(tree.node_count()), -1);
    next_forest.clear();
    for (std::size_t j = 0; j < forest.size(); ++j) {
      detail::classify_element(tree, weights, forest[j], schedule.M[k],
                               schedule.eta[k], schedule.beta,
                               schedule.tau[k], schedule.eps[k],
                               schedule.delta[k],
                               round_rng.split(static_cast<std::uint64_t>(j)),
                               work);
      stack.assign(1, forest[j]);
      while (!stack.empty()) {
        int v = stack.back();
        stack.pop_back();
        if (work[static_cast<std::size_t>(v)] == 1) {
          out.value[static_cast<std::size_t>(v)] = schedule.M[k];
          const auto& children = tree.children_of(v);
          for (auto it = children.rbegin(); it != children.rend(); ++it)
            stack.push_back(*it);
        } else {
          next_forest.push_back(v);  // maximal bottom subtree: next round
        }
      }
    }
    forest.swap(next_forest);
  }
  for (int root : forest) {
    stack.assign(1, root);
    while (!stack.empty()) {
      int v = stack.back();
      stack.pop_back();
      out.value[static_cast<std::size_t>(v)] = schedule.M[0];
      const auto& children = tree.children_of(v);
      for (auto it = children.rbegin(); it != children.rend(); ++it)
        stack.push_back(*it);
    }
  }
  return out;
}

inline NodeEstimates reduce_estimate(const TreeShape& tree,
                                     const LeafCounts& counts,
                                     const ScheduleParams& schedule,
                                     RngState rng) {
  return reduce_estimate(tree, aggregate_exact(tree, counts), schedule, rng);
}

struct EstimateResult {
  NodeEstimates estimates;
  double root_bound = 0.0;  // the private upper bound M on the root weight
  ScheduleParams schedule;
};

// The full pipeline: spends (eps/2, delta/2) on a truncated-Laplace upper
// bound M >= w_root (the +R shift makes the bound one-sided), builds the
// level plan for M, and spends the remaining (eps/2, delta/2) running it.
// (eps, delta)-DP; under spec's thresholds (tau_min >= estimate_min_tau)
// each node is accurate within alpha * max{w_u, tau_u} with probability
// >= 1 - eta.
inline EstimateResult estimate_with_details(const TreeShape& tree,
                                            const NodeWeights& weights,
                                            const AccuracySpec& spec,
                                            double eps, double delta,
                                            RngState rng, bool force = false) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw input_error("estimate: eps must be finite and > 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw input_error("estimate: delta must be in (0, 1)");
  if (spec.tau.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("estimate: accuracy spec does not match tree");
  if (weights.w.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("estimate: weights do not match tree");

  double radius = 2.0 / eps * std::log1p(std::expm1(eps / 2.0) / delta);
  RngState root_rng = rng.split(0);
  double root_bound =
      static_cast<double>(weights.w[static_cast<std::size_t>(tree.root())]) +
      radius + sample_trunc_laplace(TruncLapParams(2.0 / eps, radius),
                                    root_rng);
  EstimateResult result;
  result.root_bound = root_bound;
  result.schedule = schedule_params(spec.alpha, eps, delta, spec.eta,
                                    spec.tau_min, root_bound, tree.depth(),
                                    force);
  result.estimates =
      reduce_estimate(tree, weights, result.schedule, rng.split(1));
  return result;
}

inline NodeEstimates estimate(const TreeShape& tree, const LeafCounts& counts,
                              const AccuracySpec& spec, double eps,
                              double delta, RngState rng,
                              bool force = false) {
  return estimate_with_details(tree, aggregate_exact(tree, counts), spec, eps,
                               delta, rng, force)
      .estimates;
}

// Post-processes raw estimates (produced by any (eps/2, delta/2)-DP
// mechanism, the caller's contract) by clamping each into a private
// interval [w_u + z_u - R, w_u + z_u + R] around the exact weight, with
// per-node budget (eps/(2d), delta/(2d)): depth levels compose in parallel,
// the d depths sequentially, so the intervals cost (eps/2, delta/2) and the
// combined release is (eps, delta)-DP. Deterministically.
//   |out - w_u| <= |raw - w_u| and |out - w_u| <= 2R,
// since w_u itself always lies in the interval.
inline NodeEstimates clamp_to_mrmse(const TreeShape& tree,
                                    const NodeWeights& weights,
                                    const NodeEstimates& raw, double eps,
                                    double delta, RngState rng) {
  if (!(eps > 0.0) || !std::isfinite(eps))
    throw input_error("clamp: eps must be finite and > 0");
  if (!(delta > 0.0 && delta < 1.0))
    throw input_error("clamp: delta must be in (0, 1)");
  if (raw.value.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("clamp: raw estimates do not cover the tree");
  if (weights.w.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("clamp: weights do not match tree");
  double eps_node = eps / (2.0 * tree.depth());
  double delta_node = delta / (2.0 * tree.depth());
  double radius = trunc_lap_radius(eps_node, delta_node);
  TruncLapParams tl(1.0 / eps_node, radius);
  NodeEstimates out;
  out.value.resize(raw.value.size());
  for (int v = 0; v < tree.node_count(); ++v) {
    std::size_t k = static_cast<std::size_t>(v);
    if (!std::isfinite(raw.value[k]))
      throw input_error("clamp: raw estimate at node '" + tree.id_of(v) +
                        "' is not finite");
    double center = static_cast<double>(weights.w[k]) +
                    sample_trunc_laplace(tl, rng);
    out.value[k] =
        std::clamp(raw.value[k], center - radius, center + radius);
  }
  return out;
}

inline NodeEstimates clamp_to_mrmse(const TreeShape& tree,
                                    const LeafCounts& counts,
                                    const NodeEstimates& raw, double eps,
                                    double delta, RngState rng) {
  return clamp_to_mrmse(tree, aggregate_exact(tree, counts), raw, eps, delta,
                        rng);
}

}  // namespace treedp
