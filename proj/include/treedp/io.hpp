// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treedp/baselines.hpp"
#include "treedp/budget.hpp"
#include "treedp/errors.hpp"
#include "treedp/hierarchy.hpp"
#include "treedp/metrics.hpp"
#include "treedp/rng.hpp"
#include "treedp/tree.hpp"

namespace treedp {

namespace detail {

// Reads all lines; tolerates a missing final newline and trailing CR.
inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open file '" + path + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

// Splits a data line into exactly two tab-separated nonempty fields.
inline std::pair<std::string, std::string> two_fields(
    const std::string& line, const std::string& path, std::size_t lineno) {
  auto tab = line.find('\t');
  if (tab == std::string::npos || tab == 0 || tab + 1 == line.size() ||
      line.find('\t', tab + 1) != std::string::npos)
    throw input_error(path + ":" + std::to_string(lineno) +
                      ": malformed line (want exactly "
                      "'<field><TAB><field>'): '" +
                      line + "'");
  return {line.substr(0, tab), line.substr(tab + 1)};
}

inline bool skippable(const std::string& line) {
  return line.empty() || line[0] == '#';
}

inline std::int64_t parse_int64(const std::string& s, const std::string& path,
                                std::size_t lineno) {
  std::int64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw input_error(path + ":" + std::to_string(lineno) +
                      ": non-integer value '" + s + "'");
  return v;
}

inline double parse_real(const std::string& s, const std::string& path,
                         std::size_t lineno) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size())
    throw input_error(path + ":" + std::to_string(lineno) +
                      ": non-numeric value '" + s + "'");
  return v;
}

}  // namespace detail

// Tree file: one `node_id<TAB>parent_id` line per node, `-` marking the
// root's parent. Blank lines and lines starting with '#' are skipped.
inline TreeShape load_tree(const std::string& path) {
  std::vector<std::pair<std::string, std::string>> edges;
  std::size_t lineno = 0;
  for (const std::string& line : detail::read_lines(path)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    edges.push_back(detail::two_fields(line, path, lineno));
  }
  if (edges.empty()) throw input_error(path + ": no tree lines (no root)");
  return TreeShape::from_edges(edges);
}

// Counts file: `leaf_id<TAB>count` lines; leaves not mentioned count 0.
inline LeafCounts load_counts(const std::string& path, const TreeShape& tree) {
  LeafCounts counts;
  for (int leaf : tree.leaves()) counts.values[tree.id_of(leaf)] = 0;
  std::set<std::string> seen;
  std::size_t lineno = 0;
  for (const std::string& line : detail::read_lines(path)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    auto [id, value] = detail::two_fields(line, path, lineno);
    std::string where = path + ":" + std::to_string(lineno);
    if (!tree.contains(id))
      throw input_error(where + ": unknown leaf '" + id + "'");
    int idx = tree.index_of(id);
    if (!tree.is_leaf(idx))
      throw input_error(where + ": node '" + id + "' is not a leaf");
    std::int64_t v = detail::parse_int64(value, path, lineno);
    if (v < 0)
      throw input_error(where + ": negative count at leaf '" + id + "'");
    if (!seen.insert(id).second)
      throw input_error(where + ": duplicate count for leaf '" + id + "'");
    counts.values[id] = v;
  }
  return counts;
}

// Thresholds file: `node_id<TAB>tau` lines; nodes not mentioned inherit
// `fallback` (pass NaN for "no fallback": any missing node is an error).
inline std::vector<double> load_thresholds(const std::string& path,
                                           const TreeShape& tree,
                                           double fallback) {
  std::vector<double> tau(static_cast<std::size_t>(tree.node_count()),
                          fallback);
  std::set<std::string> seen;
  std::size_t lineno = 0;
  for (const std::string& line : detail::read_lines(path)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    auto [id, value] = detail::two_fields(line, path, lineno);
    std::string where = path + ":" + std::to_string(lineno);
    if (!tree.contains(id))
      throw input_error(where + ": unknown node '" + id + "'");
    if (!seen.insert(id).second)
      throw input_error(where + ": duplicate threshold for node '" + id + "'");
    tau[static_cast<std::size_t>(tree.index_of(id))] =
        detail::parse_real(value, path, lineno);
  }
  for (int v = 0; v < tree.node_count(); ++v)
    if (std::isnan(tau[static_cast<std::size_t>(v)]))
      throw input_error(path + ": node '" + tree.id_of(v) +
                        "' has no threshold and no --tau default was given");
  return tau;
}

// Estimates file: `node_id<TAB>value` lines covering every node exactly once
// (the `clamp` subcommand's raw input).
inline NodeEstimates load_estimates(const std::string& path,
                                    const TreeShape& tree) {
  NodeEstimates est;
  est.value.assign(static_cast<std::size_t>(tree.node_count()),
                   std::numeric_limits<double>::quiet_NaN());
  std::vector<bool> seen(static_cast<std::size_t>(tree.node_count()), false);
  std::size_t lineno = 0;
  for (const std::string& line : detail::read_lines(path)) {
    ++lineno;
    if (detail::skippable(line)) continue;
    auto [id, value] = detail::two_fields(line, path, lineno);
    std::string where = path + ":" + std::to_string(lineno);
    if (!tree.contains(id))
      throw input_error(where + ": unknown node '" + id + "'");
    std::size_t idx = static_cast<std::size_t>(tree.index_of(id));
    if (seen[idx])
      throw input_error(where + ": duplicate estimate for node '" + id + "'");
    seen[idx] = true;
    est.value[idx] = detail::parse_real(value, path, lineno);
  }
  for (int v = 0; v < tree.node_count(); ++v)
    if (!seen[static_cast<std::size_t>(v)])
      throw input_error(path + ": missing estimate for node '" +
                        tree.id_of(v) + "'");
  return est;
}

// Shortest-but-exact double rendering; stable across runs for byte-identical
// outputs under a fixed seed.
inline std::string format_double(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Writes via a temp file and a rename so failures never leave a partial
// output behind.
inline void atomic_write_file(const std::string& path,
                              const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw input_error("cannot write file '" + tmp + "'");
    out << content;
    out.flush();
    if (!out) {
      out.close();
      std::remove(tmp.c_str());
      throw input_error("failed while writing '" + tmp + "'");
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw input_error("cannot move '" + tmp + "' to '" + path + "'");
  }
}

inline void write_estimates_tsv(const std::string& path, const TreeShape& tree,
                                const NodeEstimates& est) {
  if (est.value.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("write_estimates_tsv: estimates do not match tree");
  std::string out;
  for (int v = 0; v < tree.node_count(); ++v) {
    out += tree.id_of(v);
    out += '\t';
    out += format_double(est.value[static_cast<std::size_t>(v)]);
    out += '\n';
  }
  atomic_write_file(path, out);
}

inline void write_weights_tsv(const std::string& path, const TreeShape& tree,
                              const NodeWeights& w) {
  if (w.w.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("write_weights_tsv: weights do not match tree");
  std::string out;
  for (int v = 0; v < tree.node_count(); ++v) {
    out += tree.id_of(v);
    out += '\t';
    out += std::to_string(w.w[static_cast<std::size_t>(v)]);
    out += '\n';
  }
  atomic_write_file(path, out);
}

inline void write_labels_tsv(const std::string& path, const TreeShape& tree,
                             const Labels& labels) {
  if (labels.is_top.size() != static_cast<std::size_t>(tree.node_count()))
    throw input_error("write_labels_tsv: labels do not match tree");
  std::string out;
  for (int v = 0; v < tree.node_count(); ++v) {
    out += tree.id_of(v);
    out += '\t';
    out += labels.is_top[static_cast<std::size_t>(v)] ? "top" : "bottom";
    out += '\n';
  }
  atomic_write_file(path, out);
}

// Experiment-level values repeated on every CSV row for reproducibility.
struct CsvContext {
  double eps = 0.0;
  double delta = 0.0;
  double alpha = 0.0;
  double eta = 0.0;
  std::uint64_t seed = 0;
};

inline std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

inline constexpr const char* kCsvHeader =
    "node_id,metric,value,stderr,trials,eps,delta,alpha,eta,seed";

inline void write_csv(const std::string& path,
                      const std::vector<ErrorReport::Row>& rows,
                      const CsvContext& ctx) {
  std::string out = kCsvHeader;
  out += '\n';
  std::string tail = "," + format_double(ctx.eps) + "," +
                     format_double(ctx.delta) + "," +
                     format_double(ctx.alpha) + "," + format_double(ctx.eta) +
                     "," + std::to_string(ctx.seed) + "\n";
  for (const auto& row : rows) {
    out += csv_escape(row.node_id);
    out += ',';
    out += csv_escape(row.metric);
    out += ',';
    out += format_double(row.value);
    out += ',';
    out += format_double(row.stderr_);
    out += ',';
    out += std::to_string(row.trials);
    out += tail;
  }
  atomic_write_file(path, out);
}

// One experiment: a mechanism, a tree, counts, an accuracy target, a
// privacy budget, and a trial plan.
struct ExperimentConfig {
  std::string mechanism;  // laplace | gaussian | estimate | estimate+clamp
  std::string tree_file;  // exactly one of tree_file / generate_depth
  int generate_depth = 0;
  std::string counts_file;       // empty: all counts zero
  std::string thresholds_file;   // empty: uniform tau
  double alpha = 0.0;            // 0 disables the alpha-forgiveness
  double eta = 0.0;
  double tau = std::numeric_limits<double>::quiet_NaN();
  double eps = 0.0;
  double delta = 0.0;
  std::int64_t trials = 1;
  std::uint64_t seed = 0;
  std::string out;
  bool force = false;
};

// JSON of the form
//   { "mechanism": "estimate",
//     "tree": "tree.tsv",                    // or:
//     "generate": "complete-binary", "depth": 8,
//     "counts": "counts.tsv",                // optional, default all-zero
//     "thresholds": "tau.tsv",               // optional
//     "alpha": 0.5, "eta": 0.05, "tau": 120.0,
//     "eps": 1.0, "delta": 1e-6,
//     "trials": 100, "seed": 7,
//     "out": "report.csv", "force": false }
// Unknown keys are rejected so typos fail loudly.
inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw input_error("cannot open file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": bad JSON: " + std::string(e.what()));
  }
  if (!j.is_object())
    throw input_error(path + ": config must be a JSON object");
  static const std::set<std::string> known = {
      "mechanism", "tree",   "generate", "depth", "counts", "thresholds",
      "alpha",     "eta",    "tau",      "eps",   "delta",  "trials",
      "seed",      "out",    "force"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (known.count(it.key()) == 0)
      throw input_error(path + ": unknown config key '" + it.key() + "'");
  ExperimentConfig cfg;
  try {
    cfg.mechanism = j.at("mechanism").get<std::string>();
    if (j.contains("tree")) cfg.tree_file = j["tree"].get<std::string>();
    if (j.contains("generate")) {
      if (j["generate"].get<std::string>() != "complete-binary")
        throw input_error(path + ": generate must be \"complete-binary\"");
      cfg.generate_depth = j.at("depth").get<int>();
    } else if (j.contains("depth")) {
      throw input_error(path +
                        ": depth requires generate = \"complete-binary\"");
    }
    if (j.contains("counts")) cfg.counts_file = j["counts"].get<std::string>();
    if (j.contains("thresholds"))
      cfg.thresholds_file = j["thresholds"].get<std::string>();
    if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
    if (j.contains("eta")) cfg.eta = j["eta"].get<double>();
    if (j.contains("tau")) cfg.tau = j["tau"].get<double>();
    cfg.eps = j.at("eps").get<double>();
    if (j.contains("delta")) cfg.delta = j["delta"].get<double>();
    cfg.trials = j.at("trials").get<std::int64_t>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    cfg.out = j.at("out").get<std::string>();
    if (j.contains("force")) cfg.force = j["force"].get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": bad config: " + std::string(e.what()));
  }
  return cfg;
}

namespace detail {

// The accuracy thresholds an ExperimentConfig implies, or empty when the
// config declares none (baselines without --tau).
inline std::vector<double> config_thresholds(const ExperimentConfig& config,
                                             const TreeShape& tree) {
  if (!config.thresholds_file.empty())
    return load_thresholds(config.thresholds_file, tree, config.tau);
  if (!std::isnan(config.tau))
    return std::vector<double>(static_cast<std::size_t>(tree.node_count()),
                               config.tau);
  return {};
}

}  // namespace detail

// Builds the mechanism closure an ExperimentConfig selects. The closure is
// (eps, delta)-DP as a whole per invocation:
//   laplace          Laplace noise, (eps, 0)
//   gaussian         Gaussian noise, (eps, delta)
//   estimate         the level-plan pipeline, (eps, delta)
//   estimate+clamp   pipeline at (eps/2, delta/2), then interval clamping
//                    spending the other (eps/2, delta/2)
// `thresholds` may be empty only for the baselines.
inline Mechanism make_mechanism(const std::string& name, double eps,
                                double delta, double alpha, double eta,
                                std::vector<double> thresholds, bool force) {
  if (name == "laplace")
    return [eps](const TreeShape& tree, const NodeWeights& w, RngState rng) {
      return laplace_tree(tree, w, eps, rng);
    };
  if (name == "gaussian")
    return [eps, delta](const TreeShape& tree, const NodeWeights& w,
                        RngState rng) {
      return gaussian_tree(tree, w, eps, delta, rng);
    };
  if (name == "estimate")
    return [eps, delta, alpha, eta, thresholds = std::move(thresholds),
            force](const TreeShape& tree, const NodeWeights& w, RngState rng) {
      AccuracySpec spec =
          AccuracySpec::from_thresholds(tree, alpha, eta, thresholds);
      return estimate_with_details(tree, w, spec, eps, delta, rng, force)
          .estimates;
    };
  if (name == "estimate+clamp")
    return [eps, delta, alpha, eta, thresholds = std::move(thresholds),
            force](const TreeShape& tree, const NodeWeights& w, RngState rng) {
      AccuracySpec spec =
          AccuracySpec::from_thresholds(tree, alpha, eta, thresholds);
      NodeEstimates raw = estimate_with_details(tree, w, spec, eps / 2.0,
                                                delta / 2.0, rng.split(0),
                                                force)
                              .estimates;
      return clamp_to_mrmse(tree, w, raw, eps, delta, rng.split(1));
    };
  throw input_error("unknown mechanism '" + name +
                    "' (want laplace, gaussian, estimate, estimate+clamp)");
}

struct RunSummary {
  PrivacyBudget budget{0.0, 0.0};
  bool precondition_ok = true;
  std::vector<ErrorReport::Row> rows;
};

// Runs the configured mechanism over `trials` split streams, measuring per
// node the alpha-forgiven RMSE and (when thresholds are declared) the
// accuracy failure rate and smoothed relative error, then writes the CSV.
// Also emits experiment-level rows (node_id "-"): the composed privacy
// budget and the utility-precondition check result.
inline RunSummary run_experiment(const ExperimentConfig& config) {
  if (config.trials < 1) throw input_error("run: trials must be >= 1");
  if (config.tree_file.empty() == (config.generate_depth == 0))
    throw input_error("run: give exactly one of a tree file or a generated "
                      "complete-binary depth");
  TreeShape tree = config.tree_file.empty()
                       ? complete_binary(config.generate_depth)
                       : load_tree(config.tree_file);
  LeafCounts counts;
  if (!config.counts_file.empty())
    counts = load_counts(config.counts_file, tree);
  NodeWeights weights = aggregate_exact(tree, counts);
  std::vector<double> thresholds = detail::config_thresholds(config, tree);

  bool is_estimate =
      config.mechanism == "estimate" || config.mechanism == "estimate+clamp";
  if (is_estimate && thresholds.empty())
    throw input_error("run: mechanism '" + config.mechanism +
                      "' needs --tau or a thresholds file");

  // The composed budget of one mechanism invocation, exactly as documented
  // in make_mechanism: a single draw pass for the baselines, two composed
  // (eps/2, delta/2) halves for the pipeline variants.
  PrivacyBudget budget = PrivacyBudget(config.eps, config.delta);
  if (config.mechanism == "laplace") budget = PrivacyBudget(config.eps, 0.0);
  if (is_estimate)
    budget =
        compose_basic({PrivacyBudget(config.eps / 2.0, config.delta / 2.0),
                       PrivacyBudget(config.eps / 2.0, config.delta / 2.0)});

  // Utility precondition: for the pipeline, the declared thresholds must
  // clear the certified minimum at the budget the pipeline actually runs
  // under (the full budget for `estimate`, half for `estimate+clamp`).
  bool precondition_ok = true;
  if (is_estimate) {
    double pipeline_eps = config.eps, pipeline_delta = config.delta;
    if (config.mechanism == "estimate+clamp") {
      pipeline_eps /= 2.0;
      pipeline_delta /= 2.0;
    }
    double tau_min = *std::min_element(thresholds.begin(), thresholds.end());
    double required = estimate_min_tau(config.alpha, pipeline_eps,
                                       pipeline_delta, config.eta,
                                       tree.depth());
    precondition_ok = tau_min >= required * (1.0 - 1e-12);
    if (!precondition_ok && !config.force)
      throw precondition_error(
          "run: minimum threshold " + std::to_string(tau_min) +
          " is below the certified minimum " + std::to_string(required) +
          "; raise the thresholds (or pass --force to run with privacy "
          "intact but no accuracy contract)");
  }

  Mechanism mechanism =
      make_mechanism(config.mechanism, config.eps, config.delta, config.alpha,
                     config.eta, thresholds, config.force);

  std::size_t n = static_cast<std::size_t>(tree.node_count());
  std::vector<double> sum_sq(n, 0.0), sum_sq2(n, 0.0), sum_abs(n, 0.0),
      sum_abs2(n, 0.0);
  std::vector<std::int64_t> fails(n, 0);
  RngState rng(config.seed);
  for (std::int64_t t = 0; t < config.trials; ++t) {
    NodeEstimates est =
        mechanism(tree, weights, rng.split(static_cast<std::uint64_t>(t)));
    for (std::size_t v = 0; v < n; ++v) {
      double w = static_cast<double>(weights.w[v]);
      double err = std::abs(est.value[v] - w);
      double r = std::max(err - config.alpha * w, 0.0);
      sum_sq[v] += r * r;
      sum_sq2[v] += r * r * r * r;
      sum_abs[v] += err;
      sum_abs2[v] += err * err;
      if (!thresholds.empty() &&
          err > config.alpha * std::max(w, thresholds[v]))
        ++fails[v];
    }
  }

  RunSummary summary;
  summary.budget = budget;
  summary.precondition_ok = precondition_ok;
  summary.rows.push_back(
      {"-", "budget_eps", budget.eps, 0.0, config.trials});
  summary.rows.push_back(
      {"-", "budget_delta", budget.delta, 0.0, config.trials});
  summary.rows.push_back({"-", "precondition_ok", precondition_ok ? 1.0 : 0.0,
                          0.0, config.trials});
  summary.rows.push_back({"-", "depth", static_cast<double>(tree.depth()),
                          0.0, config.trials});
  for (std::size_t v = 0; v < n; ++v) {
    McEstimate rmse =
        detail::rmse_from_squares(sum_sq[v], sum_sq2[v], config.trials);
    summary.rows.push_back({tree.id_of(static_cast<int>(v)), "rmse_alpha",
                            rmse.value, rmse.stderr_, config.trials});
    if (!thresholds.empty()) {
      double rate = static_cast<double>(fails[v]) /
                    static_cast<double>(config.trials);
      summary.rows.push_back({tree.id_of(static_cast<int>(v)), "fail_rate",
                              rate,
                              wilson_halfwidth(fails[v], config.trials, 1.0),
                              config.trials});
      // Smoothed relative error at kappa = tau_u.
      double nn = static_cast<double>(config.trials);
      double mean_abs = sum_abs[v] / nn;
      double var_abs =
          std::max(0.0, sum_abs2[v] / nn - mean_abs * mean_abs);
      double denom =
          std::max(static_cast<double>(weights.w[v]), thresholds[v]);
      if (denom > 0.0)
        summary.rows.push_back({tree.id_of(static_cast<int>(v)), "rel_kappa",
                                mean_abs / denom,
                                std::sqrt(var_abs / nn) / denom,
                                config.trials});
    }
  }

  if (!config.out.empty())
    write_csv(config.out, summary.rows,
              CsvContext{config.eps, config.delta, config.alpha, config.eta,
                         config.seed});
  return summary;
}

}  // namespace treedp
