// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors
//
// Command-line front end. Subcommands:
//   aggregate         exact subtree sums (no privacy; harness utility)
//   baseline-laplace  per-node Laplace noise, (eps, 0)-DP
//   baseline-gaussian per-node Gaussian noise, (eps, delta)-DP
//   classify          above/below-threshold labels, (eps, delta)-DP
//   estimate          the level-plan pipeline, (eps, delta)-DP
//   clamp             interval post-processing of raw estimates
//   metrics           Monte Carlo error report for a mechanism (CSV)
//   attack            packing/decoding reconstruction attack (CSV)
//   gamma2            nuclear-norm witness values (CSV)
//   run               config-file-driven experiment (CSV)
// Exit codes: 0 ok, 2 input error, 3 precondition refused, 4 resource cap.

#include <cstdint>
#include <exception>
#include <functional>
#include <iostream>
#include <limits>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "treedp/treedp.hpp"

namespace {

using treedp::Mechanism;
using treedp::RngState;
using treedp::TreeShape;

struct TreeSourceFlags {
  std::string tree_file;
  std::string generate;
  int depth = 0;
};

void add_tree_source(CLI::App* cmd, TreeSourceFlags& f) {
  cmd->add_option("--tree", f.tree_file,
                  "tree TSV: node_id<TAB>parent_id, '-' for the root");
  cmd->add_option("--generate", f.generate,
                  "tree generator (only: complete-binary)");
  cmd->add_option("--depth", f.depth,
                  "depth for --generate complete-binary");
}

TreeShape resolve_tree(const TreeSourceFlags& f) {
  bool generated = !f.generate.empty() || f.depth > 0;
  if (f.tree_file.empty() == !generated)
    throw treedp::input_error(
        "give exactly one tree source: --tree FILE or "
        "--generate complete-binary --depth D");
  if (!f.tree_file.empty()) return treedp::load_tree(f.tree_file);
  if (f.generate != "complete-binary")
    throw treedp::input_error("unknown --generate '" + f.generate +
                              "' (only complete-binary)");
  if (f.depth < 1)
    throw treedp::input_error(
        "--generate complete-binary needs --depth >= 1");
  return treedp::complete_binary(f.depth);
}

treedp::LeafCounts resolve_counts(const std::string& counts_file,
                                  const TreeShape& tree) {
  if (counts_file.empty()) return {};  // all leaves zero
  return treedp::load_counts(counts_file, tree);
}

// Exact answers and constant zero: the two non-private reference points the
// attack subcommand compares against.
Mechanism exact_mechanism() {
  return [](const TreeShape&, const treedp::NodeWeights& w, RngState) {
    treedp::NodeEstimates est;
    est.value.assign(w.w.begin(), w.w.end());
    return est;
  };
}

Mechanism zero_mechanism() {
  return [](const TreeShape& tree, const treedp::NodeWeights&, RngState) {
    treedp::NodeEstimates est;
    est.value.assign(static_cast<std::size_t>(tree.node_count()), 0.0);
    return est;
  };
}

double nan_default() { return std::numeric_limits<double>::quiet_NaN(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Differentially private subtree-sum release over known rooted trees"};
  app.require_subcommand(1);
  std::function<void()> action;

  // ---- aggregate ----
  {
    auto* cmd = app.add_subcommand(
        "aggregate", "Exact subtree sums (no privacy; harness utility)");
    auto flags = std::make_shared<TreeSourceFlags>();
    auto counts_file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    add_tree_source(cmd, *flags);
    cmd->add_option("--counts", *counts_file, "counts TSV: leaf_id<TAB>count");
    cmd->add_option("--out", *out, "output TSV path")->required();
    cmd->callback([=]() {
      TreeShape tree = resolve_tree(*flags);
      treedp::NodeWeights w =
          treedp::aggregate_exact(tree, resolve_counts(*counts_file, tree));
      treedp::write_weights_tsv(*out, tree, w);
    });
  }

  // ---- baseline-laplace ----
  {
    auto* cmd = app.add_subcommand("baseline-laplace",
                                   "Per-node Laplace noise, (eps, 0)-DP");
    auto flags = std::make_shared<TreeSourceFlags>();
    auto counts_file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto eps = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    add_tree_source(cmd, *flags);
    cmd->add_option("--counts", *counts_file, "counts TSV");
    cmd->add_option("--eps", *eps, "privacy budget eps")->required();
    cmd->add_option("--seed", *seed, "random seed (default 0)");
    cmd->add_option("--out", *out, "output TSV path")->required();
    cmd->callback([=]() {
      TreeShape tree = resolve_tree(*flags);
      treedp::NodeEstimates est = treedp::laplace_tree(
          tree, resolve_counts(*counts_file, tree), *eps, RngState(*seed));
      treedp::write_estimates_tsv(*out, tree, est);
    });
  }

  // ---- baseline-gaussian ----
  {
    auto* cmd = app.add_subcommand("baseline-gaussian",
                                   "Per-node Gaussian noise, (eps, delta)-DP");
    auto flags = std::make_shared<TreeSourceFlags>();
    auto counts_file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto eps = std::make_shared<double>(0.0);
    auto delta = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    add_tree_source(cmd, *flags);
    cmd->add_option("--counts", *counts_file, "counts TSV");
    cmd->add_option("--eps", *eps, "privacy budget eps, in (0, 1]")
        ->required();
    cmd->add_option("--delta", *delta, "privacy budget delta")->required();
    cmd->add_option("--seed", *seed, "random seed (default 0)");
    cmd->add_option("--out", *out, "output TSV path")->required();
    cmd->callback([=]() {
      TreeShape tree = resolve_tree(*flags);
      treedp::NodeEstimates est =
          treedp::gaussian_tree(tree, resolve_counts(*counts_file, tree),
                                *eps, *delta, RngState(*seed));
      treedp::write_estimates_tsv(*out, tree, est);
    });
  }

  // ---- classify ----
  {
    auto* cmd = app.add_subcommand(
        "classify", "Above/below-threshold labels, (eps, delta)-DP");
    auto flags = std::make_shared<TreeSourceFlags>();
    auto counts_file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto eps = std::make_shared<double>(0.0);
    auto delta = std::make_shared<double>(0.0);
    auto alpha = std::make_shared<double>(0.0);
    auto eta = std::make_shared<double>(0.0);
    auto tau = std::make_shared<double>(0.0);
    auto bound = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto force = std::make_shared<bool>(false);
    add_tree_source(cmd, *flags);
    cmd->add_option("--counts", *counts_file, "counts TSV");
    cmd->add_option("--eps", *eps, "privacy budget eps")->required();
    cmd->add_option("--delta", *delta, "privacy budget delta")->required();
    cmd->add_option("--alpha", *alpha, "relative accuracy, in (0, 1)")
        ->required();
    cmd->add_option("--eta", *eta, "failure probability, in (0, 1/2)")
        ->required();
    cmd->add_option("--tau", *tau, "uniform threshold")->required();
    cmd->add_option("--bound", *bound,
                    "caller-warranted upper bound M on the root weight")
        ->required();
    cmd->add_option("--seed", *seed, "random seed (default 0)");
    cmd->add_flag("--force", *force,
                  "run even when tau is below the certified minimum "
                  "(privacy intact, no accuracy contract)");
    cmd->add_option("--out", *out, "output TSV path (node_id<TAB>top|bottom)")
        ->required();
    cmd->callback([=]() {
      TreeShape tree = resolve_tree(*flags);
      treedp::Labels labels = treedp::classify_tree(
          tree, resolve_counts(*counts_file, tree), *bound, *eta, *alpha,
          *tau, *eps, *delta, RngState(*seed), *force);
      treedp::write_labels_tsv(*out, tree, labels);
    });
  }

  // ---- estimate ----
  {
    auto* cmd = app.add_subcommand(
        "estimate", "Level-plan pipeline release, (eps, delta)-DP");
    auto flags = std::make_shared<TreeSourceFlags>();
    auto counts_file = std::make_shared<std::string>();
    auto thresholds_file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto eps = std::make_shared<double>(0.0);
    auto delta = std::make_shared<double>(0.0);
    auto alpha = std::make_shared<double>(0.0);
    auto eta = std::make_shared<double>(0.0);
    auto tau = std::make_shared<double>(nan_default());
    auto seed = std::make_shared<std::uint64_t>(0);
    auto force = std::make_shared<bool>(false);
    add_tree_source(cmd, *flags);
    cmd->add_option("--counts", *counts_file, "counts TSV");
    cmd->add_option("--thresholds", *thresholds_file,
                    "per-node thresholds TSV: node_id<TAB>tau");
    cmd->add_option("--eps", *eps, "privacy budget eps")->required();
    cmd->add_option("--delta", *delta, "privacy budget delta")->required();
    cmd->add_option("--alpha", *alpha, "relative accuracy, in (0, 1)")
        ->required();
    cmd->add_option("--eta", *eta, "failure probability, in (0, 1/2)")
        ->required();
    cmd->add_option("--tau", *tau,
                    "uniform threshold (also the default for nodes missing "
                    "from --thresholds)");
    cmd->add_option("--seed", *seed, "random seed (default 0)");
    cmd->add_flag("--force", *force,
                  "run even when thresholds are below the certified minimum "
                  "(privacy intact, no accuracy contract)");
    cmd->add_option("--out", *out, "output TSV path")->required();
    cmd->callback([=]() {
      TreeShape tree = resolve_tree(*flags);
      std::vector<double> tau_vec;
      if (!thresholds_file->empty())
        tau_vec = treedp::load_thresholds(*thresholds_file, tree, *tau);
      else if (!std::isnan(*tau))
        tau_vec.assign(static_cast<std::size_t>(tree.node_count()), *tau);
      else
        throw treedp::input_error(
            "estimate needs --tau or a --thresholds file");
      treedp::AccuracySpec spec =
          treedp::AccuracySpec::from_thresholds(tree, *alpha, *eta, tau_vec);
      treedp::NodeEstimates est =
          treedp::estimate(tree, resolve_counts(*counts_file, tree), spec,
                           *eps, *delta, RngState(*seed), *force);
      treedp::write_estimates_tsv(*out, tree, est);
    });
  }

  // ---- clamp ----
  {
    auto* cmd = app.add_subcommand(
        "clamp",
        "Clamp raw estimates into private per-node intervals. The raw input "
        "must already be (eps/2, delta/2)-DP; the combined release is then "
        "(eps, delta)-DP");
    auto flags = std::make_shared<TreeSourceFlags>();
    auto counts_file = std::make_shared<std::string>();
    auto raw_file = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto eps = std::make_shared<double>(0.0);
    auto delta = std::make_shared<double>(0.0);
    auto seed = std::make_shared<std::uint64_t>(0);
    add_tree_source(cmd, *flags);
    cmd->add_option("--counts", *counts_file, "counts TSV");
    cmd->add_option("--raw", *raw_file,
                    "raw estimates TSV: node_id<TAB>value")
        ->required();
    cmd->add_option("--eps", *eps, "total privacy budget eps")->required();
    cmd->add_option("--delta", *delta, "total privacy budget delta")
        ->required();
    cmd->add_option("--seed", *seed, "random seed (default 0)");
    cmd->add_option("--out", *out, "output TSV path")->required();
    cmd->callback([=]() {
      TreeShape tree = resolve_tree(*flags);
      treedp::NodeEstimates raw = treedp::load_estimates(*raw_file, tree);
      treedp::NodeEstimates est = treedp::clamp_to_mrmse(
          tree, resolve_counts(*counts_file, tree), raw, *eps, *delta,
          RngState(*seed));
      treedp::write_estimates_tsv(*out, tree, est);
    });
  }

  // ---- metrics ----
  {
    auto* cmd = app.add_subcommand(
        "metrics", "Monte Carlo error report for a mechanism (CSV)");
    auto cfg = std::make_shared<treedp::ExperimentConfig>();
    auto flags = std::make_shared<TreeSourceFlags>();
    add_tree_source(cmd, *flags);
    cmd->add_option("--mechanism", cfg->mechanism,
                    "laplace | gaussian | estimate | estimate+clamp")
        ->required();
    cmd->add_option("--counts", cfg->counts_file, "counts TSV");
    cmd->add_option("--thresholds", cfg->thresholds_file,
                    "per-node thresholds TSV");
    cmd->add_option("--eps", cfg->eps, "privacy budget eps")->required();
    cmd->add_option("--delta", cfg->delta, "privacy budget delta");
    cmd->add_option("--alpha", cfg->alpha, "relative accuracy");
    cmd->add_option("--eta", cfg->eta, "failure probability");
    cmd->add_option("--tau", cfg->tau, "uniform threshold");
    cmd->add_option("--trials", cfg->trials, "Monte Carlo trials")
        ->required();
    cmd->add_option("--seed", cfg->seed, "random seed (default 0)");
    cmd->add_flag("--force", cfg->force, "bypass utility preconditions");
    cmd->add_option("--out", cfg->out, "output CSV path")->required();
    cmd->callback([=]() {
      cfg->tree_file = flags->tree_file;
      if (!flags->generate.empty() || flags->depth > 0) {
        if (flags->generate != "complete-binary")
          throw treedp::input_error("unknown --generate '" + flags->generate +
                                    "' (only complete-binary)");
        cfg->generate_depth = flags->depth;
      }
      treedp::run_experiment(*cfg);
    });
  }

  // ---- attack ----
  {
    auto* cmd = app.add_subcommand(
        "attack",
        "Packing/decoding reconstruction attack on a mechanism (CSV)");
    auto depth = std::make_shared<int>(0);
    auto tau = std::make_shared<double>(0.0);
    auto alpha = std::make_shared<double>(0.0);
    auto eta = std::make_shared<double>(0.0);
    auto eps = std::make_shared<double>(nan_default());
    auto delta = std::make_shared<double>(nan_default());
    auto trials = std::make_shared<std::int64_t>(0);
    auto seed = std::make_shared<std::uint64_t>(0);
    auto amplify = std::make_shared<int>(1);
    auto sample = std::make_shared<std::int64_t>(0);
    auto mech_name = std::make_shared<std::string>("estimate");
    auto force = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--depth", *depth, "complete binary tree depth")
        ->required();
    cmd->add_option("--tau", *tau, "uniform threshold tau_max")->required();
    cmd->add_option("--alpha", *alpha, "accuracy parameter, in [0, 1)")
        ->required();
    cmd->add_option("--eta", *eta,
                    "per-node failure probability, in [0, 1/8]")
        ->required();
    cmd->add_option("--mechanism", *mech_name,
                    "exact | zero | laplace | gaussian | estimate | "
                    "estimate+clamp (default estimate)");
    cmd->add_option("--eps", *eps, "mechanism budget eps (DP mechanisms)");
    cmd->add_option("--delta", *delta,
                    "mechanism budget delta (DP mechanisms)");
    cmd->add_option("--trials", *trials, "trials per measured leaf index")
        ->required();
    cmd->add_option("--amplify", *amplify,
                    "median-of-s amplification; 0 = derive s from (eta, "
                    "kappa) (default 1)");
    cmd->add_option("--sample", *sample,
                    "measure only this many sampled leaf indices "
                    "(0 = all)");
    cmd->add_option("--seed", *seed, "random seed (default 0)");
    cmd->add_flag("--force", *force,
                  "bypass the mechanism's utility preconditions");
    cmd->add_option("--out", *out, "output CSV path")->required();
    cmd->callback([=]() {
      treedp::AttackConfig cfg = treedp::attack_config(
          *depth, *tau, *alpha, *eta, *trials,
          *amplify == 0 ? treedp::amplification_count(*eta, 1.0 - 4.0 * *eta)
                        : *amplify,
          *sample);
      Mechanism mech;
      if (*mech_name == "exact") {
        mech = exact_mechanism();
      } else if (*mech_name == "zero") {
        mech = zero_mechanism();
      } else {
        if (std::isnan(*eps))
          throw treedp::input_error("attack: mechanism '" + *mech_name +
                                    "' needs --eps");
        double d_for_mech = std::isnan(*delta) ? 0.0 : *delta;
        std::vector<double> thresholds(
            (std::size_t{1} << *depth) - 1, *tau);
        mech = treedp::make_mechanism(*mech_name, *eps, d_for_mech, *alpha,
                                      *eta, std::move(thresholds), *force);
      }
      treedp::AttackReport rep =
          treedp::attack_success_rate(mech, cfg, RngState(*seed));
      TreeShape tree = treedp::complete_binary(cfg.d);
      std::int64_t first_leaf = std::int64_t{1} << (cfg.d - 1);
      std::vector<treedp::ErrorReport::Row> rows;
      rows.push_back({"-", "analytic_floor", rep.analytic_floor, 0.0,
                      rep.trials_per_index});
      rows.push_back({"-", "overall_rate", rep.overall_rate,
                      rep.overall_stderr, rep.trials_per_index});
      rows.push_back({"-", "decoder_kappa", cfg.kappa, 0.0, 0});
      rows.push_back({"-", "packing_mass_D", static_cast<double>(cfg.D),
                      0.0, 0});
      rows.push_back({"-", "amplification_s", static_cast<double>(rep.s),
                      0.0, 0});
      for (const auto& row : rep.per_index)
        rows.push_back(
            {tree.id_of(static_cast<int>(first_leaf - 1 + row.leaf_index - 1)),
             "attack_success", row.rate, row.wilson, row.trials});
      double d_echo = std::isnan(*delta) ? 0.0 : *delta;
      double e_echo = std::isnan(*eps) ? 0.0 : *eps;
      treedp::write_csv(*out, rows,
                        treedp::CsvContext{e_echo, d_echo, *alpha, *eta,
                                           *seed});
    });
  }

  // ---- gamma2 ----
  {
    auto* cmd = app.add_subcommand(
        "gamma2",
        "Nuclear-norm witness for the complete-binary subtree-sum matrix "
        "(CSV)");
    auto depth = std::make_shared<int>(0);
    auto brute = std::make_shared<bool>(false);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--depth", *depth, "complete binary tree depth")
        ->required();
    cmd->add_flag("--brute", *brute,
                  "also run the dense brute-force oracle (depth <= 8)");
    cmd->add_option("--out", *out, "output CSV path")->required();
    cmd->callback([=]() {
      double value = treedp::gamma2_witness_value(*depth);
      std::vector<treedp::ErrorReport::Row> rows;
      rows.push_back({"-", "gamma2_witness", value, 0.0, 0});
      rows.push_back({"-", "witness_over_sqrt_depth",
                      value / std::sqrt(static_cast<double>(*depth)), 0.0,
                      0});
      if (*brute)
        rows.push_back({"-", "nuclear_norm_bruteforce",
                        treedp::nuclear_norm_bruteforce(*depth), 0.0, 0});
      treedp::write_csv(*out, rows, treedp::CsvContext{0.0, 0.0, 0.0, 0.0, 0});
    });
  }

  // ---- run ----
  {
    auto* cmd = app.add_subcommand(
        "run", "Run an experiment described by a JSON config file (CSV)");
    auto config_path = std::make_shared<std::string>();
    cmd->add_option("--config", *config_path, "JSON config path")->required();
    cmd->callback([=]() {
      treedp::run_experiment(treedp::load_experiment_config(*config_path));
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return treedp::kExitInputError;
  } catch (const treedp::input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return treedp::kExitInputError;
  } catch (const treedp::precondition_error& e) {
    std::cerr << "refused: " << e.what() << "\n";
    return treedp::kExitPreconditionRefused;
  } catch (const treedp::resource_error& e) {
    std::cerr << "resource cap: " << e.what() << "\n";
    return treedp::kExitResourceCap;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
  return treedp::kExitOk;
}
