// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "treedp/baselines.hpp"
#include "treedp/bounds.hpp"
#include "treedp/rng.hpp"
#include "treedp/tree.hpp"

using treedp::aggregate_exact;
using treedp::amplification_count;
using treedp::attack_config;
using treedp::attack_success_rate;
using treedp::AttackConfig;
using treedp::AttackReport;
using treedp::binary_entropy;
using treedp::decode;
using treedp::gamma2_witness_value;
using treedp::input_error;
using treedp::laplace_tree;
using treedp::LeafCounts;
using treedp::Mechanism;
using treedp::NodeEstimates;
using treedp::NodeWeights;
using treedp::nuclear_norm_bruteforce;
using treedp::packing_dataset;
using treedp::resource_error;
using treedp::RngState;
using treedp::TreeShape;

namespace {

Mechanism exact_mechanism() {
  return [](const TreeShape& tree, const NodeWeights& weights, RngState) {
    NodeEstimates out;
    out.value.resize(static_cast<std::size_t>(tree.node_count()));
    for (int v = 0; v < tree.node_count(); ++v)
      out.value[static_cast<std::size_t>(v)] =
          static_cast<double>(weights.w[static_cast<std::size_t>(v)]);
    return out;
  };
}

Mechanism zero_mechanism() {
  return [](const TreeShape& tree, const NodeWeights&, RngState) {
    NodeEstimates out;
    out.value.assign(static_cast<std::size_t>(tree.node_count()), 0.0);
    return out;
  };
}

}  // namespace

TEST_CASE("binary entropy matches references and its symmetry") {
  CHECK(binary_entropy(0.0) == 0.0);
  CHECK(binary_entropy(1.0) == 0.0);
  CHECK(binary_entropy(0.5) == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(binary_entropy(0.1) ==
        Catch::Approx(0.468995593589281).epsilon(1e-12));
  CHECK(binary_entropy(0.2) ==
        Catch::Approx(0.721928094887362).epsilon(1e-12));
  CHECK(binary_entropy(0.3) == binary_entropy(0.7));
  CHECK_THROWS_AS(binary_entropy(-0.1), input_error);
  CHECK_THROWS_AS(binary_entropy(1.1), input_error);
}

TEST_CASE("packing datasets put half the mass on one leaf") {
  LeafCounts counts = packing_dataset(2, 4, 1);
  REQUIRE(counts.values.size() == 2);
  CHECK(counts.values.at("n2") == 2);
  CHECK(counts.values.at("n3") == 0);

  TreeShape t = treedp::complete_binary(2);
  NodeWeights w = aggregate_exact(t, counts);
  CHECK(w.w[static_cast<std::size_t>(t.root())] == 2);  // root carries D/2

  LeafCounts deep = packing_dataset(4, 10, 3);
  CHECK(deep.values.size() == 8);
  CHECK(deep.values.at("n10") == 5);  // third leaf of n8..n15
  CHECK(deep.values.at("n8") == 0);

  CHECK_THROWS_AS(packing_dataset(0, 4, 1), input_error);
  CHECK_THROWS_AS(packing_dataset(2, 3, 1), input_error);   // odd mass
  CHECK_THROWS_AS(packing_dataset(2, 0, 1), input_error);
  CHECK_THROWS_AS(packing_dataset(2, 4, 0), input_error);
  CHECK_THROWS_AS(packing_dataset(2, 4, 3), input_error);   // only 2 leaves
}

TEST_CASE("decode walks straight to the planted leaf on exact estimates") {
  const int d = 5;
  const std::int64_t n_leaves = 16;
  TreeShape t = treedp::complete_binary(d);
  for (std::int64_t i = 1; i <= n_leaves; ++i) {
    NodeWeights w = aggregate_exact(t, packing_dataset(d, 8, i));
    NodeEstimates est = exact_mechanism()(t, w, RngState(0));
    RngState rng(42);
    // tau_max = 4 = D/2: on-path nodes hold exactly D/2, off-path 0, so the
    // kappa = 1 walk is deterministic.
    CHECK(decode(est, d, 4.0, 1.0, rng) == i);
  }
}

TEST_CASE("decode consumes one uniform per internal level") {
  // With kappa = 1 and exact estimates the walk is deterministic, but it
  // must still burn d-1 draws; the rng must advance by exactly that much.
  const int d = 4;
  TreeShape t = treedp::complete_binary(d);
  NodeWeights w = aggregate_exact(t, packing_dataset(d, 6, 5));
  NodeEstimates est = exact_mechanism()(t, w, RngState(0));
  RngState walk(7), reference(7);
  decode(est, d, 3.0, 1.0, walk);
  for (int k = 0; k < d - 1; ++k) reference.uniform01();
  CHECK(walk == reference);
}

TEST_CASE("decode on all-zero estimates is a uniform walk") {
  const int d = 4;  // 8 leaves
  NodeEstimates zeros;
  zeros.value.assign(15, 0.0);
  std::map<std::int64_t, int> hits;
  RngState rng(3);
  const int n = 8000;
  for (int k = 0; k < n; ++k) {
    RngState walk = rng.split(k);
    ++hits[decode(zeros, d, 1.0, 0.8, walk)];
  }
  // Each leaf expected n/8 = 1000, sd ~ 29.6; allow 5 sd.
  for (std::int64_t leaf = 1; leaf <= 8; ++leaf)
    CHECK(std::abs(hits[leaf] - 1000) <= 150);
}

TEST_CASE("decode at kappa one-half ignores the estimates entirely") {
  const int d = 3;
  NodeEstimates est;
  est.value = {9.0, 9.0, 0.0, 9.0, 0.0, 0.0, 0.0};  // n1,n2,n4 high
  std::map<std::int64_t, int> hits;
  RngState rng(5);
  const int n = 8000;
  for (int k = 0; k < n; ++k) {
    RngState walk = rng.split(k);
    ++hits[decode(est, d, 1.0, 0.5, walk)];
  }
  // kappa = 1/2 makes the biased branch a fair coin: uniform over 4 leaves.
  for (std::int64_t leaf = 1; leaf <= 4; ++leaf)
    CHECK(std::abs(hits[leaf] - 2000) <= 220);  // 5 sd ~ 194
}

TEST_CASE("decode validates its inputs") {
  NodeEstimates est;
  est.value.assign(7, 0.0);
  RngState rng(1);
  CHECK_THROWS_AS(decode(est, 4, 1.0, 1.0, rng), input_error);  // wrong size
  CHECK_THROWS_AS(decode(est, 0, 1.0, 1.0, rng), input_error);
  CHECK_THROWS_AS(decode(est, 3, 1.0, 1.5, rng), input_error);
}

TEST_CASE("amplification_count matches the reference values") {
  CHECK(amplification_count(0.0, 1.0) == 3);
  CHECK(amplification_count(0.05, 0.8) == 4);
  CHECK_THROWS_AS(amplification_count(0.5, 1.0), input_error);
  CHECK_THROWS_AS(amplification_count(0.1, 0.0), input_error);
  CHECK_THROWS_AS(amplification_count(0.1, 1.5), input_error);
}

TEST_CASE("attack_config derives D and kappa and validates ranges") {
  AttackConfig cfg = attack_config(10, 100.0, 0.5, 0.05, 50, 1);
  CHECK(cfg.D == 400);        // 2 * ceil(100 / 0.5)
  CHECK(cfg.kappa == Catch::Approx(0.8).epsilon(1e-15));
  CHECK(cfg.trials == 50);

  CHECK_THROWS_AS(attack_config(0, 100.0, 0.5, 0.05, 50, 1), input_error);
  CHECK_THROWS_AS(attack_config(10, 0.0, 0.5, 0.05, 50, 1), input_error);
  CHECK_THROWS_AS(attack_config(10, 100.0, 1.0, 0.05, 50, 1), input_error);
  CHECK_THROWS_AS(attack_config(10, 100.0, 0.5, 0.2, 50, 1), input_error);
  CHECK_THROWS_AS(attack_config(10, 100.0, 0.5, 0.05, 0, 1), input_error);
  CHECK_THROWS_AS(attack_config(10, 100.0, 0.5, 0.05, 50, 0), input_error);
  CHECK_THROWS_AS(attack_config(10, 100.0, 0.5, 0.05, 50, 1, -1), input_error);
}

TEST_CASE("attack succeeds always against the exact mechanism at eta zero") {
  AttackConfig cfg = attack_config(5, 10.0, 0.5, 0.0, 10, 1);
  AttackReport report =
      attack_success_rate(exact_mechanism(), cfg, RngState(17));
  CHECK(report.overall_rate == 1.0);
  CHECK(report.per_index.size() == 16);
  for (const auto& row : report.per_index) {
    CHECK(row.successes == row.trials);
    CHECK(row.rate == 1.0);
  }
  // eta = 0 keeps the full floor 1/4.
  CHECK(report.analytic_floor == Catch::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("attack against a constant release degrades to random guessing") {
  const int d = 5;  // 16 leaves
  AttackConfig cfg = attack_config(d, 10.0, 0.5, 0.05, 200, 1);
  AttackReport report =
      attack_success_rate(zero_mechanism(), cfg, RngState(23));
  // Per trial the walk is uniform: success probability 1/16 = 0.0625.
  // 16 * 200 = 3200 total trials, sd ~ 0.0043; allow 5 sd.
  CHECK(report.overall_rate == Catch::Approx(0.0625).margin(0.022));
  // The analytic floor at d = 5, eta = 0.05 (reference binary entropy of
  // 0.2 is 0.721928094887362).
  CHECK(report.analytic_floor ==
        Catch::Approx(0.25 * std::pow(2.0, -4 * 0.721928094887362))
            .epsilon(1e-12));
}

TEST_CASE("attack against near-exact laplace noise succeeds almost surely") {
  // eps so large the noise never crosses tau_max/2 in 10^3 draws.
  Mechanism lap = [](const TreeShape& tree, const NodeWeights& weights,
                     RngState rng) {
    return laplace_tree(tree, weights, 1e6, rng);
  };
  AttackConfig cfg = attack_config(4, 8.0, 0.5, 0.0, 20, 1);
  AttackReport report = attack_success_rate(lap, cfg, RngState(29));
  CHECK(report.overall_rate == 1.0);
}

TEST_CASE("attack median-of-s amplification rescues a noisy mechanism") {
  // Laplace noise at half the decision margin flips individual runs often
  // (per-node flip rate ~0.11), but the entry-wise median of 9 runs almost
  // never flips. eta = 0 keeps the walk itself deterministic so the
  // contrast is purely the released estimates.
  Mechanism lap = [](const TreeShape& tree, const NodeWeights& weights,
                     RngState rng) {
    return laplace_tree(tree, weights, 0.5, rng);
  };
  const int d = 4;
  const double tau_max = 12.0;
  AttackConfig noisy = attack_config(d, tau_max, 0.5, 0.0, 60, 1);
  AttackConfig stable = attack_config(d, tau_max, 0.5, 0.0, 60, 9);
  double r1 =
      attack_success_rate(lap, noisy, RngState(31)).overall_rate;
  double r9 =
      attack_success_rate(lap, stable, RngState(31)).overall_rate;
  CHECK(r9 > r1);
  CHECK(r9 > 0.9);
  CHECK(r1 < 0.9);
}

TEST_CASE("attack index subsampling measures the requested number of leaves") {
  AttackConfig cfg = attack_config(6, 10.0, 0.5, 0.0, 5, 1, 7);
  AttackReport report =
      attack_success_rate(exact_mechanism(), cfg, RngState(37));
  CHECK(report.per_index.size() == 7);
  std::int64_t last = 0;
  for (const auto& row : report.per_index) {
    CHECK(row.leaf_index > last);  // sorted, distinct
    last = row.leaf_index;
    CHECK(row.leaf_index >= 1);
    CHECK(row.leaf_index <= 32);
    CHECK(row.rate == 1.0);  // exact mechanism still decodes perfectly
  }
  // Same seed, same subsample: the report replays identically.
  AttackReport again =
      attack_success_rate(exact_mechanism(), cfg, RngState(37));
  REQUIRE(again.per_index.size() == report.per_index.size());
  for (std::size_t i = 0; i < report.per_index.size(); ++i)
    CHECK(again.per_index[i].leaf_index == report.per_index[i].leaf_index);
}

TEST_CASE("gamma2 witness matches closed-form references") {
  CHECK(gamma2_witness_value(1) == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(gamma2_witness_value(2) ==
        Catch::Approx(1.14412280563537).epsilon(1e-12));
  CHECK(gamma2_witness_value(3) ==
        Catch::Approx(1.27286157454491).epsilon(1e-12));
  CHECK(gamma2_witness_value(4) ==
        Catch::Approx(1.39214100670302).epsilon(1e-12));
  CHECK(gamma2_witness_value(6) ==
        Catch::Approx(1.60837103424146).epsilon(1e-12));
  CHECK(gamma2_witness_value(8) ==
        Catch::Approx(1.80115403967849).epsilon(1e-12));
  CHECK_THROWS_AS(gamma2_witness_value(0), input_error);
  CHECK_THROWS_AS(gamma2_witness_value(63), resource_error);
}

TEST_CASE("gamma2 witness agrees with the dense nuclear-norm oracle") {
  for (int d = 1; d <= 6; ++d)
    CHECK(gamma2_witness_value(d) ==
          Catch::Approx(nuclear_norm_bruteforce(d)).epsilon(1e-9));
  CHECK_THROWS_AS(nuclear_norm_bruteforce(9), resource_error);
  CHECK_THROWS_AS(nuclear_norm_bruteforce(0), input_error);
}

TEST_CASE("gamma2 witness scales like the square root of the depth") {
  // The ratio decreases from 1 toward 1/sqrt(3) ~ 0.577 as d grows; the
  // load-bearing property is that it stays above 1/2.
  for (int d = 1; d <= 20; ++d) {
    double ratio = gamma2_witness_value(d) / std::sqrt(static_cast<double>(d));
    CHECK(ratio > 0.577);
    CHECK(ratio <= 1.0 + 1e-12);
  }
}
