// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>

#include "treedp/baselines.hpp"
#include "treedp/rng.hpp"
#include "treedp/tree.hpp"

using treedp::aggregate_exact;
using treedp::gaussian_tree;
using treedp::gaussian_tree_sigma;
using treedp::input_error;
using treedp::laplace_tree;
using treedp::LeafCounts;
using treedp::NodeEstimates;
using treedp::NodeWeights;
using treedp::RngState;
using treedp::TreeShape;

namespace {

LeafCounts small_counts() {
  LeafCounts counts;
  counts.values = {{"n4", 10}, {"n5", 20}, {"n6", 30}, {"n7", 40}};
  return counts;
}

}  // namespace

TEST_CASE("laplace baseline validates eps") {
  TreeShape t = treedp::complete_binary(3);
  NodeWeights w = aggregate_exact(t, small_counts());
  CHECK_THROWS_AS(laplace_tree(t, w, 0.0, RngState(1)), input_error);
  CHECK_THROWS_AS(laplace_tree(t, w, -1.0, RngState(1)), input_error);
}

TEST_CASE("gaussian sigma calibration matches reference values") {
  // sqrt(2 ln(1.25/delta)) * sqrt(d) / eps, 30-digit references.
  CHECK(gaussian_tree_sigma(10, 0.5, 1e-5) ==
        Catch::Approx(30.6412388996064).epsilon(1e-12));
  CHECK(gaussian_tree_sigma(3, 1.0, 1e-6) ==
        Catch::Approx(9.17779519577937).epsilon(1e-12));
}

TEST_CASE("gaussian baseline enforces the calibration's validity range") {
  CHECK_NOTHROW(gaussian_tree_sigma(3, 1.0, 1e-6));   // right edge included
  CHECK_THROWS_AS(gaussian_tree_sigma(3, 1.1, 1e-6), input_error);
  CHECK_THROWS_AS(gaussian_tree_sigma(3, 0.0, 1e-6), input_error);
  CHECK_THROWS_AS(gaussian_tree_sigma(3, 0.5, 0.0), input_error);
  CHECK_THROWS_AS(gaussian_tree_sigma(3, 0.5, 1.0), input_error);
  CHECK_THROWS_AS(gaussian_tree_sigma(0, 0.5, 1e-6), input_error);
}

TEST_CASE("baseline releases are deterministic under a fixed seed") {
  TreeShape t = treedp::complete_binary(3);
  LeafCounts counts = small_counts();
  NodeEstimates a = laplace_tree(t, counts, 1.0, RngState(5));
  NodeEstimates b = laplace_tree(t, counts, 1.0, RngState(5));
  CHECK(a.value == b.value);
  NodeEstimates c = gaussian_tree(t, counts, 0.5, 1e-6, RngState(5));
  NodeEstimates d = gaussian_tree(t, counts, 0.5, 1e-6, RngState(5));
  CHECK(c.value == d.value);
  // Different seeds give different noise.
  NodeEstimates e = laplace_tree(t, counts, 1.0, RngState(6));
  CHECK(a.value != e.value);
}

TEST_CASE("baseline noise is centered with the calibrated spread") {
  TreeShape t = treedp::complete_binary(3);
  NodeWeights w = aggregate_exact(t, small_counts());
  const double eps = 1.0;
  const int trials = 20000;
  const std::size_t root = static_cast<std::size_t>(t.root());
  const double truth = static_cast<double>(w.w[root]);

  double lap_sum = 0.0, lap_sum2 = 0.0;
  double gauss_sum = 0.0, gauss_sum2 = 0.0;
  RngState rng(77);
  for (int k = 0; k < trials; ++k) {
    RngState trial = rng.split(k);
    double le = laplace_tree(t, w, eps, trial.split(0)).value[root] - truth;
    double ge =
        gaussian_tree(t, w, eps, 1e-6, trial.split(1)).value[root] - truth;
    lap_sum += le;
    lap_sum2 += le * le;
    gauss_sum += ge;
    gauss_sum2 += ge * ge;
  }
  const double lap_sigma = t.depth() / eps;             // Lap scale, var 2b^2
  const double lap_var = 2 * lap_sigma * lap_sigma;
  CHECK(lap_sum / trials ==
        Catch::Approx(0.0).margin(5 * std::sqrt(lap_var / trials)));
  CHECK(lap_sum2 / trials == Catch::Approx(lap_var).epsilon(0.10));
  const double g_sigma = gaussian_tree_sigma(t.depth(), eps, 1e-6);
  CHECK(gauss_sum / trials ==
        Catch::Approx(0.0).margin(5 * g_sigma / std::sqrt(double(trials))));
  CHECK(gauss_sum2 / trials ==
        Catch::Approx(g_sigma * g_sigma).epsilon(0.06));
}

TEST_CASE("baseline estimates cover every node and reuse exact sums") {
  TreeShape t = treedp::complete_binary(4);
  LeafCounts counts;
  counts.values = {{"n8", 1000000}};
  NodeEstimates est = laplace_tree(t, counts, 1000.0, RngState(2));
  REQUIRE(est.value.size() == static_cast<std::size_t>(t.node_count()));
  // At eps = 1000 the noise scale is tiny, so noisy sums sit near the truth.
  NodeWeights w = aggregate_exact(t, counts);
  for (int i = 0; i < t.node_count(); ++i)
    CHECK(est.value[static_cast<std::size_t>(i)] ==
          Catch::Approx(static_cast<double>(w.w[static_cast<std::size_t>(i)]))
              .margin(1.0));
}
