// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#include <catch_amalgamated.hpp>

#include <limits>

#include "treedp/budget.hpp"

using treedp::compose_basic;
using treedp::compose_parallel;
using treedp::group_privacy_factor;
using treedp::input_error;
using treedp::PrivacyBudget;

TEST_CASE("PrivacyBudget validates its ranges") {
  CHECK_NOTHROW(PrivacyBudget(0.0, 0.0));
  CHECK_NOTHROW(PrivacyBudget(1.0, 1.0));
  CHECK_THROWS_AS(PrivacyBudget(-0.1, 0.0), input_error);
  CHECK_THROWS_AS(PrivacyBudget(1.0, -0.1), input_error);
  CHECK_THROWS_AS(PrivacyBudget(1.0, 1.5), input_error);
  CHECK_THROWS_AS(
      PrivacyBudget(std::numeric_limits<double>::quiet_NaN(), 0.0),
      input_error);
  CHECK_THROWS_AS(
      PrivacyBudget(std::numeric_limits<double>::infinity(), 0.0),
      input_error);
}

TEST_CASE("compose_basic adds budgets and caps delta at one") {
  PrivacyBudget out = compose_basic({{0.5, 0.125}, {0.25, 0.25}, {0.25, 0.0}});
  CHECK(out.eps == 1.0);
  CHECK(out.delta == 0.375);

  PrivacyBudget capped = compose_basic({{1.0, 0.7}, {1.0, 0.7}});
  CHECK(capped.eps == 2.0);
  CHECK(capped.delta == 1.0);

  CHECK_THROWS_AS(compose_basic({}), input_error);

  // Halves recompose to the original epsilon exactly in binary floating
  // point, which lets callers echo a requested budget verbatim.
  PrivacyBudget halves = compose_basic({{0.5, 5e-7}, {0.5, 5e-7}});
  CHECK(halves.eps == 1.0);
  CHECK(halves.delta == 1e-6);
}

TEST_CASE("compose_parallel takes the component-wise maximum") {
  PrivacyBudget out = compose_parallel({{0.5, 1e-6}, {0.25, 2e-6}});
  CHECK(out.eps == 0.5);
  CHECK(out.delta == 2e-6);
  CHECK_THROWS_AS(compose_parallel({}), input_error);
}

TEST_CASE("group_privacy_factor matches the reference value at k=10") {
  PrivacyBudget g = group_privacy_factor({0.1, 1e-6}, 10);
  CHECK(g.eps == Catch::Approx(1.0).epsilon(1e-15));
  // delta * (e^{k eps} - 1)/(e^{eps} - 1), 30-digit reference.
  CHECK(g.delta == Catch::Approx(1.63379939996636e-5).epsilon(1e-12));
}

TEST_CASE("group_privacy_factor handles its edge cases") {
  PrivacyBudget identity = group_privacy_factor({0.3, 1e-5}, 1);
  CHECK(identity.eps == 0.3);
  CHECK(identity.delta == 1e-5);

  // eps = 0 degenerates to k * delta.
  PrivacyBudget lin = group_privacy_factor({0.0, 1e-3}, 5);
  CHECK(lin.eps == 0.0);
  CHECK(lin.delta == Catch::Approx(5e-3).epsilon(1e-15));

  // delta amplification is capped at 1.
  PrivacyBudget capped = group_privacy_factor({1.0, 0.5}, 20);
  CHECK(capped.delta == 1.0);

  CHECK_THROWS_AS(group_privacy_factor({0.1, 1e-6}, 0), input_error);
  CHECK_THROWS_AS(group_privacy_factor({0.1, 1e-6}, -3), input_error);
}
