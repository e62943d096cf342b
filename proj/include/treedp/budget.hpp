// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "treedp/errors.hpp"

namespace treedp {

// An (eps, delta) differential-privacy budget. eps >= 0 (0 meaning no
// privacy cost); delta in [0, 1], with 0 meaning pure DP.
struct PrivacyBudget {
  double eps = 0.0;
  double delta = 0.0;

  PrivacyBudget() = default;
  PrivacyBudget(double e, double d) : eps(e), delta(d) {
    if (!(eps >= 0.0) || !std::isfinite(eps))
      throw input_error("budget: eps must be finite and >= 0");
    if (!(delta >= 0.0 && delta <= 1.0))
      throw input_error("budget: delta must be in [0, 1]");
  }
};

// Basic (sequential) composition: budgets add; delta saturates at 1.
inline PrivacyBudget compose_basic(const std::vector<PrivacyBudget>& parts) {
  if (parts.empty()) throw input_error("compose_basic: no budgets given");
  double eps = 0.0, delta = 0.0;
  for (const auto& b : parts) {
    eps += b.eps;
    delta += b.delta;
  }
  return PrivacyBudget(eps, std::min(delta, 1.0));
}

// Parallel composition over mechanisms touching disjoint parts of the input:
// the max budget in each coordinate. Disjointness is the caller's claim;
// it is not checkable here.
inline PrivacyBudget compose_parallel(const std::vector<PrivacyBudget>& parts) {
  if (parts.empty()) throw input_error("compose_parallel: no budgets given");
  double eps = 0.0, delta = 0.0;
  for (const auto& b : parts) {
    eps = std::max(eps, b.eps);
    delta = std::max(delta, b.delta);
  }
  return PrivacyBudget(eps, delta);
}

// Group privacy for a group of size k: (eps, delta) -> (k*eps, delta') with
// delta' = delta * (e^{k*eps} - 1) / (e^{eps} - 1), clipped to 1. Uses expm1
// so small eps stays accurate; the ratio tends to k as eps -> 0.
inline PrivacyBudget group_privacy_factor(const PrivacyBudget& b, int k) {
  if (k < 1) throw input_error("group_privacy_factor: group size must be >= 1");
  if (k == 1 || b.eps == 0.0)
    return PrivacyBudget(static_cast<double>(k) * b.eps,
                         std::min(1.0, static_cast<double>(k) * b.delta));
  double num = std::expm1(static_cast<double>(k) * b.eps);
  double den = std::expm1(b.eps);
  double factor = std::isfinite(num) ? num / den
                                     : std::numeric_limits<double>::infinity();
  double delta = b.delta == 0.0 ? 0.0 : std::min(1.0, b.delta * factor);
  return PrivacyBudget(static_cast<double>(k) * b.eps, delta);
}

}  // namespace treedp
