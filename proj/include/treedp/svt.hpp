// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "treedp/budget.hpp"
#include "treedp/errors.hpp"
#include "treedp/noise.hpp"
#include "treedp/rng.hpp"

namespace treedp {

// Sparse-vector session: answers an adaptive stream of up to `stream_len`
// threshold queries, each a sensitivity-1 value f compared against a fixed
// threshold tau, stopping once the top budget c is spent. The whole session
// is eps-DP no matter how many queries are answered.
//
// Per query while t < c: report top iff f + Lap(4c/eps) >= the noisy
// threshold; each top redraws the threshold noise Lap(2c/eps) and increments
// t. Once t >= c every further query answers bottom without consuming
// randomness. The cutoff c may be fractional: noise scales use c itself,
// and with an integer counter "t >= c" first holds at t = ceil(c).
class SvtSession {
 public:
  SvtSession(double eta, double c, double tau, double eps,
             std::int64_t stream_len, RngState rng)
      : eta_(eta), c_(c), tau_(tau), eps_(eps), d_(stream_len), rng_(rng) {
    if (!(eta > 0.0 && eta < 1.0))
      throw input_error("svt: eta must be in (0, 1)");
    if (!(c >= 1.0) || !std::isfinite(c))
      throw input_error("svt: cutoff c must be >= 1");
    if (!std::isfinite(tau)) throw input_error("svt: tau must be finite");
    if (!(eps > 0.0) || !std::isfinite(eps))
      throw input_error("svt: eps must be finite and > 0");
    if (stream_len < 1) throw input_error("svt: stream_len must be >= 1");
    noisy_tau_ = tau_ + sample_laplace(2.0 * c_ / eps_, rng_);
  }

  // Answer one query; true = top (>= threshold), false = bottom. The
  // caller guarantees f is sensitivity-1 in the underlying dataset.
  bool answer(double f) {
    if (pos_ >= d_)
      throw input_error("svt: query beyond declared stream length " +
                        std::to_string(d_));
    ++pos_;
    if (!std::isfinite(f)) throw input_error("svt: query value must be finite");
    if (static_cast<double>(tops_) >= c_) return false;  // spent: no draw
    double noisy_f = f + sample_laplace(4.0 * c_ / eps_, rng_);
    if (noisy_f >= noisy_tau_) {
      // The threshold noise is redrawn on every top, including the final
      // one (where it can never be read again); keeps the draw sequence
      // canonical.
      noisy_tau_ = tau_ + sample_laplace(2.0 * c_ / eps_, rng_);
      ++tops_;
      return true;
    }
    return false;
  }

  int tops_used() const { return tops_; }
  bool exhausted() const { return static_cast<double>(tops_) >= c_; }
  double tau() const { return tau_; }
  std::int64_t queries_answered() const { return pos_; }
  std::int64_t stream_len() const { return d_; }

  // Accuracy radius: with probability >= 1 - eta, every answer up to (and
  // including) the one that spends the top budget is correct up to
  // tau +- Delta, Delta = (8c/eps) ln(2d/eta).
  double accuracy_radius() const {
    return 8.0 * c_ / eps_ * std::log(2.0 * static_cast<double>(d_) / eta_);
  }

  PrivacyBudget budget() const { return PrivacyBudget(eps_, 0.0); }

 private:
  double eta_;
  double c_;
  double tau_;
  double eps_;
  std::int64_t d_;
  RngState rng_;
  double noisy_tau_ = 0.0;
  int tops_ = 0;
  std::int64_t pos_ = 0;
};

inline SvtSession svt_open(double eta, double c, double tau, double eps,
                           std::int64_t stream_len, RngState rng) {
  return SvtSession(eta, c, tau, eps, stream_len, rng);
}

inline bool svt_answer(SvtSession& session, double f) {
  return session.answer(f);
}

}  // namespace treedp
