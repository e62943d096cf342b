// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <cmath>
#include <string>

#include "treedp/errors.hpp"
#include "treedp/rng.hpp"

namespace treedp {

// Noise primitives used by every mechanism in the library. All samplers are
// pure functions of (parameters, rng) and consume a fixed number of uniform
// draws, so releases are bit-reproducible under a fixed seed.

// One draw from the Laplace distribution with scale sigma
// (density (1/2sigma)exp(-|x|/sigma); mean 0, variance 2 sigma^2).
inline double sample_laplace(double sigma, RngState& rng) {
  if (!(sigma > 0)) throw input_error("sample_laplace: sigma must be > 0");
  double u = rng.uniform01() - 0.5;  // in (-1/2, 1/2)
  double mag = -sigma * std::log1p(-2.0 * std::fabs(u));
  return u < 0 ? -mag : mag;
}

// One draw from N(0, sigma^2) via Box-Muller. Always consumes exactly two
// uniforms and caches nothing, keeping replay deterministic.
inline double sample_gaussian(double sigma, RngState& rng) {
  if (!(sigma > 0)) throw input_error("sample_gaussian: sigma must be > 0");
  double u1 = rng.uniform01();
  double u2 = rng.uniform01();
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  return sigma * std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
}

// Laplace density restricted to [-R, R] (zero outside, renormalized).
struct TruncLapParams {
  double sigma;
  double R;

  TruncLapParams(double sigma_in, double R_in) : sigma(sigma_in), R(R_in) {
    if (!(sigma > 0) || !(R > 0))
      throw input_error("TruncLapParams: sigma and R must be > 0");
  }
};

// Truncation radius that makes "value + TruncLap(1/eps, R)" an
// (eps, delta)-DP release of a sensitivity-1 quantity:
//   R = (1/eps) * ln(1 + (e^eps - 1) / (2 delta)).
// delta = 0 is rejected (the radius would be infinite; plain Laplace covers
// the pure-DP case).
inline double trunc_lap_radius(double eps, double delta) {
  if (!(eps > 0)) throw input_error("trunc_lap_radius: eps must be > 0");
  if (!(delta > 0) || !(delta < 1))
    throw input_error("trunc_lap_radius: delta must be in (0, 1)");
  return std::log1p(std::expm1(eps) / (2.0 * delta)) / eps;
}

// Quantile function of TruncLap(sigma, R); exact inverse of the normalized
// truncated CDF. Used by the sampler (no rejection loop, so the draw count
// per sample is fixed) and by distribution tests.
inline double trunc_lap_quantile(double p, const TruncLapParams& params) {
  if (!(p >= 0 && p <= 1))
    throw input_error("trunc_lap_quantile: p outside [0,1]");
  double e = std::exp(-params.R / params.sigma);
  double a = 1.0 - e;  // normalization: integral of exp(-|x|/sigma) is 2 sigma a
  if (p == 0.5) return 0.0;
  if (p < 0.5) return params.sigma * std::log(e + 2.0 * p * a);
  return -params.sigma * std::log(e + 2.0 * (1.0 - p) * a);
}

// CDF of TruncLap(sigma, R) at x; companion of trunc_lap_quantile.
inline double trunc_lap_cdf(double x, const TruncLapParams& params) {
  if (x <= -params.R) return 0.0;
  if (x >= params.R) return 1.0;
  double e = std::exp(-params.R / params.sigma);
  double a = 1.0 - e;
  if (x < 0) return (std::exp(x / params.sigma) - e) / (2.0 * a);
  return 1.0 - (std::exp(-x / params.sigma) - e) / (2.0 * a);
}

// One draw from TruncLap(sigma, R); support is exactly [-R, R].
inline double sample_trunc_laplace(const TruncLapParams& params,
                                   RngState& rng) {
  return trunc_lap_quantile(rng.uniform01(), params);
}

}  // namespace treedp
