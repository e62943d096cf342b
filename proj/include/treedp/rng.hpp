// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <cstdint>

namespace treedp {

// Deterministic splittable random stream.
//
// A counter-based SplitMix64 generator: the same seed always replays the same
// sequence, and split(index) derives an independent child stream as a pure
// function of (current state, index) without consuming from this stream.
// Experiments fan out as master.split(trial).split(...) so trial counts can
// grow without reshuffling earlier trials.
//
// Not cryptographic; statistical quality is what Monte Carlo needs here.
class RngState {
 public:
  explicit RngState(std::uint64_t seed) : state_(mix(seed + kGamma)) {}

  // Independent substream keyed by `index`; does not advance this stream.
  RngState split(std::uint64_t index) const {
    std::uint64_t child = mix((state_ ^ kSplitSalt) + (index + 1) * kGamma);
    return RngState(raw_tag{}, mix(child + kGamma));
  }

  std::uint64_t next_u64() {
    state_ += kGamma;
    return mix(state_);
  }

  // Uniform draw in the open interval (0, 1): 53 random bits centered in the
  // half-open lattice, so 0 and 1 are never returned and log()/log1p() on the
  // result are always finite.
  double uniform01() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  bool operator==(const RngState& other) const = default;

 private:
  struct raw_tag {};
  RngState(raw_tag, std::uint64_t raw_state) : state_(raw_state) {}

  static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
  static constexpr std::uint64_t kSplitSalt = 0xD6E8FEB86659FD93ULL;

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  std::uint64_t state_;
};

}  // namespace treedp
