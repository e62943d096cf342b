// SPDX-License-Identifier: Apache-2.0
// Copyright (c) 2026 treedp contributors

#pragma once

#include <stdexcept>
#include <string>

namespace treedp {

// Error taxonomy shared by the library and the CLI. Each class maps to a
// distinct process exit code so scripted callers can tell malformed input
// apart from a refused utility precondition or a size cap.
//   input_error        -> exit 2 (bad files, bad parameter ranges)
//   precondition_error -> exit 3 (a utility precondition was declined; privacy
//                                 would still hold, accuracy would not)
//   resource_error     -> exit 4 (configured size/capacity cap exceeded)
class input_error : public std::runtime_error {
 public:
  explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

class precondition_error : public std::runtime_error {
 public:
  explicit precondition_error(const std::string& what)
      : std::runtime_error(what) {}
};

class resource_error : public std::runtime_error {
 public:
  explicit resource_error(const std::string& what)
      : std::runtime_error(what) {}
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitInputError = 2;
inline constexpr int kExitPreconditionRefused = 3;
inline constexpr int kExitResourceCap = 4;

}  // namespace treedp
