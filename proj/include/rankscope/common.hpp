// Shared error types and version tag.
#pragma once

#include <stdexcept>
#include <string>

namespace rankscope {

inline constexpr const char* kVersion = "rankscope 0.1.0";

// Bad caller input: shape mismatches, non-finite entries, invalid parameters,
// malformed files. The CLI maps this to exit code 2.
struct input_error : std::runtime_error {
  explicit input_error(const std::string& what) : std::runtime_error(what) {}
};

// Numerical failure or degenerate configuration discovered mid-computation:
// non-convergence, degenerate tolerance, LayerNorm on a constant vector.
// The CLI maps this to exit code 3.
struct compute_error : std::runtime_error {
  explicit compute_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rankscope
