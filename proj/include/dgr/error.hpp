#pragma once

#include <stdexcept>
#include <string>

namespace dgr {

// Bad configuration, bad CLI usage, malformed files, schema violations.
// Maps to process exit code 1.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Runtime failures: shape mismatches, non-finite values, I/O errors mid-run.
// Maps to process exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dgr
