#pragma once

#include <stdexcept>
#include <string>

namespace adgen {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad inputs: malformed files, shape mismatches, dangling references,
// incompatible checkpoints. The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Non-finite activations or losses. The CLI maps these to exit code 3.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace adgen
