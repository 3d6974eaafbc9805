#pragma once

#include <stdexcept>
#include <string>

namespace catgen {

/// Bad arguments or malformed configuration. The CLI maps this to exit code 1.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input data violates a precondition (bad file, ragged rows, duplicate ids,
/// degenerate series, ...). The CLI maps this to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or an otherwise failed numerical computation. Exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace catgen
