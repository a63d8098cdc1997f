#pragma once

#include <stdexcept>
#include <string>

namespace mmgnn {

/// Root of every error this library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: malformed files, inconsistent shapes between artifacts,
/// violated preconditions. The CLI maps this family to exit code 1.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class FormatError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class RangeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class GroupingError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class StratificationError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Misuse of an API contract that is not about user data (e.g. calling
/// backward on a non-scalar, reducing an empty tensor).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values or out-of-domain arguments to a numeric routine.
class NumericError : public Error {
 public:
  using Error::Error;
};

class DomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Training produced a non-finite loss.
class TrainingError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace mmgnn
