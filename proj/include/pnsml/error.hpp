#pragma once

#include <stdexcept>
#include <string>

namespace pnsml {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input that violates a documented precondition or file schema.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A probability of causation that is undefined for the given data,
/// e.g. PN when P(x,y) = 0.
class UndefinedQuantity : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A computation that would exceed its memory or size budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace pnsml
