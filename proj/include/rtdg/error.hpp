#pragma once

#include <stdexcept>
#include <string>

namespace rtdg {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when a symmetric operator turns out not to be positive definite,
/// which for the symmetric scheme means the penalty parameter is too small.
class NotPositiveDefinite : public Error {
public:
  using Error::Error;
};

}  // namespace rtdg
