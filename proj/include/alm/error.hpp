#pragma once

#include <stdexcept>
#include <string>

namespace alm {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input or configuration. The CLI maps this to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace alm
