#pragma once

#include <stdexcept>
#include <string>

namespace ksb {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char* kind() const noexcept { return "error"; }
};

// Precondition or parameter-range violation.
class DomainError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "domain"; }
};

class QuadratureError : public Error {
 public:
  QuadratureError(const std::string& what, double value, double abs_error)
      : Error(what), value(value), abs_error(abs_error) {}
  const char* kind() const noexcept override { return "quadrature"; }
  double value;
  double abs_error;
};

class SolveError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "solve"; }
};

}  // namespace ksb
