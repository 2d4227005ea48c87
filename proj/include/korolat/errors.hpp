#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace korolat {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A parameter is outside the range where a formula is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A configured size cap (index-set entries, quadrature grid) would be exceeded.
class ResourceError : public Error {
 public:
  using Error::Error;
};

class UnsupportedAlphaError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A randomized search ran out of attempts.
class RetryExhaustedError : public Error {
 public:
  RetryExhaustedError(const std::string& what, std::size_t attempts)
      : Error(what + " (attempts: " + std::to_string(attempts) + ")"), attempts_(attempts) {}

  std::size_t attempts() const noexcept { return attempts_; }

 private:
  std::size_t attempts_;
};

/// The per-fiber least-squares system could not be solved.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::size_t fiber)
      : Error(what + " (fiber " + std::to_string(fiber) + ")"), fiber_(fiber) {}

  std::size_t fiber() const noexcept { return fiber_; }

 private:
  std::size_t fiber_;
};

}  // namespace korolat
