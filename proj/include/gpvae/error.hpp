#pragma once

#include <stdexcept>
#include <string>

namespace gpvae {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix dimensions.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of an operation (log of a nonpositive value,
/// nonpositive band diagonal, invalid rate, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf produced, factorization failure, divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files and invalid configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace gpvae
