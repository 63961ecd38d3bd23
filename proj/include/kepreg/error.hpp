#pragma once

#include <stdexcept>
#include <string>

namespace kepreg {

/// Base class of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input outside the domain of a map (collision point, dependent vectors, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or parameter combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A state that violates a required invariant (off-manifold seed, BL != 0, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// The requested case is intentionally not supported.
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

}  // namespace kepreg
