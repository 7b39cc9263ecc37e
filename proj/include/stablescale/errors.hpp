#pragma once

#include <stdexcept>
#include <string>

namespace stablescale {

/// Inconsistent sizes, missing sections, or a model that does not support the
/// requested operation.
class ConfigurationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// The requested closed form does not exist for the given drift family.
class UnsupportedError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A file could not be read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace stablescale
