#pragma once

#include <stdexcept>
#include <string>

namespace htde {

/// Raised when a requested dense object would exceed the configured entry budget.
class CapacityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for malformed run configuration or incompatible inputs.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace htde
