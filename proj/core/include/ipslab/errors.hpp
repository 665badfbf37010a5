#pragma once

#include <stdexcept>
#include <string>

namespace ipslab {

/// Bad or inconsistent user input (configs, malformed specs). CLI exit code 2.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numeric failure at runtime: divergence, non-convergent quadrature,
/// singular systems. CLI exit code 3.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Violated mathematical precondition (evaluation outside the domain,
/// wrong layout, mismatched grids). CLI exit code 4.
class DomainError : public std::runtime_error {
public:
  explicit DomainError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace ipslab
