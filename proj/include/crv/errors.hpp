#pragma once

#include <stdexcept>
#include <string>

namespace crv {

/// Bad value fed to a formula or constructor (non-finite, out of domain).
class InvalidInput : public std::invalid_argument {
  public:
    using std::invalid_argument::invalid_argument;
};

/// Eq-specific degenerate case: back-off contention with fewer than two
/// stations. Callers substitute one contention window instead.
class DegenerateContention : public InvalidInput {
  public:
    using InvalidInput::InvalidInput;
};

/// Scenario file or SimConfig rejected before a run starts.
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Route selection over an empty table.
class NoRouteError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A run broke one of its internal contracts (conservation, causality,
/// loop freedom). Always fatal for the offending run.
class InvariantViolation : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

} // namespace crv
