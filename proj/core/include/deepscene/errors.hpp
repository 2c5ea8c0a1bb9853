#pragma once

#include <stdexcept>
#include <string>

namespace deepscene {

/// Shapes of two operands do not line up.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration value, unknown key or incompatible component choice.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// API used in a way that is not supported (e.g. backward on a leaf).
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data violates a structural invariant of a domain type.
class InvariantError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Vehicle placement could not satisfy the gap constraints.
class PlacementError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Internal simulator consistency failure (overlap, lost vehicle). Must never fire.
class SimulatorBug : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace deepscene
