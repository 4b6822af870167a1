#pragma once

#include <stdexcept>
#include <string>

namespace dtn {

/// Invalid parameters, dimensions or configuration. Maps to CLI exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// No admissible policy meets the mandated delivery probability. Maps to exit code 3.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double max_delivery)
      : std::runtime_error(what), max_delivery_(max_delivery) {}

  /// Largest delivery probability observed while searching.
  double max_delivery() const noexcept { return max_delivery_; }

 private:
  double max_delivery_;
};

/// Non-finite values or an admissibility violation the integrator could not repair.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dtn
