#pragma once

#include <cmath>
#include <string>

#include "dtn/model.hpp"

namespace dtn {

/// 1 - exp(-beta0 * E).
inline double delivery_from_exposure(double exposure, double beta0) {
  return -std::expm1(-beta0 * exposure);
}

/// Terminal-time penalty f(T) = coefficient * T^exponent (exponent > 0).
struct StoppingPenalty {
  double coefficient = 1.0;
  double exponent = 2.0;

  void validate() const;
  double value(double T) const { return coefficient * std::pow(T, exponent); }
  double derivative(double T) const {
    return coefficient * exponent * std::pow(T, exponent - 1.0);
  }
};

inline constexpr double kConstraintActiveTol = 1e-6;

double delivery_probability(const Trajectory& traj, const ModelParams& params);

/// E(T_end) >= -ln(1-p)/beta0 - 1e-12.
bool throughput_ok(const Trajectory& traj, const ModelParams& params);
bool throughput_ok(const StateVector& terminal, const ModelParams& params);

/// sum_i a_i (S_i + I_i)
double energy_cost(const StateVector& state, const ModelParams& params);

/// energy_cost(final) - energy_cost(initial)
double unbiased_cost(const Trajectory& traj, const ModelParams& params);

/// f(T_end) + energy_cost(final). Throws ConfigError unless the throughput
/// constraint is active at T_end (within kConstraintActiveTol on E).
double stopping_objective(const Trajectory& traj, const ModelParams& params,
                          const StoppingPenalty& fpen);

/// Horizon at which the zero control exactly meets the constraint:
/// -ln(1-p) / (beta0 * sum_{i>=s} I_i(0)). Throws InfeasibleError when no
/// transmitting infectives exist, ConfigError when p >= 1.
double zero_control_horizon(const ModelParams& params, const StateVector& init);

}  // namespace dtn
