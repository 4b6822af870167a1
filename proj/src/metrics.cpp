#include "dtn/metrics.hpp"

#include <limits>

#include "dtn/error.hpp"

namespace dtn {

void StoppingPenalty::validate() const {
  if (!(coefficient > 0.0) || !std::isfinite(coefficient))
    throw ConfigError("stopping penalty: coefficient must be > 0");
  if (!(exponent > 0.0) || !std::isfinite(exponent))
    throw ConfigError("stopping penalty: exponent must be > 0");
}

double delivery_probability(const Trajectory& traj, const ModelParams& params) {
  return delivery_from_exposure(traj.final_state().E, params.beta0);
}

bool throughput_ok(const StateVector& terminal, const ModelParams& params) {
  return terminal.E >= params.throughput_target() - 1e-12;
}

bool throughput_ok(const Trajectory& traj, const ModelParams& params) {
  return throughput_ok(traj.final_state(), params);
}

double energy_cost(const StateVector& state, const ModelParams& params) {
  double cost = 0.0;
  for (std::size_t i = 0; i < params.penalties.size(); ++i)
    cost += params.penalties[i] * (state.S[i] + state.I[i]);
  return cost;
}

double unbiased_cost(const Trajectory& traj, const ModelParams& params) {
  return energy_cost(traj.final_state(), params) - energy_cost(traj.initial_state(), params);
}

double stopping_objective(const Trajectory& traj, const ModelParams& params,
                          const StoppingPenalty& fpen) {
  fpen.validate();
  const double gap = traj.final_state().E - params.throughput_target();
  if (std::abs(gap) > kConstraintActiveTol)
    throw ConfigError("stopping_objective: throughput constraint not active at terminal time");
  return fpen.value(traj.end_time()) + energy_cost(traj.final_state(), params);
}

double zero_control_horizon(const ModelParams& params, const StateVector& init) {
  if (!(params.p >= 0.0 && params.p < 1.0))
    throw ConfigError("zero_control_horizon: p must lie in [0, 1)");
  const double q = init.transmitting_infectives(params.s);
  if (!(q > 0.0))
    throw InfeasibleError("zero_control_horizon: no infectives able to reach the destination",
                          0.0);
  return params.throughput_target() / q;
}

}  // namespace dtn
