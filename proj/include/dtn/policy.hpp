#pragma once

// Forwarding policies: optimal-structure threshold vectors and the heuristic
// classes they are compared against. Every policy compiles to a
// piecewise-constant ControlSchedule so the integrator never has to locate
// control discontinuities itself.

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dtn/model.hpp"

namespace dtn {

namespace policy {

/// u_i = 1 for t < times[i-s], 0 afterwards.
struct Threshold {
  std::vector<double> times;
};

/// Same control `value` for every level until `jump`, zero afterwards.
struct StaticEnergy {
  double jump = 0.0;
  double value = 0.0;
};

/// Per-level constants held over the whole horizon.
struct StaticTime {
  std::vector<double> values;
};

/// All ones until the delivery probability reaches q, then zero (latching).
struct ProbabilityThreshold {
  double q = 0.0;
};

/// All ones until sum_{i>=s} I_i reaches c, then zero (latching).
struct InfectionThreshold {
  double c = 0.0;
};

struct One {};
struct Zero {};

struct LevelSchedule {
  std::vector<double> breaks;  ///< sorted
  std::vector<double> values;  ///< breaks.size() + 1 entries
};

/// General per-level piecewise-constant control.
struct PiecewiseConstant {
  std::vector<LevelSchedule> levels;  ///< one per level s..B
};

}  // namespace policy

using ForwardingPolicy =
    std::variant<policy::Threshold, policy::StaticEnergy, policy::StaticTime,
                 policy::ProbabilityThreshold, policy::InfectionThreshold, policy::One,
                 policy::Zero, policy::PiecewiseConstant>;

/// Stable tag used in serialization ("threshold", "static_energy", ...).
std::string_view policy_tag(const ForwardingPolicy& policy);

bool is_feedback(const ForwardingPolicy& policy);

/// Throws ConfigError when sizes or ranges are invalid for `params`.
void validate_policy(const ForwardingPolicy& policy, const ModelParams& params);

/// Latch owned by the caller; feedback policies flip it once and never reset.
struct FeedbackLatch {
  bool dropped = false;
};

Control control_at(const ForwardingPolicy& policy, double t, const StateVector& state,
                   const ModelParams& params, FeedbackLatch& latch);

/// Sorted times in (0, horizon) at which the control vector changes. Feedback
/// variants integrate the all-ones system to find their crossing time.
std::vector<double> breakpoints(const ForwardingPolicy& policy, const ModelParams& params,
                                const StateVector& init, const IntegratorOptions& opts = {});

/// Time at which a feedback policy drops to zero: 0 if already satisfied at
/// t = 0, empty if never reached within the horizon. Accurate to the RK4
/// order of the integrator (bisection on the sub-step length).
std::optional<double> feedback_drop_time(const ForwardingPolicy& policy,
                                         const ModelParams& params, const StateVector& init,
                                         const IntegratorOptions& opts = {});

ControlSchedule compile(const ForwardingPolicy& policy, const ModelParams& params,
                        const StateVector& init, const IntegratorOptions& opts = {});

Trajectory integrate(const ForwardingPolicy& policy, const ModelParams& params,
                     const StateVector& init, double end_time,
                     const IntegratorOptions& opts = {});

}  // namespace dtn
