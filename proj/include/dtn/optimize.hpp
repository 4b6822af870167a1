#pragma once

// Direct search for optimal threshold policies (fixed horizon and optimal
// stopping time) and for the best member of each heuristic class.

#include <string>
#include <string_view>
#include <vector>

#include "dtn/metrics.hpp"
#include "dtn/model.hpp"
#include "dtn/policy.hpp"

namespace dtn {

struct SearchConfig {
  int resolution = 41;           ///< grid points per dimension over [0, T]
  double shrink = 0.5;           ///< pattern-search mesh contraction
  double min_mesh = 1e-4;        ///< final mesh as a fraction of T
  int max_evaluations = 20000;   ///< per start
  int multistart = 8;
  int sweep_steps = 400;         ///< RK4 steps per horizon during the coarse sweep
  int static_time_resolution = 11;  ///< value grid per level for the StaticTime class
  IntegratorOptions integrator;  ///< used for refinement and reported values
  int threads = 1;

  // Stopping-time search.
  int stopping_grid = 11;        ///< outer grid points over (0, T0]
  int golden_iterations = 20;

  void validate() const;
};

struct StartTrace {
  std::vector<double> seed;
  std::vector<double> result;
  double objective = 0.0;
  int evaluations = 0;
};

struct OptimizationReport {
  ForwardingPolicy policy = policy::Zero{};
  /// Energy cost at T (fixed horizon), f(T)+energy cost (stopping) or
  /// unbiased cost (heuristic classes).
  double objective = 0.0;
  double unbiased_cost = 0.0;
  double delivery = 0.0;
  bool feasible = false;
  int evaluations = 0;
  double horizon = 0.0;  ///< terminal time the policy was optimized for
  std::vector<StartTrace> traces;
};

enum class HeuristicClass {
  StaticEnergy,
  StaticTime,
  ProbabilityThreshold,
  InfectionThreshold,
  One,
  Zero,
};

std::string_view heuristic_name(HeuristicClass c);
/// Accepts the names produced by heuristic_name; throws ConfigError otherwise.
HeuristicClass parse_heuristic(std::string_view name);
inline constexpr HeuristicClass kAllHeuristics[] = {
    HeuristicClass::StaticEnergy,         HeuristicClass::StaticTime,
    HeuristicClass::ProbabilityThreshold, HeuristicClass::InfectionThreshold,
    HeuristicClass::One,                  HeuristicClass::Zero};

/// Levels s..B (as control indices) whose infective fraction can become
/// positive under the all-ones control. Others have irrelevant thresholds.
std::vector<int> reachable_controls(const ModelParams& params, const StateVector& init);

OptimizationReport optimize_fixed_T(const ModelParams& params, const StateVector& init,
                                    const SearchConfig& cfg = {});

OptimizationReport optimize_stopping(const ModelParams& params, const StateVector& init,
                                     const StoppingPenalty& fpen, const SearchConfig& cfg = {});

OptimizationReport optimize_heuristic(HeuristicClass cls, const ModelParams& params,
                                      const StateVector& init, const SearchConfig& cfg = {});

}  // namespace dtn
