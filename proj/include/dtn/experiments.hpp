#pragma once

// Scripted studies: mean-field vs simulation validation, the heuristic sweep,
// robustness to clock and energy-estimation errors, and the multi-message
// lifetime experiment. Results are plain tables for the CLI to serialize.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dtn/mcsim.hpp"
#include "dtn/model.hpp"
#include "dtn/optimize.hpp"

namespace dtn::experiments {

struct ExperimentConfig {
  SearchConfig search;
  mc::MCConfig mc;
  int threads = 1;  ///< concurrent sweep points
};

/// A table with one row per sweep point. Absent cells (infeasible classes)
/// are nullopt.
struct ExperimentResult {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<std::optional<double>>> rows;
  std::map<std::string, double> summary;
  std::uint64_t seed = 0;
  std::string config_hash;  ///< filled in by the caller that owns the config

  /// Column index by name; throws ConfigError when missing.
  std::size_t column(const std::string& name) const;
  std::optional<double> at(std::size_t row, const std::string& name) const;
};

/// Simulator settings used by the validation and robustness studies.
mc::MCConfig exponential_validation_mc();
/// N=41, alpha=0.4, cutoffs 2 min and 24 h, rescaled to the pair rate beta/N.
mc::MCConfig powerlaw_validation_mc(const ModelParams& params);
mc::MCConfig robustness_mc();

std::vector<double> default_validation_p();
std::vector<double> default_beta_sweep();

/// Columns: p, ode_cost, mc_cost_mean, mc_cost_std, ode_delivery,
/// mc_delivery_mean, mc_delivery_std, mc_delivered_fraction, mc_contacts_per_node.
/// A mandate the instance cannot reach gives a row with only p filled in.
ExperimentResult run_validation(const ModelParams& params, const StateVector& init,
                                const ExperimentConfig& cfg, const std::vector<double>& p_values);

/// Columns: beta, optimal, one column per heuristic class, best_heuristic,
/// gap (relative to the best heuristic), one_excess (One against the worst
/// other heuristic). beta0 follows beta.
ExperimentResult run_heuristic_sweep(const ModelParams& params, const StateVector& init,
                                     const ExperimentConfig& cfg,
                                     const std::vector<double>& beta_values);

enum class RobustnessVariable { ClockOffset, LevelEstimate };

/// The threshold policy is optimized once on the error-free model; each
/// value of theta* (or p*) is simulated with the same root seed. Columns:
/// value, cost_mean, cost_std, delivery_mean, delivery_std, delivered_fraction.
ExperimentResult run_robustness(const ModelParams& params, const StateVector& init,
                                const ExperimentConfig& cfg, RobustnessVariable variable,
                                const std::vector<double>& values);

struct MultiMessageConfig {
  int M = 200;              ///< message count target
  double upsilon = 0.001;   ///< fraction of the population seeded per message
  double ttl = 100.0;
  double p = 0.95;
  /// Policy family; nullopt is the myopic optimal threshold policy.
  std::optional<HeuristicClass> family;

  void validate() const;
};

std::string family_name(const std::optional<HeuristicClass>& family);

/// Seeds one message: from each level j >= s+r moves upsilon * v_j / sum_{m>=s+r} v_m
/// of the population to infective level j-r. nullopt when the eligible mass is below upsilon.
std::optional<StateVector> spread_message(const std::vector<double>& levels, double upsilon,
                                          const ModelParams& params);

/// Columns: k, cumulative_cost, message_cost, feasible. The last row is the
/// first infeasible message unless M messages were sent. summary["messages"]
/// holds the count delivered before exhaustion.
ExperimentResult run_multi_message(const ModelParams& params, const std::vector<double>& start,
                                   const MultiMessageConfig& mm, const ExperimentConfig& cfg);

/// Multi-message setting: B=5, s=2, r=1, beta=beta0=3, T=100, p=0.95, a_i=(B-i)^2.
ModelParams multi_message_params();
std::vector<double> multi_message_start();
/// Reduced search used per message: the sweep runs once per message and family.
SearchConfig multi_message_search();

}  // namespace dtn::experiments
