#pragma once

// Agent-based simulation of the forwarding protocol over stochastic contacts.
//
// Nodes carry a true energy level, an infective flag and a clock offset. An
// infective meeting a susceptible transmits when its local clock is before the
// threshold of its *estimated* level and both sides physically have enough
// energy. Destination contacts are exponential at rate beta0/N per node.

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include "dtn/model.hpp"
#include "dtn/policy.hpp"

namespace dtn::mc {

/// Pairwise rate beta/N and node-destination rate beta0/N, taken from ModelParams.
struct ExponentialContacts {};

/// Per-pair renewal process with inter-contact density proportional to
/// t^-(1+alpha) on [t_min, t_max], in model time units.
struct TruncatedPowerLaw {
  double alpha = 0.4;
  double t_min = 1.0 / 720.0;
  double t_max = 1.0;
};

using ContactModel = std::variant<ExponentialContacts, TruncatedPowerLaw>;

enum class InitialAssignment { DeterministicRounding, Multinomial };

struct MCConfig {
  int N = 160;
  int runs = 200;
  std::uint64_t seed = 1;
  ContactModel contact = ExponentialContacts{};
  double theta_star = 0.0;  ///< clock offsets uniform on [-theta*, theta*]
  double p_star = 0.0;      ///< level misestimated by -1 / +1, each with this probability
  InitialAssignment assignment = InitialAssignment::DeterministicRounding;
  int report_points = 101;  ///< state-curve grid over [0, T]
  int threads = 1;

  void validate() const;
};

struct MCOutcome {
  bool delivered = false;
  std::optional<double> delivery_time;
  /// 1 - exp(-beta0/N * int_0^T #{infectives with energy >= s} dt): the
  /// delivery probability conditional on the run's infection path.
  double delivery_probability = 0.0;
  double unbiased_cost = 0.0;          ///< per node, over all levels
  std::vector<int> S_count, I_count;   ///< terminal histogram, sums to N
  double contacts_per_node = 0.0;
  /// Fractions on the reporting grid: curve_S[k][i] at grid time k.
  std::vector<std::vector<double>> curve_S, curve_I;
};

struct Stat {
  double mean = 0.0;
  std::optional<double> std;  ///< absent when runs < 2
};

struct EnsembleStats {
  int runs = 0;
  Stat delivery;            ///< conditional delivery probability
  Stat delivered_fraction;  ///< empirical delivered flags
  Stat unbiased_cost;
  Stat contacts_per_node;
  std::vector<double> grid;
  std::vector<std::vector<double>> mean_S, mean_I, std_S, std_I;
};

/// Threshold vector used by the nodes; accepts Threshold, One and Zero.
std::vector<double> node_thresholds(const ForwardingPolicy& policy, const ModelParams& params);

/// Inverse-CDF sample of the truncated Pareto law for a uniform draw in (0,1).
double sample_truncated_pareto(double alpha, double t_min, double t_max, double u);
/// Analytic mean of the same law.
double truncated_pareto_mean(double alpha, double t_min, double t_max);

/// The same law with both cutoffs multiplied by one factor so the mean
/// inter-contact time of a pair equals N/beta (the exponential pair rate).
TruncatedPowerLaw match_pair_rate(const TruncatedPowerLaw& law, int N, double beta);

/// Per-run seed derived from the root seed and run index (splitmix64).
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index);

/// Node counts per class: largest-remainder rounding of N*(S, I), ties to the lower index.
std::vector<int> round_assignment(const StateVector& init, int N);

MCOutcome run_once(const ForwardingPolicy& policy, const ModelParams& params,
                   const StateVector& init, const MCConfig& cfg, std::uint64_t run_seed);

/// Runs cfg.runs independent simulations seeded by derive_seed(cfg.seed, k).
EnsembleStats run_ensemble(const ForwardingPolicy& policy, const ModelParams& params,
                           const StateVector& init, const MCConfig& cfg);

}  // namespace dtn::mc
