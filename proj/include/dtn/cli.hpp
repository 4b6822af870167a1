#pragma once

// Command-line surface: JSON configuration, command dispatch and CSV/JSON
// output. Exit codes: 0 ok, 1 internal error, 2 configuration error,
// 3 infeasible.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "dtn/experiments.hpp"
#include "dtn/mcsim.hpp"
#include "dtn/metrics.hpp"
#include "dtn/model.hpp"
#include "dtn/optimize.hpp"
#include "dtn/pmp.hpp"
#include "dtn/policy.hpp"

namespace dtn::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

enum ExitCode : int { kOk = 0, kInternal = 1, kConfig = 2, kInfeasible = 3 };

enum class RobustnessKind { ThetaStar, PStar };

struct ExperimentSettings {
  std::optional<std::vector<double>> p_values;
  std::optional<std::vector<double>> beta_values;
  std::optional<std::vector<double>> values;  ///< robustness magnitudes
  RobustnessKind variable = RobustnessKind::ThetaStar;
  int M = 200;
  double upsilon = 0.001;
  std::optional<double> ttl;  ///< defaults to the model horizon
  /// Multi-message families; nullopt entries are the myopic optimal policy.
  std::optional<std::vector<std::optional<HeuristicClass>>> families;
};

struct RunConfig {
  ModelParams params;
  StateVector init;
  std::optional<ForwardingPolicy> policy;
  SearchConfig search;
  mc::MCConfig mc;
  StoppingPenalty stopping;
  bool has_stopping = false;
  VerifyOptions verify;
  ExperimentSettings experiment;
  int report_points = 101;
  std::uint64_t seed = 1;
  std::string config_hash;
};

/// Strict parse: unknown keys, wrong types and invalid values throw ConfigError.
RunConfig parse_config(const json& doc);
RunConfig load_config(const std::filesystem::path& path);

json policy_to_json(const ForwardingPolicy& policy);
ForwardingPolicy policy_from_json(const json& j);
json report_to_json(const VerificationReport& rep);

/// 17 significant digits; absent cells are empty.
std::string format_number(double v);
void write_csv(const std::filesystem::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<std::optional<double>>>& rows);
/// Reads a file written by write_csv (empty cells become nullopt).
std::pair<std::vector<std::string>, std::vector<std::vector<std::optional<double>>>> read_csv(
    const std::filesystem::path& path);

/// Trajectory table t, S0..SB, I0..IB, E, u_s..u_B on `points` uniform times.
std::pair<std::vector<std::string>, std::vector<std::vector<std::optional<double>>>>
trajectory_table(const ForwardingPolicy& policy, const ModelParams& params,
                 const StateVector& init, int points, const IntegratorOptions& opts);

/// Parses argv and runs one command; messages go to out/err.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace dtn::cli
