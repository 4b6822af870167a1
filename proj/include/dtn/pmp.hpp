#pragma once

// Maximum-principle machinery: co-states, switching functions, the
// Hamiltonian, and a verifier for candidate threshold optima.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dtn/metrics.hpp"
#include "dtn/model.hpp"
#include "dtn/policy.hpp"

namespace dtn {

/// Co-state values at one instant: lambda (adjoint of S), rho (adjoint of I).
struct CoState {
  std::vector<double> lambda;
  std::vector<double> rho;
  double lambdaE = 0.0;
};

struct CoStateTrajectory {
  std::vector<double> times;
  std::vector<CoState> values;  ///< one per grid point
  double lambdaE = 0.0;
  int lambda0bar = 1;
};

/// d/dt of (lambda, rho); lambdaE of the result is 0.
CoState costate_rhs(const CoState& c, const StateVector& x, std::span<const double> u,
                    const ModelParams& params);

/// Backward RK4 on the trajectory's own grid, from lambda_i(T) = rho_i(T) = -lambda0bar * a_i.
/// Mid-step states come from cubic Hermite interpolation of the forward solution.
CoStateTrajectory integrate_costates(const Trajectory& traj, double lambdaE, int lambda0bar,
                                     const ModelParams& params);

/// phi_i = beta I_i sum_{j>=r} (-lambda_j + rho_{j-r} + rho_{i-s} - rho_i) S_j, s <= level <= B.
double switching_function(int level, const StateVector& x, const CoState& c,
                          const ModelParams& params);

struct HamiltonianForms {
  double expanded = 0.0;  ///< sum lambda dS + sum rho dI + lambdaE dE
  double switching = 0.0; ///< lambdaE sum_{i>=s} I_i + sum phi_i u_i
};

HamiltonianForms hamiltonian_forms(const StateVector& x, const CoState& c,
                                   std::span<const double> u, const ModelParams& params);

/// Expanded form; throws NumericalError when the two forms differ by more
/// than 1e-10 * (1 + |H|).
double hamiltonian(const StateVector& x, const CoState& c, std::span<const double> u,
                   const ModelParams& params);

struct VerifyOptions {
  double tol_V = 1e-2;       ///< fraction of T
  double tol_H = 1e-3;
  double phi_u_tol = 1e-9;
  int resolution = 41;       ///< coarse grid used to size the switching window
  IntegratorOptions integrator;
  /// Set for stopping-time candidates to enable the transversality check.
  std::optional<StoppingPenalty> stopping;
};

enum class VerifyStatus { Pass, Fail, ConstraintInactive };

struct VerificationReport {
  VerifyStatus status = VerifyStatus::Fail;
  double lambdaE = 0.0;
  double V = 0.0;
  double tol_V = 0.0;

  std::vector<int> relevant;             ///< control indices with I_i > 0 somewhere
  std::vector<int> sign_changes;         ///< per control index
  std::vector<bool> sign_pattern_ok;     ///< at most one change, + to -
  std::vector<std::optional<double>> crossing;  ///< time of the +/- change
  double min_phi_u = 0.0;                ///< outside the switching windows
  double H_T = 0.0;
  double H_max_dev = 0.0;
  std::vector<double> terminal_phi;      ///< per control index
  double h_gap_max = 0.0;               ///< max over grid of H - lambdaE (sum I + sum S)
  std::vector<std::vector<double>> psi;  ///< psi[i][k] over control indices, k < i
  double transversality_gap = 0.0;
  bool all_at_horizon = false;

  bool ok_V = false, ok_sign = false, ok_phi_u = false, ok_H = false, ok_terminal = false,
       ok_h_gap = false, ok_order = true, ok_crossing = false, ok_transversality = true;
  bool strictly_convex = false;

  std::string status_name() const;
};

/// Requires a Threshold policy; lambda0bar is fixed to 1.
VerificationReport verify_pmp(const ForwardingPolicy& policy, const ModelParams& params,
                              const StateVector& init, const VerifyOptions& opts = {});

/// Violation measure V(lambdaE) for a fixed candidate (exposed for tests).
double violation_measure(const Trajectory& traj, double lambdaE, const ModelParams& params);

}  // namespace dtn
