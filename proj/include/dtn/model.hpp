#pragma once

// Mean-field dynamics of energy-stratified epidemic forwarding.
//
// State layout: S_0..S_B (susceptible fractions per residual energy level),
// I_0..I_B (infective fractions), and the accumulated exposure
// E(t) = int_0^t sum_{i>=s} I_i, which drives the delivery probability.

#include <cstddef>
#include <span>
#include <vector>

namespace dtn {

inline constexpr double kNormalizationTol = 1e-9;
inline constexpr double kNegativitySlack = 1e-12;

struct ModelParams {
  int B = 5;  ///< maximum energy level
  int s = 2;  ///< transmit cost
  int r = 1;  ///< receive cost
  double beta = 2.0;   ///< aggregate pairwise contact rate
  double beta0 = 2.0;  ///< aggregate node-destination contact rate
  double horizon = 10.0;
  std::vector<double> penalties;  ///< a_0..a_B, strictly decreasing
  double p = 0.9;                 ///< mandated delivery probability

  /// Throws ConfigError on any violated invariant.
  void validate() const;

  int levels() const { return B + 1; }
  int num_controls() const { return B - s + 1; }
  /// Minimum exposure E(T) needed to meet p: -ln(1-p)/beta0.
  double throughput_target() const;

  /// Penalties a_i = (B-i)^alpha.
  static std::vector<double> power_penalties(int B, double alpha);
};

struct StateVector {
  std::vector<double> S;
  std::vector<double> I;
  double E = 0.0;

  StateVector() = default;
  StateVector(std::vector<double> s, std::vector<double> i, double e = 0.0)
      : S(std::move(s)), I(std::move(i)), E(e) {}

  double total_mass() const;
  /// sum_{i>=s} I_i
  double transmitting_infectives(int s) const;
  /// sum_{i>=r} S_i
  double receptive_susceptibles(int r) const;

  /// Throws ConfigError unless sizes match params, entries are finite,
  /// nonnegative (within slack) and mass is normalized.
  void validate(const ModelParams& params) const;
};

struct StateDerivative {
  std::vector<double> dS;
  std::vector<double> dI;
  double dE = 0.0;
};

/// Control vector over levels s..B (index 0 is level s).
using Control = std::vector<double>;

/// Right-hand side of the mean-field system. Terms referencing a level
/// outside [0, B] vanish.
StateDerivative ode_rhs(const StateVector& state, std::span<const double> u,
                        const ModelParams& params);

/// Piecewise-constant control in time: values[k] holds on
/// [breaks[k-1], breaks[k]) (right-continuous at each break).
struct ControlSchedule {
  std::vector<double> breaks;
  std::vector<Control> values;

  static ControlSchedule constant(Control u);
  const Control& at(double t) const;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<StateVector> states;
  /// controls[k] is the control applied on [times[k], times[k+1]).
  std::vector<Control> controls;

  const StateVector& initial_state() const { return states.front(); }
  const StateVector& final_state() const { return states.back(); }
  double end_time() const { return times.back(); }
};

struct IntegratorOptions {
  /// Nominal RK4 steps across [0, end_time]; segments take ceil(len/h) steps.
  int steps = 2000;
  /// Step-halving retries on admissibility failure.
  int max_refinements = 4;
};

/// Fixed-step classical RK4, segmented at the schedule's breaks. Halves the
/// step and retries when a grid state leaves the admissible set; throws
/// NumericalError when retries are exhausted.
Trajectory integrate(const ControlSchedule& schedule, const ModelParams& params,
                     const StateVector& init, double end_time,
                     const IntegratorOptions& opts = {});

/// Same arithmetic as integrate() but keeps only the terminal state and skips
/// the admissibility scan. Used on optimizer hot paths.
StateVector integrate_terminal(const ControlSchedule& schedule, const ModelParams& params,
                               const StateVector& init, double end_time, int steps);

struct AdmissibilityReport {
  double max_normalization_error = 0.0;
  double min_component = 0.0;
  bool s_nonincreasing = true;
  bool exposure_nondecreasing = true;
  /// sum_{j>=s} I_j + sum_{j>=r} S_j nonincreasing along the grid.
  bool aggregate_nonincreasing = true;

  bool admissible() const {
    return max_normalization_error <= kNormalizationTol && min_component >= -kNegativitySlack;
  }
};

/// `mono_tol` is the absolute slack allowed on each monotonicity comparison.
AdmissibilityReport check_admissibility(const Trajectory& traj, const ModelParams& params,
                                        double mono_tol = 1e-14);

// ---------------------------------------------------------------------------
// Flat-array kernel shared by the integrators and the tree sweep in optimize.

/// Flat layout [S_0..S_B, I_0..I_B, E].
class FlatDynamics {
 public:
  explicit FlatDynamics(const ModelParams& params);

  std::size_t dim() const { return static_cast<std::size_t>(2 * (B_ + 1) + 1); }
  void rhs(const double* x, const double* u, double* dx) const;
  /// One RK4 step of size h, in place.
  void step(double* x, const double* u, double h);

  static std::vector<double> pack(const StateVector& state);
  StateVector unpack(const double* x) const;

 private:
  int B_, s_, r_;
  double beta_;
  std::vector<double> k1_, k2_, k3_, k4_, tmp_;
};

}  // namespace dtn
