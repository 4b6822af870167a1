#include "dtn/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dtn/error.hpp"

namespace dtn {

namespace {

bool all_finite(const double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(x[i])) return false;
  return true;
}

int segment_steps(double len, double h_nominal) {
  if (len <= 0.0) return 0;
  const double m = std::ceil(len / h_nominal - 1e-9);
  return std::max(1, static_cast<int>(m));
}

// Breaks strictly inside (0, end_time), sorted and deduplicated.
std::vector<double> interior_breaks(const ControlSchedule& schedule, double end_time) {
  std::vector<double> out;
  for (double b : schedule.breaks)
    if (b > 0.0 && b < end_time) out.push_back(b);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelParams / StateVector

void ModelParams::validate() const {
  auto fail = [](const std::string& msg) { throw ConfigError("model: " + msg); };
  if (B < 1) fail("B must be >= 1");
  if (!(1 <= r && r <= s && s <= B)) fail("require 1 <= r <= s <= B");
  if (!(beta > 0.0) || !std::isfinite(beta)) fail("beta must be > 0");
  if (!(beta0 > 0.0) || !std::isfinite(beta0)) fail("beta0 must be > 0");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) fail("horizon must be > 0");
  if (static_cast<int>(penalties.size()) != B + 1) fail("penalties must have B+1 entries");
  for (double a : penalties)
    if (!std::isfinite(a)) fail("penalties must be finite");
  for (int i = 1; i <= B; ++i)
    if (!(penalties[i] < penalties[i - 1])) fail("penalties must be strictly decreasing");
  if (!(p >= 0.0 && p < 1.0)) fail("p must lie in [0, 1)");
}

double ModelParams::throughput_target() const { return -std::log1p(-p) / beta0; }

std::vector<double> ModelParams::power_penalties(int B, double alpha) {
  std::vector<double> a(static_cast<std::size_t>(B + 1));
  for (int i = 0; i <= B; ++i) a[i] = std::pow(static_cast<double>(B - i), alpha);
  return a;
}

double StateVector::total_mass() const {
  double sum = 0.0;
  for (double v : S) sum += v;
  for (double v : I) sum += v;
  return sum;
}

double StateVector::transmitting_infectives(int s) const {
  double sum = 0.0;
  for (std::size_t i = static_cast<std::size_t>(s); i < I.size(); ++i) sum += I[i];
  return sum;
}

double StateVector::receptive_susceptibles(int r) const {
  double sum = 0.0;
  for (std::size_t i = static_cast<std::size_t>(r); i < S.size(); ++i) sum += S[i];
  return sum;
}

void StateVector::validate(const ModelParams& params) const {
  const auto n = static_cast<std::size_t>(params.levels());
  if (S.size() != n || I.size() != n)
    throw ConfigError("state: S and I must have B+1 entries");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(S[i]) || !std::isfinite(I[i]))
      throw ConfigError("state: non-finite entry");
    if (S[i] < -kNegativitySlack || I[i] < -kNegativitySlack)
      throw ConfigError("state: negative entry");
  }
  if (std::abs(total_mass() - 1.0) > kNormalizationTol)
    throw ConfigError("state: fractions must sum to 1");
  if (!(E >= 0.0) || !std::isfinite(E)) throw ConfigError("state: E must be >= 0");
}

// ---------------------------------------------------------------------------
// Flat kernel

FlatDynamics::FlatDynamics(const ModelParams& params)
    : B_(params.B), s_(params.s), r_(params.r), beta_(params.beta) {
  const auto n = dim();
  k1_.assign(n, 0.0);
  k2_.assign(n, 0.0);
  k3_.assign(n, 0.0);
  k4_.assign(n, 0.0);
  tmp_.assign(n, 0.0);
}

void FlatDynamics::rhs(const double* x, const double* u, double* dx) const {
  const int L = B_ + 1;
  const double* S = x;
  const double* I = x + L;
  double* dS = dx;
  double* dI = dx + L;

  double forcing = 0.0;  // sum_{j>=s} u_j I_j
  double exposure = 0.0;  // sum_{j>=s} I_j
  for (int j = s_; j <= B_; ++j) {
    forcing += u[j - s_] * I[j];
    exposure += I[j];
  }
  double receptive = 0.0;  // sum_{j>=r} S_j
  for (int j = r_; j <= B_; ++j) receptive += S[j];

  const double bf = beta_ * forcing;
  const double br = beta_ * receptive;
  for (int i = 0; i <= B_; ++i) {
    dS[i] = i >= r_ ? -bf * S[i] : 0.0;
    double d = 0.0;
    if (i >= s_) d -= br * u[i - s_] * I[i];
    if (i + r_ <= B_) d += bf * S[i + r_];
    if (i + s_ <= B_) d += br * u[i] * I[i + s_];
    dI[i] = d;
  }
  dx[2 * L] = exposure;
}

void FlatDynamics::step(double* x, const double* u, double h) {
  const std::size_t n = dim();
  rhs(x, u, k1_.data());
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k1_[i];
  rhs(tmp_.data(), u, k2_.data());
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + 0.5 * h * k2_[i];
  rhs(tmp_.data(), u, k3_.data());
  for (std::size_t i = 0; i < n; ++i) tmp_[i] = x[i] + h * k3_[i];
  rhs(tmp_.data(), u, k4_.data());
  const double h6 = h / 6.0;
  for (std::size_t i = 0; i < n; ++i)
    x[i] += h6 * (k1_[i] + 2.0 * k2_[i] + 2.0 * k3_[i] + k4_[i]);
}

std::vector<double> FlatDynamics::pack(const StateVector& state) {
  std::vector<double> x;
  x.reserve(state.S.size() + state.I.size() + 1);
  x.insert(x.end(), state.S.begin(), state.S.end());
  x.insert(x.end(), state.I.begin(), state.I.end());
  x.push_back(state.E);
  return x;
}

StateVector FlatDynamics::unpack(const double* x) const {
  const int L = B_ + 1;
  return StateVector(std::vector<double>(x, x + L), std::vector<double>(x + L, x + 2 * L),
                     x[2 * L]);
}

// ---------------------------------------------------------------------------

StateDerivative ode_rhs(const StateVector& state, std::span<const double> u,
                        const ModelParams& params) {
  params.validate();
  if (static_cast<int>(u.size()) != params.num_controls())
    throw ConfigError("ode_rhs: control vector must have B-s+1 entries");
  if (static_cast<int>(state.S.size()) != params.levels() ||
      static_cast<int>(state.I.size()) != params.levels())
    throw ConfigError("ode_rhs: state dimension mismatch");

  FlatDynamics dyn(params);
  const auto x = FlatDynamics::pack(state);
  std::vector<double> dx(dyn.dim());
  dyn.rhs(x.data(), u.data(), dx.data());
  const auto L = static_cast<std::ptrdiff_t>(params.levels());
  StateDerivative d;
  d.dS.assign(dx.begin(), dx.begin() + L);
  d.dI.assign(dx.begin() + L, dx.begin() + 2 * L);
  d.dE = dx[2 * L];
  return d;
}

ControlSchedule ControlSchedule::constant(Control u) {
  ControlSchedule c;
  c.values.push_back(std::move(u));
  return c;
}

const Control& ControlSchedule::at(double t) const {
  // First break strictly greater than t selects the segment (right-continuous).
  const auto it = std::upper_bound(breaks.begin(), breaks.end(), t);
  return values[static_cast<std::size_t>(it - breaks.begin())];
}

namespace {

template <class OnStep>
void run_segments(const ControlSchedule& schedule, FlatDynamics& dyn, std::vector<double>& x,
                  double end_time, int steps, OnStep&& on_step) {
  const double h_nominal = end_time / static_cast<double>(steps);
  auto bks = interior_breaks(schedule, end_time);
  bks.push_back(end_time);
  double a = 0.0;
  for (double b : bks) {
    const Control& u = schedule.at(a);
    const int m = segment_steps(b - a, h_nominal);
    const double h = (b - a) / static_cast<double>(m);
    for (int k = 0; k < m; ++k) {
      dyn.step(x.data(), u.data(), h);
      const double t = (k + 1 == m) ? b : a + static_cast<double>(k + 1) * h;
      on_step(t, u);
    }
    a = b;
  }
}

void check_schedule(const ControlSchedule& schedule, const ModelParams& params) {
  if (schedule.values.size() != schedule.breaks.size() + 1)
    throw ConfigError("schedule: values must have one more entry than breaks");
  for (const auto& u : schedule.values) {
    if (static_cast<int>(u.size()) != params.num_controls())
      throw ConfigError("schedule: control vector must have B-s+1 entries");
    for (double v : u)
      if (!(v >= 0.0 && v <= 1.0)) throw ConfigError("schedule: controls must lie in [0,1]");
  }
}

}  // namespace

StateVector integrate_terminal(const ControlSchedule& schedule, const ModelParams& params,
                               const StateVector& init, double end_time, int steps) {
  FlatDynamics dyn(params);
  auto x = FlatDynamics::pack(init);
  if (end_time > 0.0) run_segments(schedule, dyn, x, end_time, steps, [](double, const Control&) {});
  return dyn.unpack(x.data());
}

Trajectory integrate(const ControlSchedule& schedule, const ModelParams& params,
                     const StateVector& init, double end_time, const IntegratorOptions& opts) {
  params.validate();
  init.validate(params);
  check_schedule(schedule, params);
  if (!(end_time > 0.0) || !std::isfinite(end_time))
    throw ConfigError("integrate: end_time must be > 0");
  if (opts.steps < 1) throw ConfigError("integrate: steps must be >= 1");

  int steps = opts.steps;
  for (int attempt = 0; attempt <= opts.max_refinements; ++attempt, steps *= 2) {
    FlatDynamics dyn(params);
    auto x = FlatDynamics::pack(init);
    Trajectory traj;
    traj.times.push_back(0.0);
    traj.states.push_back(dyn.unpack(x.data()));
    bool finite = true;
    run_segments(schedule, dyn, x, end_time, steps, [&](double t, const Control& u) {
      finite = finite && all_finite(x.data(), x.size());
      traj.times.push_back(t);
      traj.states.push_back(dyn.unpack(x.data()));
      traj.controls.push_back(u);
    });
    if (!finite) continue;
    if (check_admissibility(traj, params).admissible()) return traj;
  }
  std::ostringstream msg;
  msg << "integrate: admissibility violated after " << opts.max_refinements
      << " step-halving retries";
  throw NumericalError(msg.str());
}

AdmissibilityReport check_admissibility(const Trajectory& traj, const ModelParams& params,
                                        double mono_tol) {
  AdmissibilityReport rep;
  double min_c = 0.0;
  for (std::size_t k = 0; k < traj.states.size(); ++k) {
    const auto& st = traj.states[k];
    rep.max_normalization_error =
        std::max(rep.max_normalization_error, std::abs(st.total_mass() - 1.0));
    for (double v : st.S) min_c = std::min(min_c, v);
    for (double v : st.I) min_c = std::min(min_c, v);
    if (!std::isfinite(st.total_mass())) rep.max_normalization_error = INFINITY;
    if (k == 0) continue;
    const auto& prev = traj.states[k - 1];
    for (std::size_t i = 0; i < st.S.size(); ++i)
      if (st.S[i] > prev.S[i] + mono_tol) rep.s_nonincreasing = false;
    if (st.E < prev.E - mono_tol) rep.exposure_nondecreasing = false;
    const double agg = st.transmitting_infectives(params.s) + st.receptive_susceptibles(params.r);
    const double agg_prev =
        prev.transmitting_infectives(params.s) + prev.receptive_susceptibles(params.r);
    if (agg > agg_prev + mono_tol) rep.aggregate_nonincreasing = false;
  }
  rep.min_component = min_c;
  return rep;
}

}  // namespace dtn
