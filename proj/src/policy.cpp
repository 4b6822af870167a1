#include "dtn/policy.hpp"

#include <algorithm>
#include <cmath>

#include "dtn/error.hpp"
#include "dtn/metrics.hpp"

namespace dtn {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

Control filled(const ModelParams& params, double v) {
  return Control(static_cast<std::size_t>(params.num_controls()), v);
}

bool in_unit(double v) { return v >= 0.0 && v <= 1.0; }

// Signed distance to the drop condition; >= 0 means the policy has dropped.
double drop_margin(const ForwardingPolicy& policy, const double* x, const ModelParams& params) {
  const int L = params.levels();
  if (const auto* pt = std::get_if<policy::ProbabilityThreshold>(&policy)) {
    if (pt->q >= 1.0) return -1.0;
    return x[2 * L] - (-std::log1p(-pt->q) / params.beta0);
  }
  const auto& it = std::get<policy::InfectionThreshold>(policy);
  double q = 0.0;
  for (int j = params.s; j <= params.B; ++j) q += x[L + j];
  return q - it.c;
}

}  // namespace

std::string_view policy_tag(const ForwardingPolicy& policy) {
  return std::visit(overloaded{
                        [](const policy::Threshold&) { return std::string_view("threshold"); },
                        [](const policy::StaticEnergy&) { return std::string_view("static_energy"); },
                        [](const policy::StaticTime&) { return std::string_view("static_time"); },
                        [](const policy::ProbabilityThreshold&) {
                          return std::string_view("probability_threshold");
                        },
                        [](const policy::InfectionThreshold&) {
                          return std::string_view("infection_threshold");
                        },
                        [](const policy::One&) { return std::string_view("one"); },
                        [](const policy::Zero&) { return std::string_view("zero"); },
                        [](const policy::PiecewiseConstant&) {
                          return std::string_view("piecewise_constant");
                        },
                    },
                    policy);
}

bool is_feedback(const ForwardingPolicy& policy) {
  return std::holds_alternative<policy::ProbabilityThreshold>(policy) ||
         std::holds_alternative<policy::InfectionThreshold>(policy);
}

void validate_policy(const ForwardingPolicy& policy, const ModelParams& params) {
  const auto n = static_cast<std::size_t>(params.num_controls());
  const double T = params.horizon;
  auto fail = [](const std::string& msg) { throw ConfigError("policy: " + msg); };
  std::visit(overloaded{
                 [&](const policy::Threshold& p) {
                   if (p.times.size() != n) fail("threshold needs B-s+1 times");
                   for (double t : p.times)
                     if (!(t >= 0.0 && t <= T)) fail("threshold times must lie in [0, horizon]");
                 },
                 [&](const policy::StaticEnergy& p) {
                   if (!(p.jump >= 0.0 && p.jump <= T)) fail("jump must lie in [0, horizon]");
                   if (!in_unit(p.value)) fail("value must lie in [0,1]");
                 },
                 [&](const policy::StaticTime& p) {
                   if (p.values.size() != n) fail("static_time needs B-s+1 values");
                   for (double v : p.values)
                     if (!in_unit(v)) fail("values must lie in [0,1]");
                 },
                 [&](const policy::ProbabilityThreshold& p) {
                   if (!in_unit(p.q)) fail("q must lie in [0,1]");
                 },
                 [&](const policy::InfectionThreshold& p) {
                   if (!in_unit(p.c)) fail("c must lie in [0,1]");
                 },
                 [](const policy::One&) {},
                 [](const policy::Zero&) {},
                 [&](const policy::PiecewiseConstant& p) {
                   if (p.levels.size() != n) fail("piecewise_constant needs B-s+1 levels");
                   for (const auto& lv : p.levels) {
                     if (lv.values.size() != lv.breaks.size() + 1)
                       fail("each level needs one more value than breaks");
                     if (!std::is_sorted(lv.breaks.begin(), lv.breaks.end()))
                       fail("breaks must be sorted");
                     for (double b : lv.breaks)
                       if (!(b >= 0.0 && b <= T)) fail("breaks must lie in [0, horizon]");
                     for (double v : lv.values)
                       if (!in_unit(v)) fail("values must lie in [0,1]");
                   }
                 },
             },
             policy);
}

Control control_at(const ForwardingPolicy& policy, double t, const StateVector& state,
                   const ModelParams& params, FeedbackLatch& latch) {
  const auto n = static_cast<std::size_t>(params.num_controls());
  return std::visit(
      overloaded{
          [&](const policy::Threshold& p) {
            Control u(n);
            for (std::size_t i = 0; i < n; ++i) u[i] = t < p.times[i] ? 1.0 : 0.0;
            return u;
          },
          [&](const policy::StaticEnergy& p) { return filled(params, t < p.jump ? p.value : 0.0); },
          [&](const policy::StaticTime& p) { return Control(p.values); },
          [&](const policy::ProbabilityThreshold& p) {
            if (!latch.dropped && delivery_from_exposure(state.E, params.beta0) >= p.q)
              latch.dropped = true;
            return filled(params, latch.dropped ? 0.0 : 1.0);
          },
          [&](const policy::InfectionThreshold& p) {
            if (!latch.dropped && state.transmitting_infectives(params.s) >= p.c)
              latch.dropped = true;
            return filled(params, latch.dropped ? 0.0 : 1.0);
          },
          [&](const policy::One&) { return filled(params, 1.0); },
          [&](const policy::Zero&) { return filled(params, 0.0); },
          [&](const policy::PiecewiseConstant& p) {
            Control u(n);
            for (std::size_t i = 0; i < n; ++i) {
              const auto& lv = p.levels[i];
              const auto it = std::upper_bound(lv.breaks.begin(), lv.breaks.end(), t);
              u[i] = lv.values[static_cast<std::size_t>(it - lv.breaks.begin())];
            }
            return u;
          },
      },
      policy);
}

std::optional<double> feedback_drop_time(const ForwardingPolicy& policy,
                                         const ModelParams& params, const StateVector& init,
                                         const IntegratorOptions& opts) {
  if (!is_feedback(policy)) throw ConfigError("feedback_drop_time: not a feedback policy");
  FlatDynamics dyn(params);
  auto x = FlatDynamics::pack(init);
  if (drop_margin(policy, x.data(), params) >= 0.0) return 0.0;

  const Control ones = filled(params, 1.0);
  const int m = std::max(1, opts.steps);
  const double h = params.horizon / static_cast<double>(m);
  std::vector<double> prev(x.size()), trial(x.size());
  for (int k = 0; k < m; ++k) {
    prev = x;
    dyn.step(x.data(), ones.data(), h);
    if (drop_margin(policy, x.data(), params) < 0.0) continue;
    // Crossing inside this step: bisect the sub-step length.
    double lo = 0.0, hi = h;
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + params.horizon); ++it) {
      const double mid = 0.5 * (lo + hi);
      trial = prev;
      dyn.step(trial.data(), ones.data(), mid);
      if (drop_margin(policy, trial.data(), params) >= 0.0)
        hi = mid;
      else
        lo = mid;
    }
    return std::min(params.horizon, static_cast<double>(k) * h + hi);
  }
  return std::nullopt;
}

ControlSchedule compile(const ForwardingPolicy& policy, const ModelParams& params,
                        const StateVector& init, const IntegratorOptions& opts) {
  validate_policy(policy, params);
  if (is_feedback(policy)) {
    const auto tau = feedback_drop_time(policy, params, init, opts);
    if (!tau) return ControlSchedule::constant(filled(params, 1.0));
    if (*tau <= 0.0) return ControlSchedule::constant(filled(params, 0.0));
    ControlSchedule sch;
    sch.breaks = {*tau};
    sch.values = {filled(params, 1.0), filled(params, 0.0)};
    return sch;
  }

  std::vector<double> cand;
  std::visit(overloaded{
                 [&](const policy::Threshold& p) { cand = p.times; },
                 [&](const policy::StaticEnergy& p) { cand = {p.jump}; },
                 [&](const policy::PiecewiseConstant& p) {
                   for (const auto& lv : p.levels) cand.insert(cand.end(), lv.breaks.begin(), lv.breaks.end());
                 },
                 [](const auto&) {},
             },
             policy);
  std::erase_if(cand, [](double t) { return !(t > 0.0); });
  std::sort(cand.begin(), cand.end());
  cand.erase(std::unique(cand.begin(), cand.end()), cand.end());

  FeedbackLatch latch;
  ControlSchedule sch;
  sch.values.push_back(control_at(policy, 0.0, init, params, latch));
  for (double b : cand) {
    Control u = control_at(policy, b, init, params, latch);
    if (u == sch.values.back()) continue;
    sch.breaks.push_back(b);
    sch.values.push_back(std::move(u));
  }
  return sch;
}

std::vector<double> breakpoints(const ForwardingPolicy& policy, const ModelParams& params,
                                const StateVector& init, const IntegratorOptions& opts) {
  std::vector<double> out;
  for (double b : compile(policy, params, init, opts).breaks)
    if (b > 0.0 && b < params.horizon) out.push_back(b);
  return out;
}

Trajectory integrate(const ForwardingPolicy& policy, const ModelParams& params,
                     const StateVector& init, double end_time, const IntegratorOptions& opts) {
  ModelParams local = params;
  if (end_time > local.horizon) local.horizon = end_time;
  return integrate(compile(policy, local, init, opts), params, init, end_time, opts);
}

}  // namespace dtn
