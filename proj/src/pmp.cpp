#include "dtn/pmp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dtn/error.hpp"

namespace dtn {

namespace {

void check_dims(const StateVector& x, const CoState& c, std::span<const double> u,
                const ModelParams& p) {
  const auto L = static_cast<std::size_t>(p.levels());
  if (x.S.size() != L || x.I.size() != L || c.lambda.size() != L || c.rho.size() != L)
    throw ConfigError("state/co-state size does not match B");
  if (u.size() != static_cast<std::size_t>(p.num_controls()))
    throw ConfigError("control vector size does not match B-s+1");
}

// Affine pieces of phi in lambdaE: phi = pa + lambdaE * pe on every grid point.
struct PhiGrid {
  std::vector<std::vector<double>> a, e;  // [k][control index]
};

PhiGrid phi_grid(const Trajectory& traj, const ModelParams& p) {
  const auto ca = integrate_costates(traj, 0.0, 1, p);
  const auto ce = integrate_costates(traj, 1.0, 0, p);
  const int m = p.num_controls();
  PhiGrid g;
  g.a.assign(traj.times.size(), std::vector<double>(m));
  g.e = g.a;
  for (std::size_t k = 0; k < traj.times.size(); ++k)
    for (int c = 0; c < m; ++c) {
      g.a[k][c] = switching_function(p.s + c, traj.states[k], ca.values[k], p);
      g.e[k][c] = switching_function(p.s + c, traj.states[k], ce.values[k], p);
    }
  return g;
}

double violation(const Trajectory& traj, const PhiGrid& g, double lE) {
  double V = 0.0;
  const std::size_t m = g.a.empty() ? 0 : g.a[0].size();
  auto pointwise = [&](std::size_t k, const Control& u) {
    double v = 0.0;
    for (std::size_t c = 0; c < m; ++c) {
      const double phi = g.a[k][c] + lE * g.e[k][c];
      v += std::max(phi, 0.0) * (1.0 - u[c]) + std::max(-phi, 0.0) * u[c];
    }
    return v;
  };
  for (std::size_t k = 0; k + 1 < traj.times.size(); ++k) {
    const double h = traj.times[k + 1] - traj.times[k];
    const auto& u = traj.controls[k];
    V += 0.5 * h * (pointwise(k, u) + pointwise(k + 1, u));
  }
  return V;
}

// V is convex in lambdaE (each term is convex in an affine argument).
double fit_lambdaE(const Trajectory& traj, const PhiGrid& g, double& bestV) {
  auto V = [&](double l) { return violation(traj, g, l); };
  double hi = 1.0;
  while (hi < 1e8 && V(2 * hi) < V(hi)) hi *= 2;
  double lo = 0.0;
  hi *= 2;
  const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - gr * (hi - lo), x2 = lo + gr * (hi - lo);
  double f1 = V(x1), f2 = V(x2);
  for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + hi); ++it) {
    if (f1 <= f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = V(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = V(x2);
    }
  }
  double best = 0.5 * (lo + hi);
  bestV = V(best);
  const double v0 = V(0.0);
  if (v0 <= bestV) {
    best = 0.0;
    bestV = v0;
  }
  return best;
}

}  // namespace

CoState costate_rhs(const CoState& c, const StateVector& x, std::span<const double> u,
                    const ModelParams& p) {
  check_dims(x, c, u, p);
  const int B = p.B, s = p.s, r = p.r;
  const double beta = p.beta;
  double A = 0.0, C = 0.0, K = 0.0, Ssum = 0.0;
  for (int j = s; j <= B; ++j) {
    A += u[j - s] * x.I[j];
    C += u[j - s] * x.I[j] * (c.rho[j - s] - c.rho[j]);
  }
  for (int j = r; j <= B; ++j) {
    Ssum += x.S[j];
    K += (-c.lambda[j] + c.rho[j - r]) * x.S[j];
  }
  CoState d;
  d.lambda.assign(B + 1, 0.0);
  d.rho.assign(B + 1, 0.0);
  for (int i = r; i <= B; ++i) d.lambda[i] = beta * A * (c.lambda[i] - c.rho[i - r]) - beta * C;
  for (int i = s; i <= B; ++i) {
    const double ui = u[i - s];
    d.rho[i] = -beta * ui * K - beta * ui * Ssum * (c.rho[i - s] - c.rho[i]) - c.lambdaE;
  }
  return d;
}

CoStateTrajectory integrate_costates(const Trajectory& traj, double lambdaE, int lambda0bar,
                                     const ModelParams& p) {
  if (lambdaE < 0.0 || !std::isfinite(lambdaE)) throw ConfigError("lambdaE must be finite and >= 0");
  if (lambda0bar != 0 && lambda0bar != 1) throw ConfigError("lambda0bar must be 0 or 1");
  if (traj.times.size() < 1 || traj.controls.size() + 1 < traj.times.size())
    throw ConfigError("trajectory has no controls");
  const int L = p.levels();
  const std::size_t N = traj.times.size();

  CoStateTrajectory out;
  out.times = traj.times;
  out.lambdaE = lambdaE;
  out.lambda0bar = lambda0bar;
  out.values.resize(N);
  CoState c;
  c.lambdaE = lambdaE;
  c.lambda.resize(L);
  c.rho.resize(L);
  for (int i = 0; i < L; ++i) c.lambda[i] = c.rho[i] = -lambda0bar * p.penalties[i];
  out.values[N - 1] = c;

  auto axpy = [](const CoState& a, double h, const CoState& d) {
    CoState r = a;
    for (std::size_t i = 0; i < r.lambda.size(); ++i) {
      r.lambda[i] += h * d.lambda[i];
      r.rho[i] += h * d.rho[i];
    }
    return r;
  };

  for (std::size_t k = N - 1; k > 0; --k) {
    const double h = traj.times[k] - traj.times[k - 1];
    const auto& u = traj.controls[k - 1];
    const auto& x0 = traj.states[k - 1];
    const auto& x1 = traj.states[k];
    // Hermite midpoint with the derivatives of the step's own control.
    const auto f0 = ode_rhs(x0, u, p);
    const auto f1 = ode_rhs(x1, u, p);
    StateVector xm = x0;
    for (int i = 0; i < L; ++i) {
      xm.S[i] = 0.5 * (x0.S[i] + x1.S[i]) + h / 8.0 * (f0.dS[i] - f1.dS[i]);
      xm.I[i] = 0.5 * (x0.I[i] + x1.I[i]) + h / 8.0 * (f0.dI[i] - f1.dI[i]);
    }
    const auto k1 = costate_rhs(c, x1, u, p);
    const auto k2 = costate_rhs(axpy(c, -0.5 * h, k1), xm, u, p);
    const auto k3 = costate_rhs(axpy(c, -0.5 * h, k2), xm, u, p);
    const auto k4 = costate_rhs(axpy(c, -h, k3), x0, u, p);
    for (int i = 0; i < L; ++i) {
      c.lambda[i] -= h / 6.0 * (k1.lambda[i] + 2 * k2.lambda[i] + 2 * k3.lambda[i] + k4.lambda[i]);
      c.rho[i] -= h / 6.0 * (k1.rho[i] + 2 * k2.rho[i] + 2 * k3.rho[i] + k4.rho[i]);
      if (!std::isfinite(c.lambda[i]) || !std::isfinite(c.rho[i]))
        throw NumericalError("non-finite co-state");
    }
    out.values[k - 1] = c;
  }
  return out;
}

double switching_function(int level, const StateVector& x, const CoState& c,
                          const ModelParams& p) {
  if (level < p.s || level > p.B) throw ConfigError("switching level out of range");
  const int i = level;
  double acc = 0.0;
  for (int j = p.r; j <= p.B; ++j)
    acc += (-c.lambda[j] + c.rho[j - p.r] + c.rho[i - p.s] - c.rho[i]) * x.S[j];
  return p.beta * x.I[i] * acc;
}

HamiltonianForms hamiltonian_forms(const StateVector& x, const CoState& c,
                                   std::span<const double> u, const ModelParams& p) {
  check_dims(x, c, u, p);
  const auto d = ode_rhs(x, u, p);
  HamiltonianForms h;
  for (int i = 0; i <= p.B; ++i) h.expanded += c.lambda[i] * d.dS[i] + c.rho[i] * d.dI[i];
  h.expanded += c.lambdaE * d.dE;
  h.switching = c.lambdaE * x.transmitting_infectives(p.s);
  for (int i = p.s; i <= p.B; ++i) h.switching += switching_function(i, x, c, p) * u[i - p.s];
  return h;
}

double hamiltonian(const StateVector& x, const CoState& c, std::span<const double> u,
                   const ModelParams& p) {
  const auto h = hamiltonian_forms(x, c, u, p);
  if (std::abs(h.expanded - h.switching) > 1e-10 * (1.0 + std::abs(h.expanded)))
    throw NumericalError("Hamiltonian forms disagree");
  return h.expanded;
}

double violation_measure(const Trajectory& traj, double lambdaE, const ModelParams& params) {
  return violation(traj, phi_grid(traj, params), lambdaE);
}

std::string VerificationReport::status_name() const {
  switch (status) {
    case VerifyStatus::Pass: return "pass";
    case VerifyStatus::Fail: return "fail";
    case VerifyStatus::ConstraintInactive: return "constraint-inactive";
  }
  return "fail";
}

VerificationReport verify_pmp(const ForwardingPolicy& policy, const ModelParams& params,
                              const StateVector& init, const VerifyOptions& opts) {
  const auto* thr = std::get_if<policy::Threshold>(&policy);
  if (!thr) throw ConfigError("verify_pmp requires a threshold policy");
  validate_policy(policy, params);
  const ModelParams& p = params;
  const double T = p.horizon;
  const int m = p.num_controls();

  VerificationReport rep;
  rep.tol_V = opts.tol_V * T;
  const auto traj = integrate(policy, p, init, T, opts.integrator);
  const auto& xT = traj.final_state();

  rep.all_at_horizon = std::all_of(thr->times.begin(), thr->times.end(),
                                   [&](double t) { return t >= T; });
  rep.strictly_convex = true;
  for (int i = 1; i + 1 <= p.B; ++i)
    if (!(p.penalties[i - 1] - 2 * p.penalties[i] + p.penalties[i + 1] > 0))
      rep.strictly_convex = false;

  // With slack in the constraint, complementary slackness forces lambdaE = 0.
  // A control that never transmits is then outside the normal-case scope.
  const bool slack = xT.E > p.throughput_target() + kConstraintActiveTol;
  if (slack) {
    bool transmits = false;
    for (std::size_t k = 0; k + 1 < traj.times.size(); ++k)
      for (int c = 0; c < m; ++c)
        if (traj.controls[k][c] > 0.0 && traj.states[k].I[p.s + c] > 0.0) transmits = true;
    if (!transmits) {
      rep.status = VerifyStatus::ConstraintInactive;
      return rep;
    }
  }

  const auto g = phi_grid(traj, p);
  if (slack) {
    rep.lambdaE = 0.0;
    rep.V = violation(traj, g, 0.0);
  } else {
    rep.lambdaE = fit_lambdaE(traj, g, rep.V);
  }
  rep.ok_V = rep.V <= rep.tol_V;
  const auto cs = integrate_costates(traj, rep.lambdaE, 1, p);
  const std::size_t N = traj.times.size();
  auto phi = [&](std::size_t k, int c) { return g.a[k][c] + rep.lambdaE * g.e[k][c]; };

  // (b) sign structure and crossing location.
  const double window = T / (opts.resolution - 1);
  rep.sign_changes.assign(m, 0);
  rep.sign_pattern_ok.assign(m, true);
  rep.crossing.assign(m, std::nullopt);
  rep.ok_sign = rep.ok_crossing = true;
  for (int c = 0; c < m; ++c) {
    double Imax = 0.0, scale = 0.0;
    for (std::size_t k = 0; k < N; ++k) {
      Imax = std::max(Imax, traj.states[k].I[p.s + c]);
      scale = std::max(scale, std::abs(phi(k, c)));
    }
    if (Imax <= 0.0) continue;
    rep.relevant.push_back(c);
    const double dead = 1e-9 * scale;
    int last = 0;
    std::size_t last_k = 0;
    for (std::size_t k = 0; k < N; ++k) {
      const double v = phi(k, c);
      const int sg = v > dead ? 1 : (v < -dead ? -1 : 0);
      if (sg == 0) continue;
      if (last != 0 && sg != last) {
        ++rep.sign_changes[c];
        if (sg > 0) rep.sign_pattern_ok[c] = false;
        // Linear interpolation between the last signed sample and this one.
        const double v0 = phi(last_k, c), t0 = traj.times[last_k];
        rep.crossing[c] = t0 + (traj.times[k] - t0) * v0 / (v0 - v);
      }
      last = sg;
      last_k = k;
    }
    if (rep.sign_changes[c] > 1) rep.sign_pattern_ok[c] = false;
    rep.ok_sign = rep.ok_sign && rep.sign_pattern_ok[c];
    const double t = thr->times[c];
    if (t > 0.0 && t < T) {
      if (rep.sign_changes[c] != 1 || !rep.crossing[c] ||
          std::abs(*rep.crossing[c] - t) > window)
        rep.ok_crossing = false;
    }
  }

  // (c) phi_i u_i >= -tol outside one coarse cell around each switch.
  rep.min_phi_u = 0.0;
  for (std::size_t k = 0; k < N; ++k) {
    const auto& u = traj.controls[std::min(k, traj.controls.size() - 1)];
    for (int c = 0; c < m; ++c) {
      const double t = thr->times[c];
      if (std::abs(traj.times[k] - t) <= window) continue;
      rep.min_phi_u = std::min(rep.min_phi_u, phi(k, c) * u[c]);
    }
  }
  rep.ok_phi_u = rep.min_phi_u >= -opts.phi_u_tol;

  // (d) Hamiltonian constancy; (f) H - lambdaE times the aggregate stays negative.
  const auto& uT = traj.controls.back();
  rep.H_T = hamiltonian(xT, cs.values.back(), uT, p);
  rep.H_max_dev = 0.0;
  rep.h_gap_max = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < N; ++k) {
    const auto& u = traj.controls[std::min(k, traj.controls.size() - 1)];
    const auto& x = traj.states[k];
    const double H = hamiltonian(x, cs.values[k], u, p);
    rep.H_max_dev = std::max(rep.H_max_dev, std::abs(H - rep.H_T));
    const double q =
        H - rep.lambdaE * (x.transmitting_infectives(p.s) + x.receptive_susceptibles(p.r));
    rep.h_gap_max = std::max(rep.h_gap_max, q);
  }
  rep.ok_H = rep.H_max_dev <= opts.tol_H * (1.0 + std::abs(rep.H_T));
  rep.ok_h_gap = rep.h_gap_max < 0.0;

  // (e) terminal switching values.
  rep.terminal_phi.assign(m, 0.0);
  rep.ok_terminal = true;
  for (int c = 0; c < m; ++c) {
    rep.terminal_phi[c] = phi(N - 1, c);
    if (xT.I[p.s + c] > 0.0 && !(rep.terminal_phi[c] < 0.0)) rep.ok_terminal = false;
  }

  // (g) psi diagnostics and threshold ordering.
  rep.psi.assign(m, std::vector<double>(m, 0.0));
  rep.ok_order = true;
  if (rep.strictly_convex) {
    const auto& a = p.penalties;
    for (int c = 0; c < m; ++c)
      for (int d = 0; d < c; ++d) {
        const int i = p.s + c, k = p.s + d;
        rep.psi[c][d] = a[i - p.s] - a[i] - (a[k - p.s] - a[k]);
        if (!(rep.psi[c][d] < 0.0)) rep.ok_order = false;
      }
    // Ordering is only meaningful among levels that ever hold infectives.
    for (std::size_t x = 1; x < rep.relevant.size(); ++x)
      if (thr->times[rep.relevant[x - 1]] > thr->times[rep.relevant[x]]) rep.ok_order = false;
  }

  // (h) transversality.
  if (opts.stopping) {
    rep.transversality_gap =
        std::abs(opts.stopping->derivative(T) - rep.lambdaE * xT.transmitting_infectives(p.s));
    rep.ok_transversality = rep.transversality_gap <= opts.tol_H;
  }

  const bool pass = rep.ok_V && rep.ok_sign && rep.ok_phi_u && rep.ok_H && rep.ok_terminal &&
                    rep.ok_h_gap && rep.ok_order && rep.ok_transversality;
  rep.status = pass ? VerifyStatus::Pass : VerifyStatus::Fail;
  return rep;
}

}  // namespace dtn
