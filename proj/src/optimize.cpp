#include "dtn/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>

#include <boost/math/tools/toms748_solve.hpp>

#include "dtn/error.hpp"
#include "dtn/parallel.hpp"

namespace dtn {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasSlack = 1e-12;

bool lex_less(const std::vector<double>& a, const std::vector<double>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

// Candidate ordering: lower objective, then lexicographically smaller point.
bool better(double fa, const std::vector<double>& a, double fb, const std::vector<double>& b) {
  if (fa != fb) return fa < fb;
  return lex_less(a, b);
}

struct Candidate {
  std::vector<double> x;
  double f = kInf;
};

// Keeps the k best candidates under `better`.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) {}
  void offer(double f, const std::vector<double>& x) {
    if (items_.size() == k_ && !better(f, x, items_.back().f, items_.back().x)) return;
    auto it = std::find_if(items_.begin(), items_.end(),
                           [&](const Candidate& c) { return better(f, x, c.f, c.x); });
    items_.insert(it, Candidate{x, f});
    if (items_.size() > k_) items_.pop_back();
  }
  void merge(const TopK& other) {
    for (const auto& c : other.items_) offer(c.f, c.x);
  }
  const std::vector<Candidate>& items() const { return items_; }

 private:
  std::size_t k_;
  std::vector<Candidate> items_;
};

StateVector terminal_of(const ForwardingPolicy& pol, const ModelParams& params,
                        const StateVector& init, int steps) {
  IntegratorOptions o;
  o.steps = steps;
  return integrate_terminal(compile(pol, params, init, o), params, init, params.horizon, steps);
}

// Objective callback for pattern search: nullopt means infeasible.
using Objective = std::function<std::optional<double>(const std::vector<double>&)>;

struct PatternResult {
  std::vector<double> x;
  double f = kInf;
  int evaluations = 0;
};

// Complete-poll pattern search with rejection of infeasible points on the box
// [lo, hi]. The mesh is expressed as a fraction of each side length.
PatternResult pattern_search(const Objective& obj, std::vector<double> x0, double f0,
                             const std::vector<double>& lo, const std::vector<double>& hi,
                             double mesh, double min_mesh, double shrink, int max_evals) {
  const std::size_t d = x0.size();
  std::vector<std::vector<double>> dirs;
  for (std::size_t i = 0; i < d; ++i) {
    for (double sgn : {1.0, -1.0}) {
      std::vector<double> e(d, 0.0);
      e[i] = sgn;
      dirs.push_back(e);
    }
    for (std::size_t j = i + 1; j < d; ++j) {
      for (double a : {1.0, -1.0})
        for (double b : {1.0, -1.0}) {
          std::vector<double> e(d, 0.0);
          e[i] = a;
          e[j] = b;
          dirs.push_back(e);
        }
    }
  }
  PatternResult res{std::move(x0), f0, 0};
  std::map<std::vector<double>, std::optional<double>> cache;
  cache[res.x] = f0;
  while (mesh >= min_mesh && res.evaluations < max_evals) {
    Candidate best{res.x, res.f};
    for (const auto& dvec : dirs) {
      std::vector<double> y = res.x;
      for (std::size_t i = 0; i < d; ++i)
        y[i] = std::clamp(y[i] + mesh * dvec[i] * (hi[i] - lo[i]), lo[i], hi[i]);
      auto it = cache.find(y);
      std::optional<double> fy;
      if (it != cache.end()) {
        fy = it->second;
      } else {
        fy = obj(y);
        ++res.evaluations;
        cache.emplace(y, fy);
      }
      if (fy && better(*fy, y, best.f, best.x)) best = Candidate{y, *fy};
    }
    if (best.x != res.x) {
      res.x = best.x;
      res.f = best.f;
    } else {
      mesh *= shrink;
    }
  }
  return res;
}

// Refinement on the constraint surface E(T) = target. One coordinate (the one
// with the largest exposure sensitivity at x0) is eliminated by a bracketed
// root solve, and pattern search runs over the rest. Compass polls with
// infeasible-point rejection stall on this surface when the feasible descent
// cone is thin; the reduced problem has no such wedge.
// The returned objective is the energy cost at the horizon.
PatternResult ridge_search(const std::function<StateVector(const std::vector<double>&)>& eval,
                           const ModelParams& params, std::vector<double> x0, double f0,
                           const std::vector<double>& box_lo, const std::vector<double>& box_hi,
                           double mesh, double min_mesh, double shrink, int max_evals) {
  const double target = params.throughput_target();
  const std::size_t d = x0.size();
  PatternResult res{x0, f0, 0};
  if (d == 0) return res;
  const auto st0 = eval(x0);
  ++res.evaluations;

  // Eliminate the steepest coordinate, preferring one strictly inside the box:
  // a coordinate pinned at a bound cannot absorb moves of the others.
  std::size_t k = 0;
  double best_slope = 0.0;
  bool best_inside = false;
  for (std::size_t i = 0; i < d; ++i) {
    auto y = x0;
    const double h = 1e-4 * (box_hi[i] - box_lo[i]);
    const double step = y[i] + h <= box_hi[i] ? h : -h;
    y[i] += step;
    const double slope = (eval(y).E - st0.E) / step;
    ++res.evaluations;
    const bool inside = x0[i] > box_lo[i] + h && x0[i] < box_hi[i] - h;
    if (slope <= 0.0 || (best_inside && !inside)) continue;
    if ((inside && !best_inside) || slope > best_slope) {
      best_slope = slope;
      best_inside = inside;
      k = i;
    }
  }
  if (best_slope <= 0.0) return res;

  // Root of E(t_k) = target in the box, bracketed outward from the previous
  // root (poll points move it by about one mesh). nullopt if E(T) < target.
  double hint = x0[k];
  auto solve_k = [&](std::vector<double> y, int& evals) -> std::optional<std::vector<double>> {
    auto gap = [&](double tk) {
      y[k] = tk;
      ++evals;
      return eval(y).E - target;
    };
    const double klo = box_lo[k], khi = box_hi[k], span = khi - klo;
    double a = std::clamp(hint, klo, khi), b = a;
    double ga = gap(a), gb = ga;
    double delta = 1e-3 * span;
    while (ga >= 0.0 && a > klo) {
      b = a;
      gb = ga;
      a = std::max(klo, a - delta);
      ga = gap(a);
      delta *= 4.0;
    }
    if (ga >= 0.0) {
      y[k] = klo;
      return y;
    }
    while (gb < 0.0 && b < khi) {
      a = b;
      ga = gb;
      b = std::min(khi, b + delta);
      gb = gap(b);
      delta *= 4.0;
    }
    if (gb < -kFeasSlack) return std::nullopt;
    if (gb < 0.0) {
      y[k] = b;
      return y;
    }
    std::uintmax_t iters = 100;
    const auto tol = [span](double lo, double hi) { return std::abs(hi - lo) <= 1e-13 * span; };
    const auto br = boost::math::tools::toms748_solve(gap, a, b, ga, gb, tol, iters);
    // Feasible end of the bracket.
    y[k] = br.second;
    hint = br.second;
    return y;
  };

  std::vector<double> rest, lo, hi;
  for (std::size_t i = 0; i < d; ++i)
    if (i != k) {
      rest.push_back(x0[i]);
      lo.push_back(box_lo[i]);
      hi.push_back(box_hi[i]);
    }
  auto expand = [&](const std::vector<double>& z) {
    std::vector<double> y(d);
    for (std::size_t i = 0, j = 0; i < d; ++i) y[i] = i == k ? x0[k] : z[j++];
    return y;
  };
  int evals = 0;
  const Objective obj = [&](const std::vector<double>& z) -> std::optional<double> {
    const auto y = solve_k(expand(z), evals);
    if (!y) return std::nullopt;
    ++evals;
    const auto st = eval(*y);
    if (st.E < target - kFeasSlack) return std::nullopt;
    return energy_cost(st, params);
  };
  const auto start = obj(rest);
  if (!start) return res;
  PatternResult red;
  if (rest.empty()) {
    red = PatternResult{rest, *start, 0};
  } else {
    red = pattern_search(obj, rest, *start, lo, hi, mesh, min_mesh, shrink, max_evals);
  }
  res.evaluations += evals;
  if (red.f < res.f) {
    int extra = 0;
    res.x = *solve_k(expand(red.x), extra);
    res.f = red.f;
    res.evaluations += extra;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Prefix-sharing sweep over threshold vectors on the uniform time grid.

struct SweepResult {
  TopK top;
  double max_exposure = 0.0;
  long leaves = 0;
};

class TreeSweep {
 public:
  TreeSweep(const ModelParams& params, const std::vector<int>& active, int resolution,
            int sweep_steps)
      : params_(params),
        dyn_(params),
        active_(active),
        R_(resolution),
        target_(params.throughput_target()) {
    const double cell = params.horizon / static_cast<double>(R_ - 1);
    m_ = std::max(1, static_cast<int>(std::ceil(
                         static_cast<double>(sweep_steps) / static_cast<double>(R_ - 1) - 1e-9)));
    h_ = cell / static_cast<double>(m_);
    cell_ = cell;
    u_.assign(static_cast<std::size_t>(params.num_controls()), 0.0);
    off_.assign(active.size(), R_ - 1);
  }

  // Explores the subtree whose first-boundary switch-off set is `first`.
  void run(const std::vector<double>& x0, unsigned first, SweepResult& out) {
    out_ = &out;
    std::vector<double> x = x0;
    const unsigned full = (1u << active_.size()) - 1u;
    descend(0, x, full, first);
  }

  std::vector<double> thresholds_of(const std::vector<int>& off) const {
    std::vector<double> t(static_cast<std::size_t>(params_.num_controls()), 0.0);
    for (std::size_t a = 0; a < active_.size(); ++a)
      t[static_cast<std::size_t>(active_[a])] = grid(off[a]);
    return t;
  }

  double grid(int k) const {
    return k == R_ - 1 ? params_.horizon : static_cast<double>(k) * cell_;
  }

 private:
  void leaf(const double* x) {
    const int L = params_.levels();
    double cost = 0.0;
    for (int i = 0; i <= params_.B; ++i) cost += params_.penalties[i] * (x[i] + x[L + i]);
    const double E = x[2 * L];
    out_->max_exposure = std::max(out_->max_exposure, E);
    ++out_->leaves;
    if (E >= target_ - kFeasSlack) out_->top.offer(cost, thresholds_of(off_));
  }

  // At boundary k with `mask` still on, switch off `sub` and continue.
  void descend(int k, std::vector<double>& x, unsigned mask, unsigned sub) {
    for (std::size_t a = 0; a < active_.size(); ++a)
      if (sub & (1u << a)) off_[a] = k;
    const unsigned next = mask & ~sub;
    if (next == 0 || k == R_ - 1) {
      const int L = params_.levels();
      if (next != 0) {
        for (std::size_t a = 0; a < active_.size(); ++a)
          if (next & (1u << a)) off_[a] = R_ - 1;
        leaf(x.data());
      } else {
        double q = 0.0;
        for (int j = params_.s; j <= params_.B; ++j) q += x[L + j];
        const double saved = x[2 * L];
        x[2 * L] += (params_.horizon - grid(k)) * q;
        leaf(x.data());
        x[2 * L] = saved;
      }
      for (std::size_t a = 0; a < active_.size(); ++a)
        if ((sub | next) & (1u << a)) off_[a] = R_ - 1;
      return;
    }
    std::fill(u_.begin(), u_.end(), 0.0);
    for (std::size_t a = 0; a < active_.size(); ++a)
      if (next & (1u << a)) u_[static_cast<std::size_t>(active_[a])] = 1.0;
    std::vector<double> y = x;
    const double h = (k + 1 == R_ - 1) ? (params_.horizon - grid(k)) / m_ : h_;
    for (int i = 0; i < m_; ++i) dyn_.step(y.data(), u_.data(), h);
    // Enumerate every subset of `next` to switch off at boundary k+1.
    // Switching off at the horizon is the same as staying on.
    if (k + 1 == R_ - 1) {
      descend(k + 1, y, next, 0);
    } else {
      for (unsigned s = next;; s = (s - 1) & next) {
        descend(k + 1, y, next, s);
        if (s == 0) break;
      }
    }
    for (std::size_t a = 0; a < active_.size(); ++a)
      if (sub & (1u << a)) off_[a] = R_ - 1;
  }

  const ModelParams& params_;
  FlatDynamics dyn_;
  std::vector<int> active_;
  int R_;
  int m_;
  double h_ = 0.0, cell_ = 0.0;
  double target_;
  std::vector<double> u_;
  std::vector<int> off_;
  SweepResult* out_ = nullptr;
};

SweepResult threshold_sweep(const ModelParams& params, const StateVector& init,
                            const std::vector<int>& active, const SearchConfig& cfg,
                            std::size_t keep) {
  const unsigned full = (1u << active.size()) - 1u;
  std::vector<unsigned> firsts;
  for (unsigned s = full;; s = (s - 1) & full) {
    firsts.push_back(s);
    if (s == 0) break;
  }
  std::vector<SweepResult> parts(firsts.size(), SweepResult{TopK(keep)});
  const auto x0 = FlatDynamics::pack(init);
  parallel_for(firsts.size(), cfg.threads, [&](std::size_t i) {
    TreeSweep sweep(params, active, cfg.resolution, cfg.sweep_steps);
    sweep.run(x0, firsts[i], parts[i]);
  });
  SweepResult total{TopK(keep)};
  for (const auto& p : parts) {
    total.top.merge(p.top);
    total.max_exposure = std::max(total.max_exposure, p.max_exposure);
    total.leaves += p.leaves;
  }
  return total;
}

OptimizationReport finalize(const ForwardingPolicy& pol, const ModelParams& params,
                            const StateVector& init, const SearchConfig& cfg) {
  const auto traj = integrate(pol, params, init, params.horizon, cfg.integrator);
  OptimizationReport rep;
  rep.policy = pol;
  rep.delivery = delivery_probability(traj, params);
  rep.unbiased_cost = unbiased_cost(traj, params);
  rep.objective = energy_cost(traj.final_state(), params);
  rep.feasible = throughput_ok(traj, params);
  rep.horizon = params.horizon;
  return rep;
}

}  // namespace

void SearchConfig::validate() const {
  if (resolution < 2) throw ConfigError("search: resolution must be >= 2");
  if (!(shrink > 0.0 && shrink < 1.0)) throw ConfigError("search: shrink must lie in (0,1)");
  if (!(min_mesh > 0.0)) throw ConfigError("search: min_mesh must be > 0");
  if (max_evaluations < 1) throw ConfigError("search: max_evaluations must be >= 1");
  if (multistart < 1) throw ConfigError("search: multistart must be >= 1");
  if (sweep_steps < 1) throw ConfigError("search: sweep_steps must be >= 1");
  if (static_time_resolution < 2) throw ConfigError("search: static_time_resolution must be >= 2");
  if (integrator.steps < 1) throw ConfigError("search: integrator steps must be >= 1");
  if (threads < 1) throw ConfigError("search: threads must be >= 1");
  if (stopping_grid < 2) throw ConfigError("search: stopping_grid must be >= 2");
  if (golden_iterations < 0) throw ConfigError("search: golden_iterations must be >= 0");
}

std::string_view heuristic_name(HeuristicClass c) {
  switch (c) {
    case HeuristicClass::StaticEnergy: return "static_energy";
    case HeuristicClass::StaticTime: return "static_time";
    case HeuristicClass::ProbabilityThreshold: return "probability_threshold";
    case HeuristicClass::InfectionThreshold: return "infection_threshold";
    case HeuristicClass::One: return "one";
    case HeuristicClass::Zero: return "zero";
  }
  return "unknown";
}

HeuristicClass parse_heuristic(std::string_view name) {
  for (auto c : kAllHeuristics)
    if (heuristic_name(c) == name) return c;
  throw ConfigError("unknown heuristic class: " + std::string(name));
}

std::vector<int> reachable_controls(const ModelParams& params, const StateVector& init) {
  const int B = params.B, s = params.s, r = params.r;
  std::vector<bool> live(static_cast<std::size_t>(B + 1), false);
  for (int i = 0; i <= B; ++i) live[i] = init.I[i] > 0.0;
  bool changed = true;
  while (changed) {
    changed = false;
    bool transmitter = false;
    for (int j = s; j <= B; ++j) transmitter = transmitter || live[j];
    if (!transmitter) break;
    for (int i = 0; i <= B; ++i) {
      if (live[i]) continue;
      const bool recv = i + r <= B && init.S[i + r] > 0.0;
      const bool sent = i + s <= B && live[i + s];
      if (recv || sent) {
        live[i] = true;
        changed = true;
      }
    }
  }
  std::vector<int> out;
  for (int i = s; i <= B; ++i)
    if (live[i]) out.push_back(i - s);
  return out;
}

OptimizationReport optimize_fixed_T(const ModelParams& params, const StateVector& init,
                                    const SearchConfig& cfg) {
  params.validate();
  init.validate(params);
  cfg.validate();
  const auto active = reachable_controls(params, init);
  if (active.size() > 16) throw ConfigError("optimize: too many levels for the threshold sweep");
  const auto n = static_cast<std::size_t>(params.num_controls());
  const double T = params.horizon;
  const double target = params.throughput_target();
  const int steps = cfg.integrator.steps;

  auto fine = [&](const std::vector<double>& t) {
    return terminal_of(policy::Threshold{t}, params, init, steps);
  };
  auto embed = [&](const std::vector<double>& z) {
    std::vector<double> t(n, 0.0);
    for (std::size_t a = 0; a < active.size(); ++a) t[static_cast<std::size_t>(active[a])] = z[a];
    return t;
  };
  auto project = [&](const std::vector<double>& t) {
    std::vector<double> z(active.size());
    for (std::size_t a = 0; a < active.size(); ++a) z[a] = t[static_cast<std::size_t>(active[a])];
    return z;
  };

  const std::size_t keep = static_cast<std::size_t>(2 * cfg.multistart);
  const auto sweep = threshold_sweep(params, init, active, cfg, keep);
  OptimizationReport rep;
  rep.evaluations = static_cast<int>(sweep.leaves);

  // Fine-check the coarse seeds; keep the first `multistart` feasible ones.
  std::vector<Candidate> seeds;
  double max_E = sweep.max_exposure;
  for (const auto& c : sweep.top.items()) {
    if (static_cast<int>(seeds.size()) >= cfg.multistart) break;
    const auto st = fine(c.x);
    ++rep.evaluations;
    max_E = std::max(max_E, st.E);
    if (throughput_ok(st, params)) seeds.push_back(Candidate{c.x, energy_cost(st, params)});
  }
  if (seeds.empty()) {
    const auto t = embed(std::vector<double>(active.size(), T));
    const auto st = fine(t);
    ++rep.evaluations;
    max_E = std::max(max_E, st.E);
    if (throughput_ok(st, params)) seeds.push_back(Candidate{t, energy_cost(st, params)});
  }
  if (seeds.empty())
    throw InfeasibleError("optimize: no threshold policy meets the mandated delivery probability",
                          delivery_from_exposure(max_E, params.beta0));

  Candidate best{seeds.front().x, kInf};
  if (!active.empty()) {
    const std::vector<double> lo(active.size(), 0.0), hi(active.size(), T);
    const Objective obj = [&](const std::vector<double>& z) -> std::optional<double> {
      const auto st = fine(embed(z));
      if (st.E < target - kFeasSlack) return std::nullopt;
      return energy_cost(st, params);
    };
    const double mesh0 = 0.5 / static_cast<double>(cfg.resolution - 1);
    for (const auto& sd : seeds) {
      // The full-space poll only needs to reach the constraint surface; the
      // reduced search does the fine work.
      const double coarse_mesh = std::max(cfg.min_mesh, mesh0 / 16.0);
      auto res = pattern_search(obj, project(sd.x), sd.f, lo, hi, mesh0, coarse_mesh, cfg.shrink,
                                cfg.max_evaluations);
      const auto eval = [&](const std::vector<double>& z) { return fine(embed(z)); };
      auto ridge = ridge_search(eval, params, res.x, res.f, lo, hi, mesh0, cfg.min_mesh,
                                cfg.shrink, cfg.max_evaluations);
      ridge.evaluations += res.evaluations;
      if (better(ridge.f, ridge.x, res.f, res.x)) res = std::move(ridge);
      else res.evaluations = ridge.evaluations;
      // Finish in the full space: interior optima (constraint slack) need it,
      // and on the surface it only confirms.
      auto polish = pattern_search(obj, res.x, res.f, lo, hi, coarse_mesh, cfg.min_mesh,
                                   cfg.shrink, cfg.max_evaluations);
      polish.evaluations += res.evaluations;
      res = std::move(polish);
      const auto t = embed(res.x);
      rep.traces.push_back(StartTrace{sd.x, t, res.f, res.evaluations});
      rep.evaluations += res.evaluations;
      if (better(res.f, t, best.f, best.x)) best = Candidate{t, res.f};
    }
  } else {
    best = seeds.front();
    rep.traces.push_back(StartTrace{best.x, best.x, best.f, 0});
  }

  auto out = finalize(policy::Threshold{best.x}, params, init, cfg);
  out.evaluations = rep.evaluations;
  out.traces = std::move(rep.traces);
  return out;
}

// ---------------------------------------------------------------------------

OptimizationReport optimize_stopping(const ModelParams& params, const StateVector& init,
                                     const StoppingPenalty& fpen, const SearchConfig& cfg) {
  params.validate();
  init.validate(params);
  cfg.validate();
  fpen.validate();
  const auto n = static_cast<std::size_t>(params.num_controls());
  const double T0 = zero_control_horizon(params, init);
  const double target = params.throughput_target();
  const double base_cost = energy_cost(init, params);

  OptimizationReport best;
  best.policy = policy::Threshold{std::vector<double>(n, 0.0)};
  best.objective = fpen.value(T0) + base_cost;
  best.horizon = T0;
  best.unbiased_cost = 0.0;
  best.delivery = delivery_from_exposure(T0 * init.transmitting_infectives(params.s), params.beta0);
  best.feasible = true;
  if (T0 <= 0.0) {
    best.objective = fpen.value(0.0) + base_cost;
    best.horizon = 0.0;
    best.delivery = 0.0;
    return best;
  }

  int evaluations = 0;
  // Fixed-horizon optimum at T, then stop at the time the constraint becomes
  // active and report f(T') + energy cost at T'.
  auto solve = [&](double T) -> std::optional<OptimizationReport> {
    ModelParams p = params;
    p.horizon = T;
    OptimizationReport r;
    try {
      r = optimize_fixed_T(p, init, cfg);
    } catch (const InfeasibleError&) {
      return std::nullopt;
    }
    evaluations += r.evaluations;
    auto times = std::get<policy::Threshold>(r.policy).times;
    const auto sch = compile(policy::Threshold{times}, p, init, cfg.integrator);
    const int steps = cfg.integrator.steps;
    double Tstop = T;
    if (integrate_terminal(sch, p, init, T, steps).E > target + kConstraintActiveTol) {
      double lo = 0.0, hi = T;
      for (int it = 0; it < 100 && hi - lo > 1e-13 * T; ++it) {
        const double mid = 0.5 * (lo + hi);
        (integrate_terminal(sch, p, init, mid, steps).E >= target ? hi : lo) = mid;
      }
      Tstop = hi;
    }
    for (auto& t : times) t = std::min(t, Tstop);
    p.horizon = Tstop;
    const auto traj = integrate(policy::Threshold{times}, p, init, Tstop, cfg.integrator);
    OptimizationReport out;
    out.policy = policy::Threshold{times};
    out.horizon = Tstop;
    out.feasible = throughput_ok(traj, p);
    out.delivery = delivery_probability(traj, p);
    out.unbiased_cost = unbiased_cost(traj, p);
    out.objective = fpen.value(Tstop) + energy_cost(traj.final_state(), p);
    out.traces = std::move(r.traces);
    if (!out.feasible) return std::nullopt;
    return out;
  };

  auto consider = [&](const std::optional<OptimizationReport>& r) {
    if (r && r->objective < best.objective) best = *r;
  };

  const int G = cfg.stopping_grid;
  std::vector<double> grid(static_cast<std::size_t>(G));
  std::vector<double> vals(static_cast<std::size_t>(G), kInf);
  for (int k = 1; k < G; ++k) {
    grid[k] = T0 * static_cast<double>(k) / static_cast<double>(G - 1);
    const auto r = solve(grid[k]);
    if (r) vals[k] = r->objective;
    consider(r);
  }
  grid[0] = 0.0;
  const auto kbest = static_cast<int>(std::min_element(vals.begin(), vals.end()) - vals.begin());
  if (std::isfinite(vals[kbest])) {
    double a = grid[std::max(0, kbest - 1)], b = grid[std::min(G - 1, kbest + 1)];
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double c = b - g * (b - a), d = a + g * (b - a);
    auto val = [&](double T) {
      if (T <= 0.0) return kInf;
      const auto r = solve(T);
      consider(r);
      return r ? r->objective : kInf;
    };
    double fc = val(c), fd = val(d);
    for (int it = 0; it < cfg.golden_iterations; ++it) {
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - g * (b - a);
        fc = val(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + g * (b - a);
        fd = val(d);
      }
    }
  }
  best.evaluations = evaluations;
  return best;
}

// ---------------------------------------------------------------------------

OptimizationReport optimize_heuristic(HeuristicClass cls, const ModelParams& params,
                                      const StateVector& init, const SearchConfig& cfg) {
  params.validate();
  init.validate(params);
  cfg.validate();
  const double T = params.horizon;
  const double target = params.throughput_target();
  const double base = energy_cost(init, params);
  const auto n = static_cast<std::size_t>(params.num_controls());
  const auto active = reachable_controls(params, init);
  const int fine_steps = cfg.integrator.steps;
  const int coarse_steps = cfg.sweep_steps;

  int evaluations = 0;
  double max_E = 0.0;
  auto eval = [&](const ForwardingPolicy& pol, int steps) -> std::optional<double> {
    const auto st = terminal_of(pol, params, init, steps);
    ++evaluations;
    max_E = std::max(max_E, st.E);
    if (st.E < target - kFeasSlack) return std::nullopt;
    return energy_cost(st, params) - base;
  };
  auto infeasible = [&]() {
    return InfeasibleError(std::string("heuristic class ") + std::string(heuristic_name(cls)) +
                               " has no member meeting the mandated delivery probability",
                           delivery_from_exposure(max_E, params.beta0));
  };

  // Grid over `points`, then pattern search from the best feasible seeds.
  using Maker = std::function<ForwardingPolicy(const std::vector<double>&)>;
  std::vector<StartTrace> traces;
  auto search = [&](const std::vector<std::vector<double>>& points, const Maker& make,
                    const std::vector<double>& lo, const std::vector<double>& hi,
                    double mesh0) -> Candidate {
    TopK top(static_cast<std::size_t>(2 * cfg.multistart));
    for (const auto& x : points)
      if (auto f = eval(make(x), coarse_steps)) top.offer(*f, x);
    Candidate best{{}, kInf};
    int started = 0;
    const Objective obj = [&](const std::vector<double>& x) { return eval(make(x), fine_steps); };
    const auto state = [&](const std::vector<double>& x) {
      ++evaluations;
      return terminal_of(make(x), params, init, fine_steps);
    };
    const double coarse_mesh = std::max(cfg.min_mesh, mesh0 / 16.0);
    for (const auto& c : top.items()) {
      if (started >= cfg.multistart) break;
      const auto f0 = obj(c.x);
      if (!f0) continue;
      ++started;
      auto res = pattern_search(obj, c.x, *f0, lo, hi, mesh0, coarse_mesh, cfg.shrink,
                                cfg.max_evaluations);
      const auto ridge = ridge_search(state, params, res.x, res.f + base, lo, hi, mesh0,
                                      cfg.min_mesh, cfg.shrink, cfg.max_evaluations);
      if (ridge.f - base < res.f) {
        if (const auto f = obj(ridge.x)) {
          res.x = ridge.x;
          res.f = *f;
        }
      }
      const int used = res.evaluations + ridge.evaluations;
      res = pattern_search(obj, res.x, res.f, lo, hi, coarse_mesh, cfg.min_mesh, cfg.shrink,
                           cfg.max_evaluations);
      res.evaluations += used;
      traces.push_back(StartTrace{c.x, res.x, res.f, res.evaluations});
      if (best.x.empty() || better(res.f, res.x, best.f, best.x)) best = Candidate{res.x, res.f};
    }
    if (best.x.empty()) throw infeasible();
    return best;
  };

  const double mesh_grid = 0.5 / static_cast<double>(cfg.resolution - 1);
  ForwardingPolicy chosen = policy::Zero{};
  switch (cls) {
    case HeuristicClass::One:
    case HeuristicClass::Zero: {
      chosen = cls == HeuristicClass::One ? ForwardingPolicy{policy::One{}}
                                          : ForwardingPolicy{policy::Zero{}};
      if (!eval(chosen, fine_steps)) throw infeasible();
      break;
    }
    case HeuristicClass::StaticEnergy: {
      std::vector<std::vector<double>> pts;
      const int R = cfg.resolution;
      for (int a = 0; a < R; ++a)
        for (int b = 0; b < R; ++b)
          pts.push_back({T * a / (R - 1.0), b / (R - 1.0)});
      const Maker make = [](const std::vector<double>& x) {
        return ForwardingPolicy{policy::StaticEnergy{x[0], x[1]}};
      };
      const auto best = search(pts, make, {0.0, 0.0}, {T, 1.0}, mesh_grid);
      chosen = make(best.x);
      break;
    }
    case HeuristicClass::StaticTime: {
      const int R = cfg.static_time_resolution;
      const std::size_t d = active.size();
      std::vector<std::vector<double>> pts;
      std::vector<int> idx(d, 0);
      while (true) {
        std::vector<double> x(d);
        for (std::size_t a = 0; a < d; ++a) x[a] = idx[a] / (R - 1.0);
        pts.push_back(x);
        std::size_t a = 0;
        while (a < d && ++idx[a] == R) idx[a++] = 0;
        if (a == d) break;
      }
      const Maker make = [&](const std::vector<double>& x) {
        std::vector<double> v(n, 0.0);
        for (std::size_t a = 0; a < d; ++a) v[static_cast<std::size_t>(active[a])] = x[a];
        return ForwardingPolicy{policy::StaticTime{v}};
      };
      if (d == 0) {
        chosen = make({});
        if (!eval(chosen, fine_steps)) throw infeasible();
        break;
      }
      const auto best = search(pts, make, std::vector<double>(d, 0.0), std::vector<double>(d, 1.0),
                               0.5 / (R - 1.0));
      chosen = make(best.x);
      break;
    }
    case HeuristicClass::ProbabilityThreshold:
    case HeuristicClass::InfectionThreshold: {
      // Parameterized by the drop time tau under the all-ones control.
      const ForwardingPolicy ones = policy::One{};
      const auto sch = compile(ones, params, init, cfg.integrator);
      const bool prob = cls == HeuristicClass::ProbabilityThreshold;
      const Maker make = [&](const std::vector<double>& x) {
        const double tau = x[0];
        const auto st = tau > 0.0 ? integrate_terminal(sch, params, init, tau, fine_steps) : init;
        if (prob) {
          const double q = std::min(1.0, delivery_from_exposure(st.E, params.beta0));
          return ForwardingPolicy{policy::ProbabilityThreshold{q}};
        }
        const double c = std::min(1.0, st.transmitting_infectives(params.s));
        return ForwardingPolicy{policy::InfectionThreshold{c}};
      };
      std::vector<std::vector<double>> pts;
      const int R = cfg.resolution;
      for (int a = 0; a < R; ++a) pts.push_back({T * a / (R - 1.0)});
      const auto best = search(pts, make, {0.0}, {T}, mesh_grid);
      chosen = make(best.x);
      break;
    }
  }

  const auto traj = integrate(chosen, params, init, T, cfg.integrator);
  OptimizationReport rep;
  rep.policy = chosen;
  rep.delivery = delivery_probability(traj, params);
  rep.unbiased_cost = unbiased_cost(traj, params);
  rep.objective = rep.unbiased_cost;
  rep.feasible = throughput_ok(traj, params);
  rep.evaluations = evaluations;
  rep.horizon = T;
  rep.traces = std::move(traces);
  return rep;
}

}  // namespace dtn
