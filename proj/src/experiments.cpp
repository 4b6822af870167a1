#include "dtn/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "dtn/error.hpp"
#include "dtn/instances.hpp"
#include "dtn/metrics.hpp"
#include "dtn/parallel.hpp"
#include "dtn/policy.hpp"

namespace dtn::experiments {

namespace {

using Cell = std::optional<double>;

Cell stat_std(const mc::Stat& s) { return s.std; }

double relative_gap(double better, double worse) {
  return worse > 0.0 ? (worse - better) / worse : 0.0;
}

// Best policy of a family on one instance, or nullopt if none is feasible.
std::optional<OptimizationReport> best_in_family(const std::optional<HeuristicClass>& family,
                                                 const ModelParams& params,
                                                 const StateVector& init,
                                                 const SearchConfig& search) {
  try {
    if (!family) return optimize_fixed_T(params, init, search);
    return optimize_heuristic(*family, params, init, search);
  } catch (const InfeasibleError&) {
    return std::nullopt;
  }
}

}  // namespace

std::size_t ExperimentResult::column(const std::string& name) const {
  const auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ConfigError("experiment: no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

std::optional<double> ExperimentResult::at(std::size_t row, const std::string& name) const {
  return rows.at(row).at(column(name));
}

mc::MCConfig exponential_validation_mc() {
  mc::MCConfig c;
  c.N = 160;
  c.runs = 100;
  return c;
}

mc::MCConfig powerlaw_validation_mc(const ModelParams& params) {
  mc::MCConfig c;
  c.N = 41;
  c.runs = 100;
  // Cutoffs of 2 minutes and 24 hours, in days.
  c.contact = mc::match_pair_rate(mc::TruncatedPowerLaw{0.4, 1.0 / 720.0, 1.0}, c.N, params.beta);
  return c;
}

mc::MCConfig robustness_mc() {
  mc::MCConfig c;
  c.N = 500;
  c.runs = 200;
  return c;
}

std::vector<double> default_validation_p() {
  return {0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
}

std::vector<double> default_beta_sweep() {
  std::vector<double> b;
  for (int k = 0; k <= 12; ++k) b.push_back(1.0 + 0.25 * k);
  return b;
}

ExperimentResult run_validation(const ModelParams& params, const StateVector& init,
                                const ExperimentConfig& cfg, const std::vector<double>& p_values) {
  if (p_values.empty()) throw ConfigError("validation: empty p sweep");
  cfg.mc.validate();
  ExperimentResult res;
  res.name = "validation";
  res.seed = cfg.mc.seed;
  res.columns = {"p",           "ode_cost",         "mc_cost_mean",
                 "mc_cost_std", "ode_delivery",     "mc_delivery_mean",
                 "mc_delivery_std", "mc_delivered_fraction", "mc_contacts_per_node"};
  res.rows.resize(p_values.size());
  parallel_for(p_values.size(), cfg.threads, [&](std::size_t k) {
    auto p = params;
    p.p = p_values[k];
    p.validate();
    // A mandate above the reachable delivery has no optimal control: empty cells.
    std::optional<OptimizationReport> found;
    try {
      found = optimize_fixed_T(p, init, cfg.search);
    } catch (const InfeasibleError&) {
      res.rows[k].assign(res.columns.size(), std::nullopt);
      res.rows[k][0] = p.p;
      return;
    }
    const auto& opt = *found;
    const auto tr = integrate(opt.policy, p, init, p.horizon, cfg.search.integrator);
    auto mcc = cfg.mc;
    mcc.threads = 1;
    const auto st = mc::run_ensemble(opt.policy, p, init, mcc);
    res.rows[k] = {p.p,
                   unbiased_cost(tr, p),
                   st.unbiased_cost.mean,
                   stat_std(st.unbiased_cost),
                   delivery_probability(tr, p),
                   st.delivery.mean,
                   stat_std(st.delivery),
                   st.delivered_fraction.mean,
                   st.contacts_per_node.mean};
  });
  return res;
}

ExperimentResult run_heuristic_sweep(const ModelParams& params, const StateVector& init,
                                     const ExperimentConfig& cfg,
                                     const std::vector<double>& beta_values) {
  if (beta_values.empty()) throw ConfigError("heuristic sweep: empty beta sweep");
  ExperimentResult res;
  res.name = "heuristic_sweep";
  res.columns = {"beta", "optimal"};
  for (auto c : kAllHeuristics) res.columns.emplace_back(heuristic_name(c));
  res.columns.insert(res.columns.end(), {"best_heuristic", "gap", "one_excess"});
  res.rows.resize(beta_values.size());
  parallel_for(beta_values.size(), cfg.threads, [&](std::size_t k) {
    auto p = params;
    p.beta = p.beta0 = beta_values[k];
    p.validate();
    std::vector<Cell> row{p.beta};
    const auto opt = best_in_family(std::nullopt, p, init, cfg.search);
    row.push_back(opt ? Cell(opt->unbiased_cost) : std::nullopt);
    Cell best, worst_other, one;
    for (auto c : kAllHeuristics) {
      const auto h = best_in_family(c, p, init, cfg.search);
      const Cell v = h ? Cell(h->unbiased_cost) : std::nullopt;
      row.push_back(v);
      if (!v) continue;
      if (!best || *v < *best) best = v;
      if (c == HeuristicClass::One)
        one = v;
      else if (!worst_other || *v > *worst_other)
        worst_other = v;
    }
    row.push_back(best);
    row.push_back(opt && best ? Cell(relative_gap(opt->unbiased_cost, *best)) : std::nullopt);
    row.push_back(one && worst_other && *worst_other > 0.0
                      ? Cell((*one - *worst_other) / *worst_other)
                      : std::nullopt);
    res.rows[k] = std::move(row);
  });
  return res;
}

ExperimentResult run_robustness(const ModelParams& params, const StateVector& init,
                                const ExperimentConfig& cfg, RobustnessVariable variable,
                                const std::vector<double>& values) {
  if (values.empty()) throw ConfigError("robustness: empty sweep");
  cfg.mc.validate();
  const auto opt = optimize_fixed_T(params, init, cfg.search);
  ExperimentResult res;
  res.name = variable == RobustnessVariable::ClockOffset ? "robustness_clock" : "robustness_level";
  res.seed = cfg.mc.seed;
  res.columns = {variable == RobustnessVariable::ClockOffset ? "theta_star" : "p_star",
                 "cost_mean", "cost_std", "delivery_mean", "delivery_std", "delivered_fraction"};
  res.rows.resize(values.size());
  parallel_for(values.size(), cfg.threads, [&](std::size_t k) {
    auto mcc = cfg.mc;
    mcc.threads = 1;
    if (variable == RobustnessVariable::ClockOffset)
      mcc.theta_star = values[k];
    else
      mcc.p_star = values[k];
    const auto st = mc::run_ensemble(opt.policy, params, init, mcc);
    res.rows[k] = {values[k],        st.unbiased_cost.mean, stat_std(st.unbiased_cost),
                   st.delivery.mean, stat_std(st.delivery), st.delivered_fraction.mean};
  });
  const auto tr = integrate(opt.policy, params, init, params.horizon, cfg.search.integrator);
  res.summary["ode_cost"] = unbiased_cost(tr, params);
  res.summary["ode_delivery"] = delivery_probability(tr, params);
  return res;
}

void MultiMessageConfig::validate() const {
  if (M < 1) throw ConfigError("multi-message: M must be at least 1");
  if (!(upsilon > 0.0 && upsilon < 1.0)) throw ConfigError("multi-message: upsilon must lie in (0,1)");
  if (!(ttl > 0.0) || !std::isfinite(ttl)) throw ConfigError("multi-message: ttl must be positive");
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("multi-message: p must lie in [0,1)");
}

std::string family_name(const std::optional<HeuristicClass>& family) {
  return family ? std::string(heuristic_name(*family)) : std::string("myopic_optimal");
}

std::optional<StateVector> spread_message(const std::vector<double>& levels, double upsilon,
                                          const ModelParams& params) {
  const int L = params.levels();
  if (static_cast<int>(levels.size()) != L) throw ConfigError("spread: level vector size mismatch");
  const int first = params.s + params.r;
  double eligible = 0.0;
  for (int j = first; j < L; ++j) eligible += levels[j];
  if (eligible < upsilon || eligible <= 0.0) return std::nullopt;
  StateVector x(levels, std::vector<double>(L, 0.0));
  for (int j = first; j < L; ++j) {
    const double m = upsilon * levels[j] / eligible;
    x.S[j] -= m;
    x.I[j - params.r] += m;
  }
  return x;
}

ExperimentResult run_multi_message(const ModelParams& params, const std::vector<double>& start,
                                   const MultiMessageConfig& mm, const ExperimentConfig& cfg) {
  mm.validate();
  auto p = params;
  p.horizon = mm.ttl;
  p.p = mm.p;
  p.validate();
  StateVector(start, std::vector<double>(start.size(), 0.0)).validate(p);

  ExperimentResult res;
  res.name = "multi_message_" + family_name(mm.family);
  res.columns = {"k", "cumulative_cost", "message_cost", "feasible"};
  const auto level_cost = [&](const std::vector<double>& v) {
    return std::inner_product(v.begin(), v.end(), p.penalties.begin(), 0.0);
  };
  const double base = level_cost(start);
  std::vector<double> levels = start;
  int sent = 0;
  for (int k = 1; k <= mm.M; ++k) {
    const double before = level_cost(levels);
    std::optional<Trajectory> best;
    if (const auto x = spread_message(levels, mm.upsilon, p)) {
      // The family is extended by the constant policies so exhaustion means
      // no member of the family can meet the target.
      double best_cost = 0.0;
      const auto consider = [&](const ForwardingPolicy& pol) {
        auto tr = integrate(pol, p, *x, p.horizon, cfg.search.integrator);
        if (!throughput_ok(tr, p)) return;
        const double c = energy_cost(tr.final_state(), p);
        if (!best || c < best_cost) {
          best_cost = c;
          best = std::move(tr);
        }
      };
      if (const auto opt = best_in_family(mm.family, p, *x, cfg.search)) consider(opt->policy);
      if (!best) {
        consider(policy::One{});
        consider(policy::Zero{});
      }
    }
    if (!best) {
      res.rows.push_back({static_cast<double>(k), level_cost(levels) - base, std::nullopt, 0.0});
      break;
    }
    // At the TTL the message is dropped: infectives revert to susceptibles.
    const auto& fin = best->final_state();
    for (int i = 0; i < p.levels(); ++i) levels[i] = std::max(0.0, fin.S[i] + fin.I[i]);
    const double mass = std::accumulate(levels.begin(), levels.end(), 0.0);
    for (auto& v : levels) v /= mass;
    ++sent;
    const double after = level_cost(levels);
    res.rows.push_back({static_cast<double>(k), after - base, after - before, 1.0});
  }
  res.summary["messages"] = sent;
  return res;
}

ModelParams multi_message_params() {
  auto p = instances::defaults(2.0);
  p.beta = p.beta0 = 3.0;
  p.horizon = 100.0;
  p.p = 0.95;
  return p;
}

std::vector<double> multi_message_start() { return {0, 0, 0, 0.33, 0.33, 0.34}; }

SearchConfig multi_message_search() {
  SearchConfig c;
  c.resolution = 11;
  c.multistart = 2;
  c.static_time_resolution = 6;
  return c;
}

}  // namespace dtn::experiments
