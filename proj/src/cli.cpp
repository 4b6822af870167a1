#include "dtn/cli.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "dtn/error.hpp"
#include "dtn/instances.hpp"

namespace dtn::cli {

namespace fs = std::filesystem;

namespace {

using Table = std::pair<std::vector<std::string>, std::vector<std::vector<std::optional<double>>>>;

// Rejects members outside `allowed`; `where` names the object in messages.
void check_keys(const json& obj, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  if (!obj.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <class T>
void read(const json& obj, const char* key, T& dst) {
  if (obj.contains(key)) dst = obj.at(key).get<T>();
}

double number(const json& j, const std::string& where) {
  if (!j.is_number()) throw ConfigError(where + ": expected a number");
  return j.get<double>();
}

std::vector<double> numbers(const json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of numbers");
  std::vector<double> v;
  for (const auto& e : j) v.push_back(number(e, where));
  return v;
}

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

instances::Instance preset(const std::string& name, RunConfig& cfg) {
  namespace ex = experiments;
  if (name == "defaults") return {instances::defaults(), StateVector()};
  if (name == "table1") return instances::table1(2.0);
  if (name == "fig1a") return instances::fig1a();
  if (name == "fig1b") return instances::fig1b();
  if (name == "validation_exponential") {
    cfg.mc = ex::exponential_validation_mc();
    return instances::validation_exponential(0.9);
  }
  if (name == "validation_powerlaw") {
    auto inst = instances::validation_powerlaw(0.9);
    cfg.mc = ex::powerlaw_validation_mc(inst.params);
    return inst;
  }
  if (name == "heuristic_sweep") return instances::heuristic_sweep(2.0, 10.0);
  if (name == "robustness") {
    cfg.mc = ex::robustness_mc();
    return instances::robustness();
  }
  if (name == "multi_message") {
    cfg.search = ex::multi_message_search();
    const auto p = ex::multi_message_params();
    const auto S = ex::multi_message_start();
    return {p, StateVector(S, std::vector<double>(S.size(), 0.0))};
  }
  throw ConfigError("config: unknown preset '" + name + "'");
}

void parse_model(const json& j, ModelParams& p) {
  check_keys(j, {"B", "s", "r", "beta", "beta0", "horizon", "p", "penalties", "penalty_alpha"},
             "model");
  read(j, "B", p.B);
  read(j, "s", p.s);
  read(j, "r", p.r);
  if (j.contains("beta")) p.beta = number(j.at("beta"), "model.beta");
  if (j.contains("beta0")) p.beta0 = number(j.at("beta0"), "model.beta0");
  if (j.contains("horizon")) p.horizon = number(j.at("horizon"), "model.horizon");
  if (j.contains("p")) p.p = number(j.at("p"), "model.p");
  if (j.contains("penalties") && j.contains("penalty_alpha"))
    throw ConfigError("model: give either penalties or penalty_alpha");
  if (j.contains("penalties")) p.penalties = numbers(j.at("penalties"), "model.penalties");
  if (j.contains("penalty_alpha"))
    p.penalties = ModelParams::power_penalties(p.B, number(j.at("penalty_alpha"), "model.penalty_alpha"));
  if (static_cast<int>(p.penalties.size()) != p.levels() && !j.contains("penalties") &&
      !j.contains("penalty_alpha"))
    p.penalties = ModelParams::power_penalties(p.B, 2.0);
}

void parse_search(const json& j, SearchConfig& c) {
  check_keys(j,
             {"resolution", "shrink", "min_mesh", "max_evaluations", "multistart", "sweep_steps",
              "static_time_resolution", "integrator_steps", "stopping_grid", "golden_iterations"},
             "search");
  read(j, "resolution", c.resolution);
  read(j, "shrink", c.shrink);
  read(j, "min_mesh", c.min_mesh);
  read(j, "max_evaluations", c.max_evaluations);
  read(j, "multistart", c.multistart);
  read(j, "sweep_steps", c.sweep_steps);
  read(j, "static_time_resolution", c.static_time_resolution);
  read(j, "integrator_steps", c.integrator.steps);
  read(j, "stopping_grid", c.stopping_grid);
  read(j, "golden_iterations", c.golden_iterations);
}

void parse_mc(const json& j, mc::MCConfig& c, const ModelParams& params) {
  check_keys(j, {"N", "runs", "contact", "theta_star", "p_star", "assignment", "report_points"},
             "montecarlo");
  read(j, "N", c.N);
  read(j, "runs", c.runs);
  read(j, "theta_star", c.theta_star);
  read(j, "p_star", c.p_star);
  read(j, "report_points", c.report_points);
  if (j.contains("assignment")) {
    const auto a = j.at("assignment").get<std::string>();
    if (a == "rounding")
      c.assignment = mc::InitialAssignment::DeterministicRounding;
    else if (a == "multinomial")
      c.assignment = mc::InitialAssignment::Multinomial;
    else
      throw ConfigError("montecarlo.assignment: expected 'rounding' or 'multinomial'");
  }
  if (j.contains("contact")) {
    const auto& k = j.at("contact");
    check_keys(k, {"type", "alpha", "t_min", "t_max", "match_pair_rate"}, "montecarlo.contact");
    const auto type = k.at("type").get<std::string>();
    if (type == "exponential") {
      if (k.size() != 1) throw ConfigError("montecarlo.contact: exponential takes no parameters");
      c.contact = mc::ExponentialContacts{};
    } else if (type == "power_law") {
      mc::TruncatedPowerLaw law;
      read(k, "alpha", law.alpha);
      read(k, "t_min", law.t_min);
      read(k, "t_max", law.t_max);
      bool match = true;
      read(k, "match_pair_rate", match);
      if (!(law.t_min > 0.0 && law.t_max > law.t_min && law.alpha > 0.0))
        throw ConfigError("montecarlo.contact: need alpha > 0 and 0 < t_min < t_max");
      c.contact = match ? mc::match_pair_rate(law, c.N, params.beta) : law;
    } else {
      throw ConfigError("montecarlo.contact.type: expected 'exponential' or 'power_law'");
    }
  }
}

std::optional<HeuristicClass> parse_family(const std::string& name) {
  if (name == "myopic_optimal") return std::nullopt;
  return parse_heuristic(name);
}

void parse_experiment(const json& j, ExperimentSettings& e) {
  check_keys(j, {"p_values", "beta_values", "values", "variable", "M", "upsilon", "ttl", "families"},
             "experiment");
  if (j.contains("p_values")) e.p_values = numbers(j.at("p_values"), "experiment.p_values");
  if (j.contains("beta_values")) e.beta_values = numbers(j.at("beta_values"), "experiment.beta_values");
  if (j.contains("values")) e.values = numbers(j.at("values"), "experiment.values");
  if (j.contains("variable")) {
    const auto v = j.at("variable").get<std::string>();
    if (v == "theta_star")
      e.variable = RobustnessKind::ThetaStar;
    else if (v == "p_star")
      e.variable = RobustnessKind::PStar;
    else
      throw ConfigError("experiment.variable: expected 'theta_star' or 'p_star'");
  }
  read(j, "M", e.M);
  if (j.contains("upsilon")) e.upsilon = number(j.at("upsilon"), "experiment.upsilon");
  if (j.contains("ttl")) e.ttl = number(j.at("ttl"), "experiment.ttl");
  if (j.contains("families")) {
    std::vector<std::optional<HeuristicClass>> f;
    for (const auto& n : j.at("families")) f.push_back(parse_family(n.get<std::string>()));
    e.families = f;
  }
}

json stat_json(const mc::Stat& s) {
  json j{{"mean", s.mean}};
  j["std"] = s.std ? json(*s.std) : json(nullptr);
  return j;
}

json optimization_json(const OptimizationReport& rep) {
  json traces = json::array();
  for (const auto& t : rep.traces)
    traces.push_back({{"seed", t.seed}, {"result", t.result}, {"objective", t.objective},
                      {"evaluations", t.evaluations}});
  return {{"policy", policy_to_json(rep.policy)},
          {"objective", rep.objective},
          {"unbiased_cost", rep.unbiased_cost},
          {"delivery", rep.delivery},
          {"feasible", rep.feasible},
          {"evaluations", rep.evaluations},
          {"horizon", rep.horizon},
          {"traces", traces}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

struct Context {
  RunConfig cfg;
  fs::path out;
  bool verify = false;
  std::ostream* log = nullptr;
};

json base_summary(const Context& ctx, const std::string& command) {
  return {{"command", command},
          {"schema_version", kSchemaVersion},
          {"seed", ctx.cfg.seed},
          {"config_hash", ctx.cfg.config_hash}};
}

void write_trajectory(const Context& ctx, const ForwardingPolicy& pol, const ModelParams& p) {
  const auto [cols, rows] =
      trajectory_table(pol, p, ctx.cfg.init, ctx.cfg.report_points, ctx.cfg.search.integrator);
  write_csv(ctx.out / "trajectory.csv", cols, rows);
}

int cmd_simulate(const Context& ctx) {
  const auto& c = ctx.cfg;
  if (!c.policy) throw ConfigError("simulate: the config needs a policy");
  const auto tr = integrate(*c.policy, c.params, c.init, c.params.horizon, c.search.integrator);
  write_trajectory(ctx, *c.policy, c.params);
  auto s = base_summary(ctx, "simulate");
  s["policy"] = policy_to_json(*c.policy);
  s["delivery"] = delivery_probability(tr, c.params);
  s["meets_target"] = throughput_ok(tr, c.params);
  s["energy_cost"] = energy_cost(tr.final_state(), c.params);
  s["unbiased_cost"] = unbiased_cost(tr, c.params);
  s["exposure"] = tr.final_state().E;
  write_json(ctx.out / "summary.json", s);
  return kOk;
}

int write_infeasible(const Context& ctx, const std::string& command, const InfeasibleError& e) {
  auto s = base_summary(ctx, command);
  s["feasible"] = false;
  s["max_delivery"] = e.max_delivery();
  s["message"] = e.what();
  write_json(ctx.out / "summary.json", s);
  if (ctx.log) *ctx.log << "infeasible: " << e.what() << '\n';
  return kInfeasible;
}

int finish_optimization(const Context& ctx, const std::string& command,
                        const OptimizationReport& rep, const std::optional<StoppingPenalty>& stop,
                        const std::optional<std::string>& cls) {
  auto p = ctx.cfg.params;
  p.horizon = rep.horizon > 0.0 ? rep.horizon : p.horizon;
  auto s = base_summary(ctx, command);
  s.update(optimization_json(rep));
  if (cls) s["class"] = *cls;
  if (stop) s["stopping_time"] = p.horizon;
  if (ctx.verify) {
    if (std::holds_alternative<policy::Threshold>(rep.policy)) {
      auto opts = ctx.cfg.verify;
      opts.stopping = stop;
      s["verification"] = report_to_json(verify_pmp(rep.policy, p, ctx.cfg.init, opts));
    } else {
      s["verification"] = {{"status", "not_applicable"}};
    }
  }
  write_json(ctx.out / "summary.json", s);
  write_trajectory(ctx, rep.policy, p);
  return kOk;
}

int cmd_optimize(const Context& ctx) {
  try {
    return finish_optimization(ctx, "optimize",
                               optimize_fixed_T(ctx.cfg.params, ctx.cfg.init, ctx.cfg.search),
                               std::nullopt, std::nullopt);
  } catch (const InfeasibleError& e) {
    return write_infeasible(ctx, "optimize", e);
  }
}

int cmd_optimize_stopping(const Context& ctx) {
  try {
    const auto rep =
        optimize_stopping(ctx.cfg.params, ctx.cfg.init, ctx.cfg.stopping, ctx.cfg.search);
    return finish_optimization(ctx, "optimize-stopping", rep, ctx.cfg.stopping, std::nullopt);
  } catch (const InfeasibleError& e) {
    return write_infeasible(ctx, "optimize-stopping", e);
  }
}

int cmd_heuristic(const Context& ctx, const std::string& name) {
  const auto cls = parse_heuristic(name);
  try {
    return finish_optimization(ctx, "heuristic",
                               optimize_heuristic(cls, ctx.cfg.params, ctx.cfg.init, ctx.cfg.search),
                               std::nullopt, std::string(heuristic_name(cls)));
  } catch (const InfeasibleError& e) {
    return write_infeasible(ctx, "heuristic", e);
  }
}

int cmd_verify(const Context& ctx) {
  const auto& c = ctx.cfg;
  if (!c.policy) throw ConfigError("verify: the config needs a threshold policy");
  auto opts = c.verify;
  if (c.has_stopping) opts.stopping = c.stopping;
  const auto rep = verify_pmp(*c.policy, c.params, c.init, opts);
  auto s = base_summary(ctx, "verify");
  s["policy"] = policy_to_json(*c.policy);
  s["verification"] = report_to_json(rep);
  write_json(ctx.out / "summary.json", s);
  return kOk;
}

int cmd_montecarlo(const Context& ctx) {
  const auto& c = ctx.cfg;
  if (!c.policy) throw ConfigError("montecarlo: the config needs a policy");
  const auto st = mc::run_ensemble(*c.policy, c.params, c.init, c.mc);
  const int L = c.params.levels();
  std::vector<std::string> cols{"t"};
  for (const char* pre : {"S", "I", "std_S", "std_I"})
    for (int i = 0; i < L; ++i) cols.push_back(pre + std::to_string(i));
  std::vector<std::vector<std::optional<double>>> rows;
  for (std::size_t k = 0; k < st.grid.size(); ++k) {
    std::vector<std::optional<double>> row{st.grid[k]};
    for (const auto* src : {&st.mean_S, &st.mean_I})
      for (int i = 0; i < L; ++i) row.emplace_back((*src)[k][i]);
    for (const auto* src : {&st.std_S, &st.std_I})
      for (int i = 0; i < L; ++i)
        row.push_back(src->empty() ? std::nullopt : std::optional<double>((*src)[k][i]));
    rows.push_back(std::move(row));
  }
  write_csv(ctx.out / "montecarlo.csv", cols, rows);
  const auto tr = integrate(*c.policy, c.params, c.init, c.params.horizon, c.search.integrator);
  auto s = base_summary(ctx, "montecarlo");
  s["policy"] = policy_to_json(*c.policy);
  s["runs"] = st.runs;
  s["N"] = c.mc.N;
  s["delivery"] = stat_json(st.delivery);
  s["delivered_fraction"] = stat_json(st.delivered_fraction);
  s["unbiased_cost"] = stat_json(st.unbiased_cost);
  s["contacts_per_node"] = stat_json(st.contacts_per_node);
  s["mean_field"] = {{"delivery", delivery_probability(tr, c.params)},
                     {"unbiased_cost", unbiased_cost(tr, c.params)}};
  write_json(ctx.out / "summary.json", s);
  return kOk;
}

json result_json(const experiments::ExperimentResult& r) {
  json j{{"name", r.name}, {"rows", r.rows.size()}, {"columns", r.columns}};
  json sm = json::object();
  for (const auto& [k, v] : r.summary) sm[k] = v;
  j["summary"] = sm;
  return j;
}

int cmd_experiment(const Context& ctx, const std::string& name) {
  namespace ex = experiments;
  const auto& c = ctx.cfg;
  const auto& e = c.experiment;
  ex::ExperimentConfig ec;
  ec.search = c.search;
  ec.mc = c.mc;
  ec.threads = c.search.threads;
  auto s = base_summary(ctx, "experiment");
  s["experiment"] = name;
  std::vector<ex::ExperimentResult> results;
  if (name == "validation") {
    results.push_back(ex::run_validation(c.params, c.init, ec,
                                         e.p_values.value_or(ex::default_validation_p())));
  } else if (name == "heuristic_sweep") {
    results.push_back(ex::run_heuristic_sweep(c.params, c.init, ec,
                                              e.beta_values.value_or(ex::default_beta_sweep())));
  } else if (name == "robustness") {
    const bool clock = e.variable == RobustnessKind::ThetaStar;
    std::vector<double> def;
    if (clock)
      for (int k = 0; k <= 4; ++k) def.push_back(0.025 * k * c.params.horizon);
    else
      def = {0.0, 0.05, 0.1, 0.15};
    results.push_back(ex::run_robustness(
        c.params, c.init, ec,
        clock ? ex::RobustnessVariable::ClockOffset : ex::RobustnessVariable::LevelEstimate,
        e.values.value_or(def)));
  } else if (name == "multi_message") {
    std::vector<std::optional<HeuristicClass>> fams{std::nullopt};
    for (auto h : kAllHeuristics)
      if (h != HeuristicClass::Zero) fams.emplace_back(h);
    if (e.families) fams = *e.families;
    if (fams.empty()) throw ConfigError("experiment.families: empty list");
    json per = json::object();
    for (const auto& f : fams) {
      ex::MultiMessageConfig mm;
      mm.M = e.M;
      mm.upsilon = e.upsilon;
      mm.ttl = e.ttl.value_or(c.params.horizon);
      mm.p = c.params.p;
      mm.family = f;
      results.push_back(ex::run_multi_message(c.params, c.init.S, mm, ec));
      per[ex::family_name(f)] = results.back().summary.at("messages");
    }
    s["messages"] = per;
  } else {
    throw ConfigError("experiment: unknown name '" + name + "'");
  }
  json list = json::array();
  for (auto& r : results) {
    r.seed = c.seed;
    r.config_hash = c.config_hash;
    write_csv(ctx.out / (r.name + ".csv"), r.columns, r.rows);
    list.push_back(result_json(r));
  }
  s["results"] = list;
  write_json(ctx.out / "summary.json", s);
  return kOk;
}

}  // namespace

RunConfig parse_config(const json& doc) {
  try {
    check_keys(doc,
               {"schema_version", "preset", "model", "init", "policy", "search", "montecarlo",
                "stopping", "verify", "experiment", "report_points", "seed"},
               "config");
    if (!doc.contains("schema_version")) throw ConfigError("config: schema_version is required");
    if (doc.at("schema_version").get<int>() != kSchemaVersion)
      throw ConfigError("config: unsupported schema_version");
    RunConfig cfg;
    instances::Instance inst{instances::defaults(), StateVector()};
    if (doc.contains("preset")) inst = preset(doc.at("preset").get<std::string>(), cfg);
    cfg.params = inst.params;
    cfg.init = inst.init;
    if (doc.contains("model")) parse_model(doc.at("model"), cfg.params);
    if (doc.contains("init")) {
      const auto& j = doc.at("init");
      check_keys(j, {"S", "I"}, "init");
      cfg.init = StateVector(numbers(j.at("S"), "init.S"), numbers(j.at("I"), "init.I"));
    }
    if (cfg.init.S.empty()) throw ConfigError("config: init is required for this preset");
    cfg.params.validate();
    cfg.init.validate(cfg.params);
    if (doc.contains("search")) parse_search(doc.at("search"), cfg.search);
    cfg.search.validate();
    if (doc.contains("montecarlo")) parse_mc(doc.at("montecarlo"), cfg.mc, cfg.params);
    if (doc.contains("stopping")) {
      const auto& j = doc.at("stopping");
      check_keys(j, {"coefficient", "exponent"}, "stopping");
      read(j, "coefficient", cfg.stopping.coefficient);
      read(j, "exponent", cfg.stopping.exponent);
      cfg.stopping.validate();
      cfg.has_stopping = true;
    }
    if (doc.contains("verify")) {
      const auto& j = doc.at("verify");
      check_keys(j, {"tol_V", "tol_H", "resolution"}, "verify");
      read(j, "tol_V", cfg.verify.tol_V);
      read(j, "tol_H", cfg.verify.tol_H);
      read(j, "resolution", cfg.verify.resolution);
    }
    if (doc.contains("experiment")) parse_experiment(doc.at("experiment"), cfg.experiment);
    if (doc.contains("policy")) {
      cfg.policy = policy_from_json(doc.at("policy"));
      validate_policy(*cfg.policy, cfg.params);
    }
    read(doc, "report_points", cfg.report_points);
    if (cfg.report_points < 2) throw ConfigError("config: report_points must be at least 2");
    read(doc, "seed", cfg.seed);
    cfg.mc.seed = cfg.seed;
    cfg.mc.validate();
    cfg.config_hash = hash_hex(doc.dump());
    return cfg;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

RunConfig load_config(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read config " + path.string());
  json doc;
  try {
    doc = json::parse(f);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return parse_config(doc);
}

json policy_to_json(const ForwardingPolicy& policy) {
  json j{{"type", std::string(policy_tag(policy))}};
  std::visit(
      [&](const auto& p) {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, policy::Threshold>) {
          j["times"] = p.times;
        } else if constexpr (std::is_same_v<P, policy::StaticEnergy>) {
          j["jump"] = p.jump;
          j["value"] = p.value;
        } else if constexpr (std::is_same_v<P, policy::StaticTime>) {
          j["values"] = p.values;
        } else if constexpr (std::is_same_v<P, policy::ProbabilityThreshold>) {
          j["q"] = p.q;
        } else if constexpr (std::is_same_v<P, policy::InfectionThreshold>) {
          j["c"] = p.c;
        } else if constexpr (std::is_same_v<P, policy::PiecewiseConstant>) {
          json lv = json::array();
          for (const auto& l : p.levels) lv.push_back({{"breaks", l.breaks}, {"values", l.values}});
          j["levels"] = lv;
        }
      },
      policy);
  return j;
}

ForwardingPolicy policy_from_json(const json& j) {
  if (!j.is_object() || !j.contains("type")) throw ConfigError("policy: 'type' is required");
  const auto type = j.at("type").get<std::string>();
  if (type == "threshold") {
    check_keys(j, {"type", "times"}, "policy");
    return policy::Threshold{numbers(j.at("times"), "policy.times")};
  }
  if (type == "static_energy") {
    check_keys(j, {"type", "jump", "value"}, "policy");
    return policy::StaticEnergy{number(j.at("jump"), "policy.jump"),
                                number(j.at("value"), "policy.value")};
  }
  if (type == "static_time") {
    check_keys(j, {"type", "values"}, "policy");
    return policy::StaticTime{numbers(j.at("values"), "policy.values")};
  }
  if (type == "probability_threshold") {
    check_keys(j, {"type", "q"}, "policy");
    return policy::ProbabilityThreshold{number(j.at("q"), "policy.q")};
  }
  if (type == "infection_threshold") {
    check_keys(j, {"type", "c"}, "policy");
    return policy::InfectionThreshold{number(j.at("c"), "policy.c")};
  }
  if (type == "one" || type == "zero") {
    check_keys(j, {"type"}, "policy");
    if (type == "one") return policy::One{};
    return policy::Zero{};
  }
  if (type == "piecewise_constant") {
    check_keys(j, {"type", "levels"}, "policy");
    policy::PiecewiseConstant pc;
    for (const auto& l : j.at("levels")) {
      check_keys(l, {"breaks", "values"}, "policy.levels");
      pc.levels.push_back({numbers(l.at("breaks"), "policy.breaks"),
                           numbers(l.at("values"), "policy.values")});
    }
    return pc;
  }
  throw ConfigError("policy: unknown type '" + type + "'");
}

json report_to_json(const VerificationReport& rep) {
  json crossing = json::array();
  for (const auto& c : rep.crossing) crossing.push_back(c ? json(*c) : json(nullptr));
  std::vector<int> pattern(rep.sign_pattern_ok.begin(), rep.sign_pattern_ok.end());
  return {{"status", rep.status_name()},
          {"lambdaE", rep.lambdaE},
          {"V", rep.V},
          {"tol_V", rep.tol_V},
          {"relevant", rep.relevant},
          {"sign_changes", rep.sign_changes},
          {"sign_pattern_ok", pattern},
          {"crossing", crossing},
          {"min_phi_u", rep.min_phi_u},
          {"H_T", rep.H_T},
          {"H_max_dev", rep.H_max_dev},
          {"terminal_phi", rep.terminal_phi},
          {"h_gap_max", rep.h_gap_max},
          {"psi", rep.psi},
          {"transversality_gap", rep.transversality_gap},
          {"checks",
           {{"violation", rep.ok_V},
            {"sign", rep.ok_sign},
            {"phi_u", rep.ok_phi_u},
            {"hamiltonian", rep.ok_H},
            {"terminal", rep.ok_terminal},
            {"h_gap", rep.ok_h_gap},
            {"order", rep.ok_order},
            {"crossing", rep.ok_crossing},
            {"transversality", rep.ok_transversality}}}};
}

std::string format_number(double v) {
  if (!std::isfinite(v)) throw NumericalError("refusing to emit a non-finite number");
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(const fs::path& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<std::optional<double>>>& rows) {
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  for (std::size_t i = 0; i < columns.size(); ++i) f << (i ? "," : "") << columns[i];
  f << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) f << ',';
      if (row[i]) f << format_number(*row[i]);
    }
    f << '\n';
  }
}

Table read_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot read " + path.string());
  Table t;
  std::string line;
  const auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(s);
    while (std::getline(in, cell, ',')) out.push_back(cell);
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
  };
  if (!std::getline(f, line)) return t;
  t.first = split(line);
  while (std::getline(f, line)) {
    std::vector<std::optional<double>> row;
    for (const auto& c : split(line))
      row.push_back(c.empty() ? std::nullopt : std::optional<double>(std::stod(c)));
    t.second.push_back(std::move(row));
  }
  return t;
}

Table trajectory_table(const ForwardingPolicy& policy, const ModelParams& params,
                       const StateVector& init, int points, const IntegratorOptions& opts) {
  if (points < 2) throw ConfigError("trajectory: need at least two points");
  const int L = params.levels();
  Table t;
  t.first.push_back("t");
  for (int i = 0; i < L; ++i) t.first.push_back("S" + std::to_string(i));
  for (int i = 0; i < L; ++i) t.first.push_back("I" + std::to_string(i));
  t.first.push_back("E");
  for (int i = params.s; i <= params.B; ++i) t.first.push_back("u" + std::to_string(i));
  const auto schedule = compile(policy, params, init, opts);
  const double T = params.horizon;
  for (int k = 0; k < points; ++k) {
    const double time = k + 1 == points ? T : T * k / (points - 1);
    // Each row is its own integration from 0; the last one is the full run.
    const StateVector x =
        k == 0 ? init : integrate(policy, params, init, time, opts).final_state();
    std::vector<std::optional<double>> row{time};
    for (double v : x.S) row.emplace_back(v);
    for (double v : x.I) row.emplace_back(v);
    row.emplace_back(x.E);
    for (double u : schedule.at(time)) row.emplace_back(u);
    t.second.push_back(std::move(row));
  }
  return t;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Energy-aware forwarding in delay tolerant networks"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path, out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool verify = false;
  app.add_option("--config", config_path, "JSON configuration file")->required();
  app.add_option("--seed", seed, "root seed (overrides the config)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--verify", verify, "attach a maximum-principle check to optimizer output");

  std::string heuristic_class, experiment_name;
  auto* simulate = app.add_subcommand("simulate", "integrate the mean-field model for a policy");
  auto* optimize = app.add_subcommand("optimize", "optimal thresholds for the fixed horizon");
  auto* stopping = app.add_subcommand("optimize-stopping", "optimal thresholds and stopping time");
  auto* heuristic = app.add_subcommand("heuristic", "best policy of one heuristic class");
  heuristic->add_option("class", heuristic_class, "class name")->required();
  auto* verify_cmd = app.add_subcommand("verify", "maximum-principle check of a threshold policy");
  auto* montecarlo = app.add_subcommand("montecarlo", "agent-based simulation ensemble");
  auto* experiment = app.add_subcommand("experiment", "scripted study");
  experiment->add_option("name", experiment_name, "experiment name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kConfig;
  }

  try {
    Context ctx;
    ctx.cfg = load_config(config_path);
    if (seed) {
      ctx.cfg.seed = *seed;
      ctx.cfg.mc.seed = *seed;
    }
    if (threads) {
      ctx.cfg.search.threads = *threads;
      ctx.cfg.mc.threads = *threads;
    }
    ctx.out = out_dir;
    ctx.verify = verify;
    ctx.log = &err;
    fs::create_directories(ctx.out);
    int code = kOk;
    if (*simulate) code = cmd_simulate(ctx);
    else if (*optimize) code = cmd_optimize(ctx);
    else if (*stopping) code = cmd_optimize_stopping(ctx);
    else if (*heuristic) code = cmd_heuristic(ctx, heuristic_class);
    else if (*verify_cmd) code = cmd_verify(ctx);
    else if (*montecarlo) code = cmd_montecarlo(ctx);
    else if (*experiment) code = cmd_experiment(ctx, experiment_name);
    if (code == kOk) out << "wrote " << (ctx.out / "summary.json").string() << '\n';
    return code;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const InfeasibleError& e) {
    err << "infeasible: " << e.what() << '\n';
    return kInfeasible;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kInternal;
  }
}

}  // namespace dtn::cli
