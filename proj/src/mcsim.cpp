#include "dtn/mcsim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <random>

#include "dtn/error.hpp"
#include "dtn/parallel.hpp"

namespace dtn::mc {

namespace {

// Uniform doubles built from raw mt19937_64 output, so streams are identical
// across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  /// Uniform on the open interval (0, 1).
  double uniform() { return (static_cast<double>(g_() >> 11) + 0.5) * 0x1.0p-53; }
  double exponential(double rate) { return -std::log(uniform()) / rate; }
  int index(int n) { return std::min(n - 1, static_cast<int>(uniform() * n)); }

 private:
  std::mt19937_64 g_;
};

struct Node {
  int energy = 0;
  bool infective = false;
  double offset = 0.0;
};

// Length-biased inter-contact draw: density proportional to t^-alpha.
double sample_length_biased(double alpha, double t_min, double t_max, double u) {
  const double e = 1.0 - alpha;
  if (std::abs(e) < 1e-12) return t_min * std::pow(t_max / t_min, u);
  const double a = std::pow(t_min, e), b = std::pow(t_max, e);
  return std::pow(a + u * (b - a), 1.0 / e);
}

class Simulation {
 public:
  Simulation(const std::vector<double>& thresholds, const ModelParams& params,
             const StateVector& init, const MCConfig& cfg, std::uint64_t run_seed)
      : th_(thresholds),
        p_(params),
        cfg_(cfg),
        contact_rng_(derive_seed(run_seed, 0)),
        error_rng_(derive_seed(run_seed, 1)) {
    const int L = p_.levels();
    std::vector<int> counts;
    if (cfg.assignment == InitialAssignment::DeterministicRounding) {
      counts = round_assignment(init, cfg.N);
    } else {
      Rng rng(derive_seed(run_seed, 2));
      std::vector<double> cum(2 * L);
      double acc = 0.0;
      for (int c = 0; c < 2 * L; ++c) cum[c] = acc += (c < L ? init.S[c] : init.I[c - L]);
      counts.assign(2 * L, 0);
      for (int n = 0; n < cfg.N; ++n) {
        const double u = rng.uniform() * acc;
        const auto c = std::upper_bound(cum.begin(), cum.end(), u) - cum.begin();
        ++counts[std::min<std::ptrdiff_t>(c, 2 * L - 1)];
      }
    }
    for (int c = 0; c < 2 * L; ++c)
      for (int k = 0; k < counts[c]; ++k) nodes_.push_back(Node{c % L, c >= L, 0.0});
    if (cfg.theta_star > 0.0)
      for (auto& n : nodes_) n.offset = cfg.theta_star * (2.0 * error_rng_.uniform() - 1.0);
    for (const auto& n : nodes_)
      if (n.infective && n.energy >= p_.s) ++transmitters_;
    out_.unbiased_cost = -cost();
    const double T = p_.horizon;
    grid_.resize(cfg.report_points);
    for (int k = 0; k < cfg.report_points; ++k)
      grid_[k] = k + 1 == cfg.report_points ? T : T * k / (cfg.report_points - 1);
  }

  MCOutcome run() {
    if (std::holds_alternative<ExponentialContacts>(cfg_.contact))
      run_exponential();
    else
      run_power_law(std::get<TruncatedPowerLaw>(cfg_.contact));
    advance(p_.horizon);
    record_until(p_.horizon, true);
    const int L = p_.levels();
    out_.S_count.assign(L, 0);
    out_.I_count.assign(L, 0);
    for (const auto& n : nodes_) ++(n.infective ? out_.I_count : out_.S_count)[n.energy];
    out_.unbiased_cost += cost();
    out_.contacts_per_node = 2.0 * static_cast<double>(contacts_) / cfg_.N;
    out_.delivery_probability = -std::expm1(-p_.beta0 / cfg_.N * exposure_);
    return std::move(out_);
  }

 private:
  double cost() const {
    double c = 0.0;
    for (const auto& n : nodes_) c += p_.penalties[n.energy];
    return c / cfg_.N;
  }

  // Moves the clock to t, accumulating the transmitter count integral.
  void advance(double t) {
    exposure_ += transmitters_ * (t - now_);
    now_ = t;
  }

  void record_until(double t, bool inclusive) {
    const int L = p_.levels();
    while (next_grid_ < grid_.size() &&
           (grid_[next_grid_] < t || (inclusive && grid_[next_grid_] <= t))) {
      std::vector<double> S(L, 0.0), I(L, 0.0);
      for (const auto& n : nodes_) (n.infective ? I : S)[n.energy] += 1.0 / cfg_.N;
      out_.curve_S.push_back(std::move(S));
      out_.curve_I.push_back(std::move(I));
      ++next_grid_;
    }
  }

  int estimated_level(int energy) {
    if (cfg_.p_star <= 0.0) return energy;
    const double u = error_rng_.uniform();
    int est = energy;
    if (u < cfg_.p_star)
      est -= 1;
    else if (u < 2.0 * cfg_.p_star)
      est += 1;
    return std::clamp(est, 0, p_.B);
  }

  void pair_contact(int a, int b, double t) {
    ++contacts_;
    Node& x = nodes_[a];
    Node& y = nodes_[b];
    if (x.infective == y.infective) return;
    Node& tx = x.infective ? x : y;
    Node& rx = x.infective ? y : x;
    const int est = estimated_level(tx.energy);
    if (est < p_.s) return;
    if (!(t + tx.offset < th_[est - p_.s])) return;
    if (tx.energy < p_.s || rx.energy < p_.r) return;
    tx.energy -= p_.s;
    if (tx.energy < p_.s) --transmitters_;
    rx.energy -= p_.r;
    rx.infective = true;
    if (rx.energy >= p_.s) ++transmitters_;
  }

  void destination_contact(int a, double t) {
    const Node& n = nodes_[a];
    if (!out_.delivered && n.infective && n.energy >= p_.s) {
      out_.delivered = true;
      out_.delivery_time = t;
    }
  }

  void event_at(double t) {
    advance(t);
    record_until(t, false);
  }

  void run_exponential() {
    const int N = cfg_.N;
    const double pair_rate = 0.5 * (N - 1) * p_.beta;  // N(N-1)/2 pairs at beta/N
    const double dest_rate = p_.beta0;                 // N nodes at beta0/N
    const double total = pair_rate + dest_rate;
    double t = 0.0;
    for (;;) {
      t += contact_rng_.exponential(total);
      if (t > p_.horizon) break;
      event_at(t);
      if (contact_rng_.uniform() * total < pair_rate) {
        const int a = contact_rng_.index(N);
        int b = contact_rng_.index(N - 1);
        if (b >= a) ++b;
        pair_contact(a, b, t);
      } else {
        destination_contact(contact_rng_.index(N), t);
      }
    }
  }

  void run_power_law(const TruncatedPowerLaw& law) {
    const int N = cfg_.N;
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < N; ++a)
      for (int b = a + 1; b < N; ++b) {
        // Stationary start: residual of a length-biased interval.
        const double len =
            sample_length_biased(law.alpha, law.t_min, law.t_max, contact_rng_.uniform());
        queue.emplace(contact_rng_.uniform() * len, static_cast<int>(pairs.size()));
        pairs.emplace_back(a, b);
      }
    double next_dest = contact_rng_.exponential(p_.beta0);
    for (;;) {
      const double tp = queue.top().first;
      if (next_dest < tp) {
        if (next_dest > p_.horizon) break;
        event_at(next_dest);
        destination_contact(contact_rng_.index(N), next_dest);
        next_dest += contact_rng_.exponential(p_.beta0);
        continue;
      }
      if (tp > p_.horizon) break;
      const int k = queue.top().second;
      queue.pop();
      event_at(tp);
      pair_contact(pairs[k].first, pairs[k].second, tp);
      queue.emplace(
          tp + sample_truncated_pareto(law.alpha, law.t_min, law.t_max, contact_rng_.uniform()), k);
    }
  }

  const std::vector<double>& th_;
  const ModelParams& p_;
  const MCConfig& cfg_;
  Rng contact_rng_, error_rng_;
  std::vector<Node> nodes_;
  std::vector<double> grid_;
  std::size_t next_grid_ = 0;
  int transmitters_ = 0;
  long contacts_ = 0;
  double now_ = 0.0, exposure_ = 0.0;
  MCOutcome out_;
};

Stat summarize(const std::vector<double>& v) {
  Stat s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

}  // namespace

void MCConfig::validate() const {
  if (N < 2) throw ConfigError("montecarlo: N must be >= 2");
  if (runs < 1) throw ConfigError("montecarlo: runs must be >= 1");
  if (!(theta_star >= 0.0) || !std::isfinite(theta_star))
    throw ConfigError("montecarlo: theta_star must be finite and >= 0");
  if (!(p_star >= 0.0 && p_star <= 0.5)) throw ConfigError("montecarlo: p_star must lie in [0, 0.5]");
  if (report_points < 2) throw ConfigError("montecarlo: report_points must be >= 2");
  if (threads < 1) throw ConfigError("montecarlo: threads must be >= 1");
  if (const auto* pl = std::get_if<TruncatedPowerLaw>(&contact)) {
    if (!(pl->alpha > 0.0) || !std::isfinite(pl->alpha))
      throw ConfigError("montecarlo: power-law alpha must be > 0");
    if (!(pl->t_min > 0.0 && pl->t_min < pl->t_max) || !std::isfinite(pl->t_max))
      throw ConfigError("montecarlo: need 0 < t_min < t_max");
  }
}

std::vector<double> node_thresholds(const ForwardingPolicy& policy, const ModelParams& params) {
  const auto n = static_cast<std::size_t>(params.num_controls());
  if (const auto* t = std::get_if<policy::Threshold>(&policy)) {
    validate_policy(policy, params);
    return t->times;
  }
  if (std::holds_alternative<policy::One>(policy)) return std::vector<double>(n, params.horizon);
  if (std::holds_alternative<policy::Zero>(policy)) return std::vector<double>(n, 0.0);
  throw ConfigError("montecarlo: nodes run threshold-form policies only");
}

double sample_truncated_pareto(double alpha, double t_min, double t_max, double u) {
  if (!(alpha > 0.0) || !(t_min > 0.0 && t_min < t_max))
    throw ConfigError("truncated Pareto: need alpha > 0 and 0 < t_min < t_max");
  if (!(u > 0.0 && u < 1.0)) throw ConfigError("truncated Pareto: draw must lie in (0,1)");
  const double tail = std::pow(t_min / t_max, alpha);
  return std::min(t_max, t_min * std::pow(1.0 - u * (1.0 - tail), -1.0 / alpha));
}

double truncated_pareto_mean(double alpha, double t_min, double t_max) {
  const double norm = 1.0 - std::pow(t_min / t_max, alpha);
  const double scale = alpha * std::pow(t_min, alpha) / norm;
  if (std::abs(alpha - 1.0) < 1e-12) return scale * std::log(t_max / t_min);
  return scale * (std::pow(t_max, 1.0 - alpha) - std::pow(t_min, 1.0 - alpha)) / (1.0 - alpha);
}

TruncatedPowerLaw match_pair_rate(const TruncatedPowerLaw& law, int N, double beta) {
  if (!(beta > 0.0) || N < 2) throw ConfigError("power law: need beta > 0 and N >= 2");
  // The mean scales linearly with the cutoffs at fixed shape.
  const double k = (N / beta) / truncated_pareto_mean(law.alpha, law.t_min, law.t_max);
  return TruncatedPowerLaw{law.alpha, law.t_min * k, law.t_max * k};
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t index) {
  std::uint64_t z = root + (index + 1) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<int> round_assignment(const StateVector& init, int N) {
  std::vector<double> w(init.S);
  w.insert(w.end(), init.I.begin(), init.I.end());
  const double tot = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<int> counts(w.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int assigned = 0;
  for (std::size_t c = 0; c < w.size(); ++c) {
    const double x = N * w[c] / tot;
    counts[c] = static_cast<int>(std::floor(x));
    assigned += counts[c];
    rem.emplace_back(x - counts[c], c);
  }
  std::stable_sort(rem.begin(), rem.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (int k = 0; k < N - assigned; ++k) ++counts[rem[static_cast<std::size_t>(k)].second];
  return counts;
}

MCOutcome run_once(const ForwardingPolicy& policy, const ModelParams& params,
                   const StateVector& init, const MCConfig& cfg, std::uint64_t run_seed) {
  params.validate();
  init.validate(params);
  cfg.validate();
  const auto th = node_thresholds(policy, params);
  return Simulation(th, params, init, cfg, run_seed).run();
}

EnsembleStats run_ensemble(const ForwardingPolicy& policy, const ModelParams& params,
                           const StateVector& init, const MCConfig& cfg) {
  params.validate();
  init.validate(params);
  cfg.validate();
  const auto th = node_thresholds(policy, params);
  std::vector<MCOutcome> outs(static_cast<std::size_t>(cfg.runs));
  parallel_for(outs.size(), cfg.threads, [&](std::size_t k) {
    outs[k] = Simulation(th, params, init, cfg, derive_seed(cfg.seed, k)).run();
  });

  EnsembleStats st;
  st.runs = cfg.runs;
  auto collect = [&](auto field) {
    std::vector<double> v;
    v.reserve(outs.size());
    for (const auto& o : outs) v.push_back(field(o));
    return summarize(v);
  };
  st.delivery = collect([](const MCOutcome& o) { return o.delivery_probability; });
  st.delivered_fraction = collect([](const MCOutcome& o) { return o.delivered ? 1.0 : 0.0; });
  st.unbiased_cost = collect([](const MCOutcome& o) { return o.unbiased_cost; });
  st.contacts_per_node = collect([](const MCOutcome& o) { return o.contacts_per_node; });

  const int G = cfg.report_points, L = params.levels();
  for (int k = 0; k < G; ++k)
    st.grid.push_back(k + 1 == G ? params.horizon : params.horizon * k / (G - 1));
  auto curves = [&](bool infective, std::vector<std::vector<double>>& mean,
                    std::vector<std::vector<double>>& sd) {
    mean.assign(G, std::vector<double>(L, 0.0));
    sd.assign(G, std::vector<double>(L, 0.0));
    for (int k = 0; k < G; ++k)
      for (int i = 0; i < L; ++i) {
        std::vector<double> v;
        for (const auto& o : outs) v.push_back((infective ? o.curve_I : o.curve_S)[k][i]);
        const auto s = summarize(v);
        mean[k][i] = s.mean;
        sd[k][i] = s.std.value_or(0.0);
      }
  };
  curves(false, st.mean_S, st.std_S);
  curves(true, st.mean_I, st.std_I);
  return st;
}

}  // namespace dtn::mc
