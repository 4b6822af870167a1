#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dtn/error.hpp"
#include "dtn/instances.hpp"
#include "dtn/model.hpp"
#include "dtn/policy.hpp"

using namespace dtn;

namespace {

ModelParams b2_params() {
  ModelParams p;
  p.B = 2;
  p.s = 2;
  p.r = 1;
  p.beta = 2.0;
  p.beta0 = 2.0;
  p.penalties = {4, 1, 0};
  return p;
}

StateVector random_state(std::mt19937_64& rng, int B) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::vector<double> S(B + 1), I(B + 1);
  double tot = 0.0;
  for (int i = 0; i <= B; ++i) tot += (S[i] = U(rng)) + (I[i] = U(rng));
  for (int i = 0; i <= B; ++i) {
    S[i] /= tot;
    I[i] /= tot;
  }
  return StateVector(S, I, 0.0);
}

double sum(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s;
}

}  // namespace

TEST_CASE("rhs hand-evaluated B=2 example") {
  const auto p = b2_params();
  const StateVector st({0, 0.5, 0.3}, {0, 0, 0.2});
  const std::vector<double> u{1.0};
  const auto d = ode_rhs(st, u, p);
  const double eS[] = {0, -0.2, -0.12}, eI[] = {0.52, 0.12, -0.32};
  for (int i = 0; i < 3; ++i) {
    CHECK(d.dS[i] == doctest::Approx(eS[i]).epsilon(1e-14));
    CHECK(d.dI[i] == doctest::Approx(eI[i]).epsilon(1e-14));
  }
  CHECK(d.dE == doctest::Approx(0.2));
  CHECK(std::abs(sum(d.dS) + sum(d.dI)) < 1e-15);
}

TEST_CASE("rhs trivial cases") {
  std::mt19937_64 rng(7);
  const auto p = instances::defaults();
  for (int k = 0; k < 20; ++k) {
    auto st = random_state(rng, p.B);
    const auto d0 = ode_rhs(st, std::vector<double>(4, 0.0), p);
    for (int i = 0; i <= p.B; ++i) {
      CHECK(d0.dS[i] == 0.0);
      CHECK(d0.dI[i] == 0.0);
    }
    CHECK(d0.dE == doctest::Approx(st.transmitting_infectives(p.s)));

    std::fill(st.I.begin(), st.I.end(), 0.0);
    const auto d1 = ode_rhs(st, std::vector<double>(4, 0.7), p);
    for (int i = 0; i <= p.B; ++i) {
      CHECK(d1.dS[i] == 0.0);
      CHECK(d1.dI[i] == 0.0);
    }
    CHECK(d1.dE == 0.0);
  }
}

TEST_CASE("rhs zero-sum on random instances") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  std::uniform_int_distribution<int> Bd(1, 8);
  double worst = 0.0;
  for (int k = 0; k < 1000; ++k) {
    ModelParams p;
    p.B = Bd(rng);
    p.s = std::uniform_int_distribution<int>(1, p.B)(rng);
    p.r = std::uniform_int_distribution<int>(1, p.s)(rng);
    p.beta = 0.1 + 5 * U(rng);
    p.penalties = ModelParams::power_penalties(p.B, 1.0);
    const auto st = random_state(rng, p.B);
    std::vector<double> u(p.num_controls());
    for (auto& v : u) v = U(rng);
    const auto d = ode_rhs(st, u, p);
    worst = std::max(worst, std::abs(sum(d.dS) + sum(d.dI)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("rhs rejects bad input") {
  const auto p = b2_params();
  const StateVector st({0, 0.5, 0.3}, {0, 0, 0.2});
  CHECK_THROWS_AS(ode_rhs(st, std::vector<double>{1.0, 1.0}, p), ConfigError);
  auto bad = p;
  bad.r = 3;
  CHECK_THROWS_AS(ode_rhs(st, std::vector<double>{1.0}, bad), ConfigError);
  bad = p;
  bad.penalties = {1, 1, 0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero policy keeps the state constant") {
  const auto inst = instances::fig1a();
  const auto traj = integrate(policy::Zero{}, inst.params, inst.init, 10.0);
  for (const auto& st : traj.states) {
    for (int i = 0; i <= 5; ++i) {
      CHECK(st.S[i] == inst.init.S[i]);
      CHECK(st.I[i] == inst.init.I[i]);
    }
  }
  CHECK(traj.final_state().E == doctest::Approx(10.0 * 0.05).epsilon(1e-12));
}

TEST_CASE("all-ones aggregate strictly decreasing on the fig1a instance") {
  const auto inst = instances::fig1a();
  const auto traj = integrate(policy::One{}, inst.params, inst.init, 10.0);
  const auto& p = inst.params;
  bool strict = true;
  for (std::size_t k = 1; k < traj.states.size(); ++k) {
    const auto& a = traj.states[k - 1];
    const auto& b = traj.states[k];
    const double fa = a.transmitting_infectives(p.s) + a.receptive_susceptibles(p.r);
    const double fb = b.transmitting_infectives(p.s) + b.receptive_susceptibles(p.r);
    if (!(fb < fa)) strict = false;
  }
  CHECK(strict);
  const auto rep = check_admissibility(traj, p);
  CHECK(rep.admissible());
  CHECK(rep.max_normalization_error <= 1e-9);
  CHECK(rep.s_nonincreasing);
  CHECK(rep.exposure_nondecreasing);
}

TEST_CASE("grid contains every breakpoint and step halving converges") {
  const auto inst = instances::fig1a();
  const ForwardingPolicy pol = policy::Threshold{{1.3, 2.71, 4.05, 6.6}};
  IntegratorOptions o1, o2;
  o2.steps = 2 * o1.steps;
  const auto t1 = integrate(pol, inst.params, inst.init, 10.0, o1);
  const auto t2 = integrate(pol, inst.params, inst.init, 10.0, o2);
  for (double b : {1.3, 2.71, 4.05, 6.6})
    CHECK(std::find(t1.times.begin(), t1.times.end(), b) != t1.times.end());
  const auto& a = t1.final_state();
  const auto& b = t2.final_state();
  double drift = std::abs(a.E - b.E);
  for (int i = 0; i <= 5; ++i)
    drift = std::max({drift, std::abs(a.S[i] - b.S[i]), std::abs(a.I[i] - b.I[i])});
  CHECK(drift <= 1e-6);
  CHECK(std::is_sorted(t1.times.begin(), t1.times.end()));
}

TEST_CASE("integration is bitwise deterministic") {
  const auto inst = instances::fig1b();
  const ForwardingPolicy pol = policy::Threshold{{3.0, 1.0, 5.5, 7.25}};
  const auto a = integrate(pol, inst.params, inst.init, 10.0);
  const auto b = integrate(pol, inst.params, inst.init, 10.0);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    CHECK(a.states[k].S == b.states[k].S);
    CHECK(a.states[k].I == b.states[k].I);
    CHECK(a.states[k].E == b.states[k].E);
  }
}

TEST_CASE("integrate validates inputs") {
  const auto inst = instances::fig1a();
  auto bad = inst.init;
  bad.S[3] += 0.1;
  CHECK_THROWS_AS(integrate(policy::One{}, inst.params, bad, 10.0), ConfigError);
  CHECK_THROWS_AS(integrate(policy::One{}, inst.params, inst.init, -1.0), ConfigError);
}

TEST_CASE("integrate_terminal matches integrate") {
  const auto inst = instances::fig1a();
  const ForwardingPolicy pol = policy::Threshold{{2, 4, 6, 8}};
  const auto sch = compile(pol, inst.params, inst.init);
  const auto full = integrate(sch, inst.params, inst.init, 10.0);
  const auto term = integrate_terminal(sch, inst.params, inst.init, 10.0, 2000);
  CHECK(term.E == full.final_state().E);
  CHECK(term.S == full.final_state().S);
}
