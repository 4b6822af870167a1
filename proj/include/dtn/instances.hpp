#pragma once

// Named parameter sets used by experiments, tests and the CLI presets.

#include <utility>
#include <vector>

#include "dtn/model.hpp"

namespace dtn::instances {

struct Instance {
  ModelParams params;
  StateVector init;
};

inline Instance make(ModelParams params, std::vector<double> S, std::vector<double> I) {
  return {std::move(params), StateVector(std::move(S), std::move(I), 0.0)};
}

inline const std::vector<double> kDefaultS{0, 0, 0, 0.3, 0.3, 0.35};

inline ModelParams defaults(double alpha = 2.0) {
  ModelParams p;
  p.B = 5;
  p.s = 2;
  p.r = 1;
  p.beta = 2.0;
  p.beta0 = 2.0;
  p.horizon = 10.0;
  p.p = 0.9;
  p.penalties = ModelParams::power_penalties(5, alpha);
  return p;
}

inline Instance table1(double alpha) {
  return make(defaults(alpha), {0, 0, 0, 0.3, 0.3, 0.3}, {0, 0, 0, 0, 0, 0.1});
}

inline Instance fig1a() {
  return make(defaults(2.0), {0, 0, 0, 0.55, 0.3, 0.1}, {0, 0, 0, 0, 0, 0.05});
}

inline Instance fig1b() {
  auto p = defaults(2.0);
  p.penalties = {4.4, 4.2, 4.0, 1.2, 1.1, 1.0};
  return make(p, {0, 0, 0, 0.55, 0.3, 0.1}, {0, 0, 0, 0, 0.025, 0.025});
}

/// Exponential-contact validation setup (N = 160 in the simulator).
inline Instance validation_exponential(double p_mandated) {
  auto p = defaults(2.0);
  p.horizon = 5.0;
  p.p = p_mandated;
  return make(p, kDefaultS, {0, 0, 0, 0.0125, 0.0125, 0.025});
}

/// Power-law validation setup (N = 41 in the simulator).
inline Instance validation_powerlaw(double p_mandated) {
  auto p = defaults(2.0);
  p.beta = 4.46;
  p.beta0 = 4.46;
  p.horizon = 5.0;
  p.p = p_mandated;
  return make(p, kDefaultS, {0, 0, 0, 0, 0.025, 0.025});
}

inline Instance heuristic_sweep(double beta, double horizon) {
  auto p = defaults(2.0);
  p.beta = beta;
  p.beta0 = beta;
  p.horizon = horizon;
  p.p = 0.9;
  return make(p, kDefaultS, {0, 0, 0.0125, 0.0125, 0.0125, 0.0125});
}

inline Instance robustness() {
  auto p = defaults(2.0);
  p.horizon = 5.0;
  p.p = 0.75;
  return make(p, kDefaultS, {0, 0, 0, 0.0125, 0.0125, 0.025});
}

}  // namespace dtn::instances
