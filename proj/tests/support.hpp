#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "edgeoff/scenario_io.hpp"
#include "edgeoff/sim.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return EDGEOFF_SOURCE_DIR; }
inline std::filesystem::path scenario_path(const std::string& name) {
  return source_dir() / "scenarios" / (name + ".json");
}

using Rows = std::vector<std::vector<double>>;

inline std::vector<double> uniform(std::size_t k) { return std::vector<double>(k, 1.0 / double(k)); }

/// Small i.i.d. scenario built in code: N devices with 2 power, 2 cycle and
/// 3 gain levels.
inline edgeoff::Scenario small_scenario(std::size_t N = 2, double task_probability = 0.7) {
  using namespace edgeoff;
  Scenario s;
  s.name = "small";
  std::vector<DeviceGrid> grids;
  for (std::size_t n = 0; n < N; ++n) {
    DeviceGrid g;
    g.power = {0.1, 0.3};
    g.cycles = {0.4, 0.6};
    g.gain = {0.0, 0.1, 0.3};
    grids.push_back(g);
  }
  s.table = StateTable(grids);
  for (std::size_t n = 0; n < N; ++n) {
    DeviceProcessSpec d;
    d.power.probs = {0.5, 0.5};
    d.cycles.probs = {0.6, 0.4};
    d.gain.probs = {0.3, 0.4, 0.3};
    d.arrivals.kind = ArrivalSpec::Kind::bernoulli;
    d.arrivals.probability = task_probability;
    s.processes.devices.push_back(d);
  }
  s.budgets.power.assign(N, 0.08);
  s.budgets.cloudlet = 0.5;
  s.gain.risk_aversion.assign(N, 0.5);
  s.schedule.a = 0.2;
  s.validate();
  return s;
}

/// Random task-only instance for oracle cross-checks.
struct RandomInstance {
  edgeoff::OffloadProblem problem;
  edgeoff::Marginals dist;
};

inline RandomInstance random_instance(std::mt19937_64& rng, std::size_t N, std::size_t K) {
  using namespace edgeoff;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LocalStates> states;
  RandomInstance inst;
  ResourceBudgets b;
  for (std::size_t n = 0; n < N; ++n) {
    std::vector<double> o(K), h(K), w(K), rho(K);
    double sum = 0.0;
    for (std::size_t j = 0; j < K; ++j) {
      o[j] = 0.05 + u(rng);
      h[j] = 0.05 + u(rng);
      w[j] = u(rng);
      rho[j] = 0.05 + u(rng);
      sum += rho[j];
    }
    for (double& r : rho) r /= sum;
    states.push_back(LocalStates::tasks(o, h, w));
    inst.dist.push_back(rho);
    b.power.push_back(0.05 + 0.6 * u(rng));
  }
  b.cloudlet = 0.05 + 0.4 * double(N) * u(rng);
  inst.problem = make_problem(states, b, ConstraintVariant::standard);
  return inst;
}

}  // namespace testing
