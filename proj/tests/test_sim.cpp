#include <doctest.h>

#include <sstream>

#include "edgeoff/sim.hpp"
#include "support.hpp"

using namespace edgeoff;

namespace {

bool same(const Trajectory& a, const Trajectory& b) {
  return a.slots == b.slots && a.state == b.state && a.offloaded == b.offloaded && a.served == b.served &&
         a.phi == b.phi && a.d_local == b.d_local && a.power == b.power && a.cycles == b.cycles &&
         a.delay == b.delay && a.duals == b.duals;
}

}  // namespace

TEST_CASE("zero slots give an empty trajectory") {
  const auto s = testing::small_scenario();
  const auto tr = run_episode(s, s.default_policy(PolicyKind::onalgo), 0, 1);
  CHECK(tr.slots == 0);
  CHECK(tr.state.empty());
  CHECK_THROWS_AS(metrics_summary(tr, s), ModelError);
}

TEST_CASE("without tasks nothing is offloaded and multipliers stay at zero") {
  const auto s = testing::small_scenario(3, 0.0);
  for (auto kind : {PolicyKind::onalgo, PolicyKind::ato, PolicyKind::rco, PolicyKind::ocos}) {
    const auto tr = run_episode(s, s.default_policy(kind), 500, 2);
    for (auto o : tr.offloaded) CHECK(o == 0);
    for (double x : tr.duals) CHECK(x == 0.0);
    const auto m = metrics_summary(tr, s);
    CHECK(m.tasks == 0);
    CHECK(m.mean_power == 0.0);
  }
}

TEST_CASE("identical seeds give bitwise-identical trajectories") {
  const auto s = testing::small_scenario(3, 0.8);
  for (auto kind : {PolicyKind::onalgo, PolicyKind::ato, PolicyKind::rco, PolicyKind::ocos}) {
    const auto a = run_episode(s, s.default_policy(kind), 2000, 7);
    const auto b = run_episode(s, s.default_policy(kind), 2000, 7);
    CHECK(same(a, b));
  }
  const auto c = run_episode(s, s.default_policy(PolicyKind::onalgo), 2000, 8);
  CHECK_FALSE(same(run_episode(s, s.default_policy(PolicyKind::onalgo), 2000, 7), c));
}

TEST_CASE("trajectory invariants hold for every policy") {
  const auto s = testing::small_scenario(3, 0.9);
  const auto states = s.table.flatten();
  for (auto kind : {PolicyKind::onalgo, PolicyKind::ato, PolicyKind::rco, PolicyKind::ocos}) {
    const auto tr = run_episode(s, s.default_policy(kind), 3000, 5);
    double energy = 0.0, expected_energy = 0.0;
    for (std::uint64_t t = 1; t <= tr.slots; ++t) {
      double served = 0.0;
      for (std::size_t n = 0; n < tr.num_devices; ++n) {
        const auto i = tr.at(t, n);
        CHECK(tr.served[i] <= tr.offloaded[i]);
        if (tr.state[i] == 0) CHECK(tr.offloaded[i] == 0);
        if (tr.served[i]) served += tr.cycles[i];
        energy += tr.power[i];
        if (tr.offloaded[i]) expected_energy += states[n].power[tr.state[i]] * s.slot_seconds;
      }
      CHECK(served <= s.budgets.cloudlet + 1e-12);
    }
    CHECK(energy == doctest::Approx(expected_energy));
  }
}

TEST_CASE("OCOS offloads every task and RCO respects the budget") {
  const auto s = testing::small_scenario(2, 0.9);
  const auto ocos = run_episode(s, s.default_policy(PolicyKind::ocos), 1000, 3);
  for (std::size_t i = 0; i < ocos.state.size(); ++i) CHECK(ocos.offloaded[i] == (ocos.state[i] != 0));
  const auto rco = metrics_summary(run_episode(s, s.default_policy(PolicyKind::rco), 5000, 3), s);
  for (std::size_t n = 0; n < 2; ++n) CHECK(rco.device_power[n] <= s.budgets.power[n] + 1e-12);
}

TEST_CASE("summary equals a direct recomputation") {
  const auto s = testing::small_scenario(3, 0.8);
  const auto tr = run_episode(s, s.default_policy(PolicyKind::onalgo), 4000, 11);
  const auto m = metrics_summary(tr, s);
  double acc = 0.0, tasks = 0.0, offl = 0.0, load = 0.0;
  std::vector<double> power(3, 0.0);
  for (std::size_t i = 0; i < tr.state.size(); ++i) {
    const std::size_t n = i % 3;
    power[n] += tr.power[i];
    if (tr.served[i]) load += tr.cycles[i];
    if (tr.state[i] == 0) continue;
    tasks += 1;
    offl += tr.offloaded[i];
    acc += tr.d_local[i] + (tr.served[i] ? tr.phi[i] : 0.0);
  }
  CHECK(m.tasks == static_cast<std::uint64_t>(tasks));
  CHECK(m.accuracy == doctest::Approx(acc / tasks));
  CHECK(m.offload_fraction == doctest::Approx(offl / tasks));
  CHECK(m.cloud_load == doctest::Approx(load / 4000.0));
  for (std::size_t n = 0; n < 3; ++n) CHECK(m.device_power[n] == doctest::Approx(power[n] / 4000.0));
  CHECK((m.accuracy >= 0.0 && m.accuracy <= 1.0));
  CHECK((m.offload_fraction >= 0.0 && m.offload_fraction <= 1.0));
  CHECK((m.served_fraction >= 0.0 && m.served_fraction <= 1.0));
}

TEST_CASE("summary of hand-built trajectories") {
  const auto s = testing::small_scenario(1, 1.0);
  Trajectory tr;
  tr.num_devices = 1;
  tr.slots = 2;
  tr.state = {1, 2};
  tr.phi = {0.1, 0.1};
  tr.d_local = {0.7, 0.8};
  tr.cycles = {0.4, 0.4};
  tr.delay = {0.0, 0.0};

  tr.offloaded = {0, 0};
  tr.served = {0, 0};
  tr.power = {0.0, 0.0};
  auto m = metrics_summary(tr, s);
  CHECK(m.accuracy == doctest::Approx(0.75));
  CHECK(m.mean_power == 0.0);

  tr.offloaded = {1, 1};
  tr.served = {1, 1};
  tr.power = {0.1, 0.3};
  m = metrics_summary(tr, s);
  CHECK(m.accuracy == doctest::Approx(0.85));
  CHECK(m.mean_power == doctest::Approx(0.2));
}

TEST_CASE("an ATO threshold of zero never offloads") {
  const auto s = testing::small_scenario(2, 0.8);
  auto p = s.default_policy(PolicyKind::ato);
  p.ato_threshold = 0.0;
  const auto tr = run_episode(s, p, 1000, 1);
  const auto m = metrics_summary(tr, s);
  CHECK(m.offload_fraction == 0.0);
  CHECK(m.accuracy == doctest::Approx(m.local_accuracy));
}

TEST_CASE("token bucket gate bounds the served load") {
  auto s = testing::small_scenario(3, 0.9);
  s.gate.kind = CapacityGate::Kind::token_bucket;
  s.gate.depth = 1.0;
  s.validate();
  const auto tr = run_episode(s, s.default_policy(PolicyKind::ocos), 2000, 4);
  double served = 0.0;
  for (std::uint64_t t = 1; t <= tr.slots; ++t) {
    double slot = 0.0;
    for (std::size_t n = 0; n < 3; ++n)
      if (tr.served[tr.at(t, n)]) slot += tr.cycles[tr.at(t, n)];
    CHECK(slot <= s.gate.depth + 1e-12);
    served += slot;
    CHECK(served <= s.budgets.cloudlet * double(t) + 1e-9);
  }
  s.gate.depth = 0.1;
  CHECK_THROWS_AS(s.validate(), ModelError);
}

TEST_CASE("realized multiplier updates stay non-negative") {
  const auto s = testing::small_scenario(2, 0.8);
  auto p = s.default_policy(PolicyKind::onalgo);
  p.dual_update = DualUpdateMode::realized;
  const auto tr = run_episode(s, p, 2000, 6);
  for (double x : tr.duals) CHECK(x >= 0.0);
  CHECK_FALSE(bound_report_applies(s, p));
}

TEST_CASE("trajectory CSV layout") {
  const auto s = testing::small_scenario(2, 0.8);
  const auto tr = run_episode(s, s.default_policy(PolicyKind::onalgo), 5, 1);
  std::ostringstream out;
  write_trajectory_csv(out, tr, s);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "slot,device,o,h,w,offloaded,served,gain,power");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 10);
}

TEST_CASE("delay-aware rule prices in the delay") {
  auto s = testing::small_scenario(1, 1.0);
  s.rule = RuleVariant::delay_aware;
  s.delay.zeta = 0.2;
  const auto model = ScenarioModel::build(s);
  const auto base = ScenarioModel::build(testing::small_scenario(1, 1.0));
  for (std::size_t j = 1; j < model.states[0].size(); ++j) {
    const double d = model.d_tr[0][j] + model.base_delay.d0_pr;
    CHECK(model.problem.gain[0][j] == doctest::Approx(base.problem.gain[0][j] - 0.2 * d));
  }
}

TEST_CASE("policy names parse") {
  CHECK(parse_policy_kind("OnAlgo") == PolicyKind::onalgo);
  CHECK(parse_policy_kind("ocos") == PolicyKind::ocos);
  CHECK_THROWS_AS(parse_policy_kind("greedy"), ModelError);
}
