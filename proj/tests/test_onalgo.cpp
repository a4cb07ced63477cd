#include <doctest.h>

#include <random>

#include "edgeoff/onalgo.hpp"

using namespace edgeoff;
using Rows = std::vector<std::vector<double>>;

namespace {

StepSchedule decay(double a, double beta) {
  StepSchedule s;
  s.kind = StepSchedule::Kind::power_decay;
  s.a = a;
  s.beta = beta;
  return s;
}

OffloadProblem one_device(std::vector<double> o, std::vector<double> h, std::vector<double> w,
                          double B = 1.0, double H = 1.0) {
  ResourceBudgets b{{B}, H, {}, {}, {}};
  return make_problem({LocalStates::tasks(std::move(o), std::move(h), std::move(w))}, b,
                      ConstraintVariant::standard);
}

}  // namespace

TEST_CASE("step sizes") {
  StepSchedule c;
  c.a = 0.1;
  CHECK(step_size(c, 7) == 0.1);
  CHECK(step_size(decay(1, 0.5), 4) == 0.5);
  CHECK(step_size(decay(2, 1.0), 10) == doctest::Approx(0.2));
  CHECK_THROWS_AS(step_size(c, 0), ModelError);
  CHECK(step_size_or_first(decay(1, 0.5), 0) == step_size(decay(1, 0.5), 1));
  for (std::uint64_t t = 1; t < 1000; ++t) {
    CHECK(step_size(decay(1, 0.7), t + 1) <= step_size(decay(1, 0.7), t));
    CHECK(step_size(decay(1, 0.7), t) > 0.0);
  }
}

TEST_CASE("schedule validation and names") {
  CHECK_THROWS_AS(decay(0.0, 0.5).validate(), ModelError);
  CHECK_THROWS_AS(decay(1.0, 1.5).validate(), ModelError);
  CHECK(parse_schedule_kind("power-decay") == StepSchedule::Kind::power_decay);
  CHECK(parse_schedule_kind("constant") == StepSchedule::Kind::constant);
  CHECK_THROWS_AS(parse_schedule_kind("linear"), ModelError);
}

TEST_CASE("threshold rule") {
  CHECK(offload_decide(0.0, 0.0, 1.0, 1.0, 0.5));
  CHECK(offload_decide(0.4, 0.1, 0.5, 1.0, 0.35));
  CHECK_FALSE(offload_decide(0.4, 0.1, 0.5, 1.0, 0.35, 0.2, 0.348));
  CHECK_FALSE(offload_decide(0.0, 0.0, 1.0, 1.0, 0.0));
}

TEST_CASE("device multiplier update") {
  const std::vector<double> one{1.0};
  const std::vector<double> load3{0.3};
  CHECK(device_dual_update(0.5, 0.1, one, one, load3, {}, 0.5) == doctest::Approx(0.48));
  const std::vector<double> zero{0.0};
  CHECK(device_dual_update(0.05, 0.1, one, one, zero, {}, 1.0) == 0.0);
  const std::vector<double> load2{0.2};
  CHECK(device_dual_update(0.0, 0.1, one, one, load2, {}, 0.0) == doctest::Approx(0.02));

  // sum over all states weighted by the marginal
  const auto s = LocalStates::tasks({0.2, 0.6}, {1, 1}, {0.5, 0.5});
  const std::vector<double> rho{0.25, 0.75}, row{1.0, 0.5};
  CHECK(device_dual_update(0.1, 0.5, rho, row, s, 0.1) ==
        doctest::Approx(0.1 + 0.5 * (0.2 * 0.25 + 0.6 * 0.75 * 0.5 - 0.1)));
}

TEST_CASE("cloudlet multiplier update") {
  const std::vector<LocalStates> states{LocalStates::tasks({0}, {0.4}, {1})};
  const Marginals rho{{1.0}};
  const PolicyTable y(Rows{{1.0}});
  CHECK(cloudlet_dual_update(0.0, 0.1, rho, y, states, 1.0) == 0.0);
  CHECK(cloudlet_dual_update(1.0, 0.5, rho, y, states, 0.0) == doctest::Approx(1.2));
  CHECK(cloudlet_dual_update(0.1, 1.0, rho, y, states, 0.9) == 0.0);
}

TEST_CASE("policy row from the rule") {
  DualVector zero(1);
  CHECK(policy_row_from_rule(zero, one_device({1, 1}, {1, 1}, {0, 0}), 0) == std::vector<double>{0, 0});
  CHECK(policy_row_from_rule(zero, one_device({1, 1}, {1, 1}, {0.2, 0.9}), 0) == std::vector<double>{1, 1});
  DualVector tie(1);
  tie.lambda[0] = 0.3;
  tie.mu = 0.2;
  CHECK(policy_row_from_rule(tie, one_device({1}, {1}, {0.5}), 0) == std::vector<double>{0});
}

TEST_CASE("raising the gain never withdraws an offload, raising a price never adds one") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 20000; ++i) {
    const double lam = u(rng), mu = u(rng), o = u(rng), h = u(rng), w = u(rng), d = 0.5 * u(rng);
    if (offload_decide(lam, mu, o, h, w)) CHECK(offload_decide(lam, mu, o, h, w + d));
    if (!offload_decide(lam, mu, o, h, w)) {
      CHECK_FALSE(offload_decide(lam + d, mu, o, h, w));
      CHECK_FALSE(offload_decide(lam, mu + d, o, h, w));
    }
  }
}

TEST_CASE("projection keeps multipliers non-negative") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double x = 0.0;
  for (int i = 0; i < 10000; ++i) {
    x = projected_step(x, 0.3, u(rng));
    CHECK(x >= 0.0);
  }
}

TEST_CASE("rule_load equals the direct count-weighted sum") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::uint64_t> cnt(0, 50);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> o(6), h(6), w(6);
    std::vector<std::uint64_t> counts(6);
    for (int j = 0; j < 6; ++j) o[j] = u(rng), h[j] = u(rng), w[j] = u(rng), counts[j] = cnt(rng);
    const auto p = one_device(o, h, w);
    DualVector d(1);
    d.lambda[0] = u(rng);
    d.mu = u(rng);
    const auto row = policy_row_from_rule(d, p, 0);
    double power = 0.0, cycles = 0.0;
    for (int j = 0; j < 6; ++j) {
      power += o[j] * row[j] * double(counts[j]);
      cycles += h[j] * row[j] * double(counts[j]);
    }
    CHECK(rule_load(p, 0, d.lambda[0], d.mu, 0.0, p.device_coef[0], p.device_offset[0], counts) ==
          doctest::Approx(power));
    CHECK(rule_load(p, 0, d.lambda[0], d.mu, 0.0, p.coupled[0].coef[0], {}, counts) ==
          doctest::Approx(cycles));
  }
}
