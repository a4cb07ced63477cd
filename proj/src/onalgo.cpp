#include "edgeoff/onalgo.hpp"

#include <algorithm>
#include <cmath>

namespace edgeoff {

void StepSchedule::validate() const {
  if (!(a > 0.0) || !std::isfinite(a)) throw ModelError("schedule.a: must be > 0");
  if (kind == Kind::power_decay && !(beta > 0.0 && beta <= 1.0))
    throw ModelError("schedule.beta: must lie in (0,1]");
}

std::string to_string(StepSchedule::Kind k) {
  return k == StepSchedule::Kind::constant ? "constant" : "power-decay";
}

StepSchedule::Kind parse_schedule_kind(const std::string& s) {
  if (s == "constant") return StepSchedule::Kind::constant;
  if (s == "power-decay" || s == "power_decay" || s == "diminishing")
    return StepSchedule::Kind::power_decay;
  throw ModelError("schedule.kind: unknown value '" + s + "'");
}

double step_size(const StepSchedule& schedule, std::uint64_t t) {
  if (t == 0) throw ModelError("step_size: slot index starts at 1");
  if (schedule.kind == StepSchedule::Kind::constant) return schedule.a;
  if (schedule.beta == 0.5) return schedule.a / std::sqrt(static_cast<double>(t));
  return schedule.a / std::pow(static_cast<double>(t), schedule.beta);
}

double step_size_or_first(const StepSchedule& schedule, std::uint64_t t) {
  return step_size(schedule, t == 0 ? 1 : t);
}

bool offload_decide(double lambda, double mu, double o, double h, double w) {
  return lambda * o + mu * h < w;
}

bool offload_decide(double lambda, double mu, double o, double h, double w, double zeta,
                    double delay) {
  return lambda * o + mu * h < w - zeta * delay;
}

double projected_step(double x, double a, double excess) { return std::max(0.0, x + a * excess); }

double device_dual_update(double lambda, double a, std::span<const double> marginal,
                          std::span<const double> row, std::span<const double> coef,
                          std::span<const double> offset, double budget) {
  if (marginal.size() != row.size() || coef.size() != row.size())
    throw ModelError("device_dual_update: dimension mismatch");
  double load = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) {
    const double b = offset.empty() ? 0.0 : offset[j];
    load += (b + coef[j] * row[j]) * marginal[j];
  }
  return projected_step(lambda, a, load - budget);
}

double device_dual_update(double lambda, double a, std::span<const double> marginal,
                          std::span<const double> row, const LocalStates& states, double budget) {
  return device_dual_update(lambda, a, marginal, row, states.power, {}, budget);
}

double cloudlet_dual_update(double mu, double a, const Marginals& marginals,
                            const PolicyTable& policy, const std::vector<LocalStates>& states,
                            double capacity) {
  if (marginals.size() != states.size() || policy.num_devices() != states.size())
    throw ModelError("cloudlet_dual_update: dimension mismatch");
  double load = 0.0;
  for (std::size_t n = 0; n < states.size(); ++n) {
    if (marginals[n].size() != states[n].size() || policy.row(n).size() != states[n].size())
      throw ModelError("cloudlet_dual_update: dimension mismatch");
    for (std::size_t j = 0; j < states[n].size(); ++j)
      load += states[n].cycles[j] * policy.at(n, j) * marginals[n][j];
  }
  return projected_step(mu, a, load - capacity);
}

std::vector<double> policy_row_from_rule(const DualVector& dual, const OffloadProblem& problem,
                                         std::size_t n) {
  std::vector<double> row(problem.num_states(n));
  for (std::size_t j = 0; j < row.size(); ++j) row[j] = offload_decide(dual, problem, n, j) ? 1.0 : 0.0;
  return row;
}

PolicyTable policy_from_rule(const DualVector& dual, const OffloadProblem& problem) {
  std::vector<std::vector<double>> rows;
  rows.reserve(problem.num_devices());
  for (std::size_t n = 0; n < problem.num_devices(); ++n)
    rows.push_back(policy_row_from_rule(dual, problem, n));
  return PolicyTable(std::move(rows));
}

double rule_load(const OffloadProblem& problem, std::size_t n, double lambda, double mu,
                 double link, std::span<const double> coef, std::span<const double> offset,
                 std::span<const std::uint64_t> counts) {
  const auto& c = problem.gain[n];
  const auto& a = problem.device_coef[n];
  const double* h = problem.coupled.empty() ? nullptr : problem.coupled[0].coef[n].data();
  const double* l = problem.coupled.size() > 1 ? problem.coupled[1].coef[n].data() : nullptr;
  double load = 0.0;
  for (std::size_t j = 0; j < c.size(); ++j) {
    if (counts[j] == 0) continue;
    double price = lambda * a[j];
    if (h) price += mu * h[j];
    if (l) price += link * l[j];
    const double y = c[j] > price ? 1.0 : 0.0;
    const double b = offset.empty() ? 0.0 : offset[j];
    load += (b + coef[j] * y) * static_cast<double>(counts[j]);
  }
  return load;
}

}  // namespace edgeoff
