#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "edgeoff/model.hpp"

namespace edgeoff {

struct StepSchedule {
  enum class Kind { constant, power_decay };
  Kind kind = Kind::constant;
  double a = 0.1;
  double beta = 0.5;

  void validate() const;
};

std::string to_string(StepSchedule::Kind k);
StepSchedule::Kind parse_schedule_kind(const std::string& s);

/// a_t for t >= 1.
double step_size(const StepSchedule& schedule, std::uint64_t t);
/// a_t with a_0 := a_1.
double step_size_or_first(const StepSchedule& schedule, std::uint64_t t);

enum class RuleVariant { accuracy_only, delay_aware };

/// Offload iff lambda*o + mu*h < w.
bool offload_decide(double lambda, double mu, double o, double h, double w);
/// Offload iff lambda*o + mu*h < w - zeta*delay, delay = D_tr + D0_pr.
bool offload_decide(double lambda, double mu, double o, double h, double w, double zeta,
                    double delay);
/// Threshold test on the linear program: gain strictly above the dual price.
inline bool offload_decide(const DualVector& dual, const OffloadProblem& problem, std::size_t n,
                           std::size_t j) {
  return problem.gain[n][j] > problem.price(dual, n, j);
}

/// [x + a*excess]^+
double projected_step(double x, double a, double excess);

double device_dual_update(double lambda, double a, std::span<const double> marginal,
                          std::span<const double> row, std::span<const double> coef,
                          std::span<const double> offset, double budget);
double device_dual_update(double lambda, double a, std::span<const double> marginal,
                          std::span<const double> row, const LocalStates& states, double budget);

double cloudlet_dual_update(double mu, double a, const Marginals& marginals,
                            const PolicyTable& policy, const std::vector<LocalStates>& states,
                            double capacity);

std::vector<double> policy_row_from_rule(const DualVector& dual, const OffloadProblem& problem,
                                         std::size_t n);
PolicyTable policy_from_rule(const DualVector& dual, const OffloadProblem& problem);

/// sum_j (offset_j + coef_j * y_j) * count_j with y the rule's row at the given prices.
double rule_load(const OffloadProblem& problem, std::size_t n, double lambda, double mu,
                 double link, std::span<const double> coef, std::span<const double> offset,
                 std::span<const std::uint64_t> counts);

}  // namespace edgeoff
