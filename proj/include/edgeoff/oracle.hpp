#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeoff/model.hpp"
#include "edgeoff/onalgo.hpp"
#include "edgeoff/trajectory.hpp"

namespace edgeoff {

struct OfflineSolution {
  PolicyTable policy;
  double objective = 0.0;
  std::vector<double> coupled_multipliers;  // one per coupled row
};

OfflineSolution solve_offline(const OffloadProblem& problem, const Marginals& dist);
OfflineSolution solve_offline(const StateTable& table, const Marginals& dist,
                              const ResourceBudgets& budgets, ConstraintVariant variant);

/// Fractional knapsack with signed weights: maximize sum v*y s.t. sum u*y <= capacity.
void signed_knapsack(const std::vector<double>& values, const std::vector<double>& weights,
                     double capacity, std::vector<double>& row);

/// Finest step 1/m with (m+1)^(variables) <= max_points.
double brute_force_step(const OffloadProblem& problem, const Marginals& dist,
                        double max_points = 1e7);
OfflineSolution brute_force_offline(const OffloadProblem& problem, const Marginals& dist,
                                    double grid_step, double max_points = 1e7);

struct BoundConstants {
  double sigma_f = 0.0;
  double sigma_g = 0.0;
  double q = 0.0;
  double lambda_max = 0.0;
};

BoundConstants bound_constants(const OffloadProblem& problem, const StepSchedule& schedule);

PolicyTable per_slot_z(const DualVector& dual, const OffloadProblem& problem, const Marginals& truth);

struct ErrorTerms {
  double eps_gap = 0.0;         // eps_t(z_t) - eps_t(y_t)
  double lambda_delta_z = 0.0;  // lambda_t' delta_t(z_t)
  double delta_y_norm = 0.0;    // ||delta_t(y_t)||
};

/// eps_t(y) = sum c*y*(rho - rho_t); delta_t(y) = sum (b + a*y)*(rho_t - rho).
double eps_term(const PolicyTable& y, const Marginals& empirical, const Marginals& truth,
                const OffloadProblem& problem);
std::vector<double> delta_term(const PolicyTable& y, const Marginals& empirical,
                               const Marginals& truth, const OffloadProblem& problem);
ErrorTerms error_terms(const PolicyTable& z, const PolicyTable& y, const DualVector& dual,
                       const Marginals& empirical, const Marginals& truth,
                       const OffloadProblem& problem);

struct BoundRecord {
  std::uint64_t T = 0;
  double gap_lhs = 0.0, gap_rhs = 0.0;
  bool gap_holds = false;
  double viol_lhs = 0.0, viol_rhs = 0.0;
  bool viol_holds = false;
  double C_T = 0.0;
  double lambda_norm_max = 0.0;

  double gap_step_sum = 0.0;    // sigma_g^2/(2T) sum a_t
  double gap_step_ratio = 0.0;  // 1/(2T) sum ||lambda_t||^2 (1/a_t - 1/a_{t-1})
  double gap_terminal = 0.0;    // -||lambda_{T+1}||^2/(2T a_T)
  double viol_terminal = 0.0;   // ||lambda_{T+1}||/(T a_T)
  double viol_step_ratio = 0.0; // 1/T sum ||lambda_t|| (1/a_{t-1} - 1/a_t)
  double viol_delta = 0.0;      // 1/T sum ||delta_t(y_t)||
  std::vector<double> avg_constraint;  // (1/T) sum g(y_t)

  double lower_bound_slack = 0.0;  // at T
  bool lower_bound_every_slot = false;
  double saddle_slack = 0.0;
  bool saddle_every_slot = false;
  double lambda_max = 0.0;
  bool lambda_holds = false;
  double optimal_objective = 0.0;
  double average_objective = 0.0;

  bool all_hold() const {
    return gap_holds && viol_holds && lower_bound_every_slot && saddle_every_slot && lambda_holds;
  }
};

struct BoundReport {
  std::vector<BoundRecord> records;
  BoundConstants constants;
  double worst_lower_bound_slack = 0.0;  // min over slots of rhs - lhs
  double worst_saddle_slack = 0.0;
  bool all_hold() const;
};

/// lhs <= rhs up to 1e-9 relative to the magnitudes involved.
/// `scale` adds the magnitude of quantities that were subtracted to form lhs.
bool holds_relative(double lhs, std::initializer_list<double> rhs_terms, double scale = 0.0);

BoundReport theorem1_report(const Trajectory& trajectory, const OffloadProblem& problem,
                            const Marginals& truth, const OfflineSolution& optimum,
                            const BoundConstants& constants, const StepSchedule& schedule,
                            const std::vector<std::uint64_t>& checkpoints);

nlohmann::ordered_json to_json(const BoundRecord& r);
nlohmann::ordered_json to_json(const BoundReport& report);

}  // namespace edgeoff
