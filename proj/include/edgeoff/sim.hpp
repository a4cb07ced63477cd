#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "edgeoff/baselines.hpp"
#include "edgeoff/model.hpp"
#include "edgeoff/onalgo.hpp"
#include "edgeoff/oracle.hpp"
#include "edgeoff/processes.hpp"
#include "edgeoff/trajectory.hpp"

namespace edgeoff {

struct CapacityGate {
  enum class Kind { per_slot, token_bucket };
  Kind kind = Kind::per_slot;
  double depth = 0.0;  // token bucket size, Gcycles
};

enum class PolicyKind { onalgo, ato, rco, ocos };
enum class DualUpdateMode { expected, realized };

std::string to_string(PolicyKind k);
PolicyKind parse_policy_kind(const std::string& s);

struct PolicyConfig {
  std::string name;
  PolicyKind kind = PolicyKind::onalgo;
  StepSchedule schedule;
  double ato_threshold = 0.5;
  DualUpdateMode dual_update = DualUpdateMode::expected;
};

struct Scenario {
  std::string name = "scenario";
  std::uint64_t seed = 1;
  std::uint64_t horizon = 1000;
  double slot_seconds = 1.0;
  StateTable table;
  ProcessSpec processes;
  ResourceBudgets budgets;
  ConstraintVariant variant = ConstraintVariant::standard;
  GainModelParams gain;
  DelayModelParams delay;
  CostModelParams cost;
  RuleVariant rule = RuleVariant::accuracy_only;
  StepSchedule schedule;
  CapacityGate gate;
  double ato_threshold = 0.5;

  std::size_t num_devices() const { return table.num_devices(); }
  void validate() const;
  PolicyConfig default_policy(PolicyKind kind) const;
};

/// Quantities derived once per scenario and shared by every node.
struct ScenarioModel {
  std::vector<LocalStates> states;
  OffloadProblem problem;                    // gains already net of the delay penalty
  std::vector<std::vector<double>> d_tr;     // dedicated-channel transmission delay per state
  DelayTerms base_delay;                     // d_pr and d0_pr
  bool csma = false;

  static ScenarioModel build(const Scenario& s);
};

/// What a device tells the cloudlet in slot t.
struct DeviceReport {
  std::uint64_t t = 0;
  std::size_t device = 0;
  DeviceState state;
  std::uint32_t index = 0;
  bool decision = false;
  double lambda = 0.0;
  double d_local = 0.0;
  double phi = 0.0;
};

/// What the cloudlet tells one device at the end of slot t.
struct Broadcast {
  std::uint64_t t = 0;
  bool served = false;
  double mu_next = 0.0;
  double link_next = 0.0;
  std::span<const std::uint64_t> counts;  // the device's own state counts, slots 1..t
  std::uint64_t total_offloads = 0;       // all devices, slots 1..t
};

class DeviceNode {
 public:
  DeviceNode(const Scenario& scenario, const ScenarioModel& model, const PolicyConfig& policy,
             std::size_t device, std::uint64_t seed);

  /// Observe the slot-t state and decide. Throws TraceExhausted.
  DeviceReport step(std::uint64_t t);
  void receive(const Broadcast& b);

  double lambda() const { return lambda_; }
  std::size_t id() const { return n_; }

 private:
  const Scenario& scenario_;
  const ScenarioModel& model_;
  PolicyConfig policy_;
  std::size_t n_;
  DeviceStateStream stream_;
  OutcomeStream outcomes_;
  EnergyLedger ledger_;
  double lambda_ = 0.0, mu_ = 0.0, link_ = 0.0;
  std::uint64_t own_offloads_ = 0;
  std::uint64_t total_offloads_ = 0;
  DeviceReport last_;
};

class CloudletNode {
 public:
  CloudletNode(const Scenario& scenario, const ScenarioModel& model, const PolicyConfig& policy,
               std::uint64_t horizon);

  /// Consume every report of slot t (device order) and advance to t+1.
  void process(std::span<const DeviceReport> reports);
  Broadcast broadcast_for(std::size_t n) const;
  /// Appends the terminal multiplier row; call once after the last slot.
  Trajectory finish();

  std::uint64_t slot() const { return t_; }

 private:
  const Scenario& scenario_;
  const ScenarioModel& model_;
  PolicyConfig policy_;
  std::size_t N_;
  std::uint64_t t_ = 0;
  double mu_ = 0.0, link_ = 0.0;
  double tokens_ = 0.0;
  std::vector<double> lambda_mirror_;
  std::vector<std::vector<std::uint64_t>> counts_;
  std::vector<std::uint64_t> own_offloads_;
  std::uint64_t total_offloads_ = 0;
  std::vector<std::uint8_t> served_;
  Trajectory tr_;
};

/// Shared by policies so that the same seed yields the same arrivals and outcomes.
Trajectory run_episode(const Scenario& scenario, const PolicyConfig& policy, std::uint64_t T,
                       std::uint64_t seed);

struct SummaryRow {
  std::string scenario;
  std::string policy;
  std::uint64_t seed = 0;
  std::uint64_t slots = 0;
  std::uint64_t tasks = 0;
  double accuracy = 0.0;
  double local_accuracy = 0.0;
  double offload_fraction = 0.0;
  double served_fraction = 0.0;
  double mean_power = 0.0;
  std::vector<double> device_power;
  std::vector<double> power_budget;
  double cloud_load = 0.0;       // served Gcycles per slot
  double cloud_requested = 0.0;  // offloaded Gcycles per slot
  double cloud_capacity = 0.0;
  double cloud_utilization = 0.0;
  double power_violation = 0.0;  // ||[avg power - B]^+||
  double cloud_violation = 0.0;  // [requested - H]^+
  double mean_delay = 0.0;
  bool partial = false;
};

SummaryRow metrics_summary(const Trajectory& trajectory, const Scenario& scenario);
nlohmann::ordered_json to_json(const SummaryRow& row);

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory, const Scenario& scenario);

/// Bound report applies to OnAlgo with expected-load updates on a linear objective.
bool bound_report_applies(const Scenario& scenario, const PolicyConfig& policy);

struct RunResult {
  Trajectory trajectory;
  SummaryRow summary;
  std::optional<BoundReport> bounds;
};

/// Bound report for a finished OnAlgo trajectory.
BoundReport evaluate_bounds(const Scenario& scenario, const PolicyConfig& policy,
                            const Trajectory& trajectory,
                            const std::vector<std::uint64_t>& checkpoints);

RunResult run_single(const Scenario& scenario, const PolicyConfig& policy, std::uint64_t T,
                     std::uint64_t seed, const std::vector<std::uint64_t>& checkpoints);

}  // namespace edgeoff
