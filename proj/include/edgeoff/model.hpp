#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace edgeoff {

class ModelError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Quantized state of one device in one slot. Levels index into the
/// device's grids; has_task=false means no object arrived this slot.
struct DeviceState {
  std::size_t o_level = 0;
  std::size_t h_level = 0;
  std::size_t w_level = 0;
  bool has_task = false;

  friend bool operator==(const DeviceState&, const DeviceState&) = default;
};

/// Flattened device-local state space. Each entry j carries the power cost
/// o, cloudlet cycles h and gain w of offloading in state j. The idle state
/// (no task) is an ordinary entry with o = h = w = 0 and task = 0.
struct LocalStates {
  std::vector<double> power;
  std::vector<double> cycles;
  std::vector<double> gain;
  std::vector<double> rate;       // channel rate behind each entry, Mbps (0 if unknown)
  std::vector<std::uint8_t> task;

  std::size_t size() const { return gain.size(); }

  /// Task states only, no idle entry. Used for hand-built instances.
  static LocalStates tasks(std::vector<double> power, std::vector<double> cycles,
                           std::vector<double> gain);
};

/// Per-device quantization grids (the sets O, H, W). Power in watts,
/// cycles in Gcycles, gains dimensionless in [0,1]. The optional rate grid
/// lists the channel rate that produced each power level.
struct DeviceGrid {
  std::vector<double> power;
  std::vector<double> cycles;
  std::vector<double> gain;
  std::vector<double> rate;

  /// 1 idle state + |O|*|H|*|W| task states.
  std::size_t num_states() const;
  /// Flattened index: 0 for idle, otherwise 1 + (o*|H| + h)*|W| + w.
  std::size_t index_of(const DeviceState& s) const;
  DeviceState state_at(std::size_t index) const;
  LocalStates flatten() const;
};

class StateTable {
 public:
  StateTable() = default;
  explicit StateTable(std::vector<DeviceGrid> devices);

  std::size_t num_devices() const { return devices_.size(); }
  const DeviceGrid& device(std::size_t n) const { return devices_.at(n); }
  const std::vector<DeviceGrid>& devices() const { return devices_; }
  std::vector<LocalStates> flatten() const;

 private:
  std::vector<DeviceGrid> devices_;
};

/// Per-device probability vectors over local states.
using Marginals = std::vector<std::vector<double>>;

enum class ConstraintVariant { standard, bandwidth, offload_first };

std::string to_string(ConstraintVariant v);
ConstraintVariant parse_constraint_variant(const std::string& s);

struct ResourceBudgets {
  std::vector<double> power;        // B_n, watts
  double cloudlet = 0.0;            // H, Gcycles per slot
  std::optional<double> link;       // shared link capacity, Mbit per slot
  std::vector<double> object_size;  // per-device object size, Mbit (link variant)
  std::vector<double> local_power;  // nu_n, watts (offload-first variant)

  void validate(std::size_t devices, ConstraintVariant variant) const;
};

class PolicyTable {
 public:
  PolicyTable() = default;
  explicit PolicyTable(std::vector<std::vector<double>> rows);
  static PolicyTable zeros(const std::vector<LocalStates>& states);
  static PolicyTable filled(const std::vector<LocalStates>& states, double value);

  std::size_t num_devices() const { return rows_.size(); }
  double at(std::size_t n, std::size_t j) const { return rows_[n][j]; }
  void set(std::size_t n, std::size_t j, double value);
  const std::vector<double>& row(std::size_t n) const { return rows_[n]; }
  const std::vector<std::vector<double>>& rows() const { return rows_; }

 private:
  std::vector<std::vector<double>> rows_;
};

/// Multipliers of the device power constraints, the cloudlet constraint and
/// (bandwidth variant only) the shared link constraint.
struct DualVector {
  std::vector<double> lambda;
  double mu = 0.0;
  double link = 0.0;

  explicit DualVector(std::size_t devices = 0) : lambda(devices, 0.0) {}
  double norm() const;
  double squared_norm() const;
};

class EmpiricalDistribution {
 public:
  EmpiricalDistribution() = default;
  explicit EmpiricalDistribution(std::vector<std::size_t> sizes);

  void observe(std::span<const std::size_t> local_index);
  std::uint64_t slots() const { return slots_; }
  std::size_t num_devices() const { return counts_.size(); }
  std::uint64_t count(std::size_t n, std::size_t j) const { return counts_[n][j]; }
  std::span<const std::uint64_t> counts(std::size_t n) const { return counts_[n]; }
  double frequency(std::size_t n, std::size_t j) const;
  Marginals marginals() const;

 private:
  std::vector<std::vector<std::uint64_t>> counts_;
  std::uint64_t slots_ = 0;
};

struct GainModelParams {
  std::vector<double> risk_aversion;  // v_n
  double confidence_max = 0.05;       // predictor uncertainty drawn from U[0, confidence_max]
  double prediction_noise = 0.123;    // std of the relative prediction error
  double cloud_accuracy_mean = 0.9;
  double cloud_accuracy_std = 0.05;

  void validate(std::size_t devices) const;
};

struct DelayModelParams {
  double task_cycles = 0.441;   // k, Gcycles per task
  double device_speed = 0.3;    // H_d, Gcycles per second
  double object_size = 1.0;     // l, Mbit
  double rate = 10.0;           // default channel rate when the grid has none, Mbps
  double bandwidth = 1.0;       // W, normalization of r*W
  double zeta = 0.0;
  bool csma = false;

  void validate() const;
};

/// w = max(0, phi_pred - v * sigma).
double compute_gain(double phi_pred, double sigma, double v);

struct CoupledConstraint {
  std::vector<std::vector<double>> coef;  // per device, per state
  double capacity = 0.0;
};

/// Linear form of the offloading program: maximize sum c*y*rho subject to
/// per-device rows sum (b + a*y)*rho <= B_n and coupled rows
/// sum_n sum_j coef*y*rho <= capacity. Coupled row 0 is the cloudlet, row 1
/// (when present) the shared link.
struct OffloadProblem {
  std::vector<std::vector<double>> gain;
  std::vector<std::vector<double>> device_coef;
  std::vector<std::vector<double>> device_offset;
  std::vector<double> device_capacity;
  std::vector<CoupledConstraint> coupled;

  std::size_t num_devices() const { return gain.size(); }
  std::size_t num_states(std::size_t n) const { return gain[n].size(); }
  std::size_t num_constraints() const { return device_capacity.size() + coupled.size(); }

  /// Weighted resource cost of offloading in state j of device n.
  double price(const DualVector& dual, std::size_t n, std::size_t j) const;
  std::vector<std::size_t> sizes() const;
};

OffloadProblem make_problem(const std::vector<LocalStates>& states,
                            const ResourceBudgets& budgets, ConstraintVariant variant);

void check_marginals(const Marginals& dist, const OffloadProblem& problem);

double objective_value(const PolicyTable& policy, const Marginals& dist,
                       const OffloadProblem& problem);
double objective_value(const PolicyTable& policy, const Marginals& dist,
                       const std::vector<LocalStates>& states);

/// g(y): N device rows followed by the coupled rows.
std::vector<double> constraint_values(const PolicyTable& policy, const Marginals& dist,
                                      const OffloadProblem& problem);
std::vector<double> constraint_values(const PolicyTable& policy, const Marginals& dist,
                                      const std::vector<LocalStates>& states,
                                      const ResourceBudgets& budgets,
                                      ConstraintVariant variant);

/// Multipliers as one vector aligned with constraint_values.
std::vector<double> dual_components(const DualVector& dual, const OffloadProblem& problem);

}  // namespace edgeoff
