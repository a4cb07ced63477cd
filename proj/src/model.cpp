#include "edgeoff/model.hpp"

#include <algorithm>
#include <cmath>

namespace edgeoff {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw ModelError(what);
}

void check_grid(const std::vector<double>& values, const std::string& name, double lo,
                double hi) {
  require(!values.empty(), name + ": grid must not be empty");
  for (std::size_t i = 0; i < values.size(); ++i) {
    require(std::isfinite(values[i]) && values[i] >= lo && values[i] <= hi,
            name + "[" + std::to_string(i) + "]: value out of range");
    if (i > 0) require(values[i] > values[i - 1], name + ": grid must be strictly increasing");
  }
}

}  // namespace

LocalStates LocalStates::tasks(std::vector<double> power, std::vector<double> cycles,
                               std::vector<double> gain) {
  require(power.size() == gain.size() && cycles.size() == gain.size(),
          "LocalStates: power, cycles and gain must have equal length");
  LocalStates s;
  s.rate.assign(gain.size(), 0.0);
  s.task.assign(gain.size(), 1);
  s.power = std::move(power);
  s.cycles = std::move(cycles);
  s.gain = std::move(gain);
  return s;
}

std::size_t DeviceGrid::num_states() const {
  return 1 + power.size() * cycles.size() * gain.size();
}

std::size_t DeviceGrid::index_of(const DeviceState& s) const {
  if (!s.has_task) return 0;
  require(s.o_level < power.size() && s.h_level < cycles.size() && s.w_level < gain.size(),
          "DeviceState: level index outside grid");
  return 1 + (s.o_level * cycles.size() + s.h_level) * gain.size() + s.w_level;
}

DeviceState DeviceGrid::state_at(std::size_t index) const {
  require(index < num_states(), "DeviceGrid: state index out of range");
  if (index == 0) return {};
  std::size_t k = index - 1;
  DeviceState s;
  s.has_task = true;
  s.w_level = k % gain.size();
  k /= gain.size();
  s.h_level = k % cycles.size();
  s.o_level = k / cycles.size();
  return s;
}

LocalStates DeviceGrid::flatten() const {
  LocalStates out;
  const std::size_t n = num_states();
  out.power.reserve(n);
  out.cycles.reserve(n);
  out.gain.reserve(n);
  out.rate.reserve(n);
  out.task.reserve(n);
  out.power.push_back(0.0);
  out.cycles.push_back(0.0);
  out.gain.push_back(0.0);
  out.rate.push_back(0.0);
  out.task.push_back(0);
  for (std::size_t o = 0; o < power.size(); ++o)
    for (std::size_t h = 0; h < cycles.size(); ++h)
      for (std::size_t w = 0; w < gain.size(); ++w) {
        out.power.push_back(power[o]);
        out.cycles.push_back(cycles[h]);
        out.gain.push_back(gain[w]);
        out.rate.push_back(rate.empty() ? 0.0 : rate[o]);
        out.task.push_back(1);
      }
  return out;
}

StateTable::StateTable(std::vector<DeviceGrid> devices) : devices_(std::move(devices)) {
  require(!devices_.empty(), "StateTable: at least one device required");
  for (std::size_t n = 0; n < devices_.size(); ++n) {
    const auto& g = devices_[n];
    const std::string p = "grids[" + std::to_string(n) + "].";
    check_grid(g.power, p + "power", 0.0, INFINITY);
    check_grid(g.cycles, p + "cycles", 0.0, INFINITY);
    check_grid(g.gain, p + "gain", 0.0, 1.0);
    if (!g.rate.empty()) {
      require(g.rate.size() == g.power.size(), p + "rate: must match the power grid");
      for (double r : g.rate) require(r > 0.0, p + "rate: rates must be positive");
    }
  }
}

std::vector<LocalStates> StateTable::flatten() const {
  std::vector<LocalStates> out;
  out.reserve(devices_.size());
  for (const auto& g : devices_) out.push_back(g.flatten());
  return out;
}

std::string to_string(ConstraintVariant v) {
  switch (v) {
    case ConstraintVariant::standard: return "standard";
    case ConstraintVariant::bandwidth: return "bandwidth";
    case ConstraintVariant::offload_first: return "offload-first";
  }
  return "standard";
}

ConstraintVariant parse_constraint_variant(const std::string& s) {
  if (s == "standard") return ConstraintVariant::standard;
  if (s == "bandwidth") return ConstraintVariant::bandwidth;
  if (s == "offload-first" || s == "offload_first") return ConstraintVariant::offload_first;
  throw ModelError("variant.constraint: unknown value '" + s + "'");
}

void ResourceBudgets::validate(std::size_t devices, ConstraintVariant variant) const {
  require(power.size() == devices, "budgets.power: expected one entry per device");
  for (std::size_t n = 0; n < power.size(); ++n)
    require(std::isfinite(power[n]) && power[n] > 0.0,
            "budgets.power[" + std::to_string(n) + "]: must be > 0");
  require(std::isfinite(cloudlet) && cloudlet > 0.0, "budgets.cloudlet: must be > 0");
  if (variant == ConstraintVariant::bandwidth) {
    require(link.has_value(), "budgets.link: required by the bandwidth variant");
    require(object_size.size() == devices,
            "budgets.object_size: expected one entry per device");
  }
  if (link) require(*link > 0.0, "budgets.link: must be > 0");
  for (double l : object_size) require(l >= 0.0, "budgets.object_size: must be >= 0");
  if (variant == ConstraintVariant::offload_first)
    require(local_power.size() == devices,
            "budgets.local_power: required by the offload-first variant");
  for (double nu : local_power) require(nu >= 0.0, "budgets.local_power: must be >= 0");
}

PolicyTable::PolicyTable(std::vector<std::vector<double>> rows) : rows_(std::move(rows)) {
  for (const auto& r : rows_)
    for (double y : r) require(y >= 0.0 && y <= 1.0, "PolicyTable: entries must lie in [0,1]");
}

PolicyTable PolicyTable::zeros(const std::vector<LocalStates>& states) {
  return filled(states, 0.0);
}

PolicyTable PolicyTable::filled(const std::vector<LocalStates>& states, double value) {
  std::vector<std::vector<double>> rows;
  rows.reserve(states.size());
  for (const auto& s : states) rows.emplace_back(s.size(), value);
  return PolicyTable(std::move(rows));
}

void PolicyTable::set(std::size_t n, std::size_t j, double value) {
  require(value >= 0.0 && value <= 1.0, "PolicyTable: entries must lie in [0,1]");
  rows_.at(n).at(j) = value;
}

double DualVector::squared_norm() const {
  double s = mu * mu + link * link;
  for (double l : lambda) s += l * l;
  return s;
}

double DualVector::norm() const { return std::sqrt(squared_norm()); }

EmpiricalDistribution::EmpiricalDistribution(std::vector<std::size_t> sizes) {
  counts_.reserve(sizes.size());
  for (std::size_t k : sizes) counts_.emplace_back(k, 0);
}

void EmpiricalDistribution::observe(std::span<const std::size_t> local_index) {
  require(local_index.size() == counts_.size(), "EmpiricalDistribution: one state per device");
  for (std::size_t n = 0; n < counts_.size(); ++n)
    require(local_index[n] < counts_[n].size(), "EmpiricalDistribution: level index out of range");
  for (std::size_t n = 0; n < counts_.size(); ++n) ++counts_[n][local_index[n]];
  ++slots_;
}

double EmpiricalDistribution::frequency(std::size_t n, std::size_t j) const {
  if (slots_ == 0) return 0.0;
  return static_cast<double>(counts_[n][j]) / static_cast<double>(slots_);
}

Marginals EmpiricalDistribution::marginals() const {
  Marginals m(counts_.size());
  for (std::size_t n = 0; n < counts_.size(); ++n) {
    m[n].resize(counts_[n].size());
    for (std::size_t j = 0; j < counts_[n].size(); ++j) m[n][j] = frequency(n, j);
  }
  return m;
}

void GainModelParams::validate(std::size_t devices) const {
  require(risk_aversion.size() == devices, "gain_model.risk_aversion: one entry per device");
  for (double v : risk_aversion) require(v >= 0.0, "gain_model.risk_aversion: must be >= 0");
  require(confidence_max >= 0.0 && confidence_max <= 1.0,
          "gain_model.confidence_max: must lie in [0,1]");
  require(prediction_noise >= 0.0, "gain_model.prediction_noise: must be >= 0");
  require(cloud_accuracy_mean >= 0.0 && cloud_accuracy_mean <= 1.0,
          "gain_model.cloud_accuracy_mean: must lie in [0,1]");
  require(cloud_accuracy_std >= 0.0, "gain_model.cloud_accuracy_std: must be >= 0");
}

void DelayModelParams::validate() const {
  require(task_cycles > 0.0, "delay.task_cycles: must be > 0");
  require(device_speed > 0.0, "delay.device_speed: must be > 0");
  require(object_size > 0.0, "delay.object_size: must be > 0");
  require(rate > 0.0, "delay.rate: must be > 0");
  require(bandwidth > 0.0, "delay.bandwidth: must be > 0");
  require(zeta >= 0.0 && zeta <= 1.0, "delay.zeta: must lie in [0,1]");
}

double compute_gain(double phi_pred, double sigma, double v) {
  require(phi_pred >= 0.0 && phi_pred <= 1.0, "compute_gain: phi_pred must lie in [0,1]");
  require(sigma >= 0.0 && sigma <= 1.0, "compute_gain: sigma must lie in [0,1]");
  require(v >= 0.0, "compute_gain: v must be >= 0");
  return std::max(0.0, phi_pred - v * sigma);
}

double OffloadProblem::price(const DualVector& dual, std::size_t n, std::size_t j) const {
  double p = dual.lambda[n] * device_coef[n][j];
  if (!coupled.empty()) p += dual.mu * coupled[0].coef[n][j];
  if (coupled.size() > 1) p += dual.link * coupled[1].coef[n][j];
  return p;
}

std::vector<std::size_t> OffloadProblem::sizes() const {
  std::vector<std::size_t> s;
  s.reserve(gain.size());
  for (const auto& g : gain) s.push_back(g.size());
  return s;
}

OffloadProblem make_problem(const std::vector<LocalStates>& states,
                            const ResourceBudgets& budgets, ConstraintVariant variant) {
  const std::size_t N = states.size();
  budgets.validate(N, variant);
  OffloadProblem p;
  p.gain.resize(N);
  p.device_coef.resize(N);
  p.device_offset.resize(N);
  p.device_capacity = budgets.power;

  CoupledConstraint cloud;
  cloud.capacity = budgets.cloudlet;
  cloud.coef.resize(N);
  CoupledConstraint link;
  const bool with_link = variant == ConstraintVariant::bandwidth;
  if (with_link) {
    link.capacity = *budgets.link;
    link.coef.resize(N);
  }

  for (std::size_t n = 0; n < N; ++n) {
    const auto& s = states[n];
    const std::size_t K = s.size();
    p.gain[n] = s.gain;
    p.device_coef[n] = s.power;
    p.device_offset[n].assign(K, 0.0);
    if (variant == ConstraintVariant::offload_first) {
      const double nu = budgets.local_power[n];
      for (std::size_t j = 0; j < K; ++j)
        if (s.task[j]) {
          p.device_coef[n][j] = s.power[j] - nu;
          p.device_offset[n][j] = nu;
        }
    }
    cloud.coef[n] = s.cycles;
    if (with_link) {
      link.coef[n].assign(K, 0.0);
      for (std::size_t j = 0; j < K; ++j)
        if (s.task[j]) link.coef[n][j] = budgets.object_size[n];
    }
  }
  p.coupled.push_back(std::move(cloud));
  if (with_link) p.coupled.push_back(std::move(link));
  return p;
}

void check_marginals(const Marginals& dist, const OffloadProblem& problem) {
  require(dist.size() == problem.num_devices(), "distribution: device count mismatch");
  for (std::size_t n = 0; n < dist.size(); ++n)
    require(dist[n].size() == problem.num_states(n),
            "distribution: state count mismatch for device " + std::to_string(n));
}

namespace {

void check_policy(const PolicyTable& policy, const OffloadProblem& problem) {
  require(policy.num_devices() == problem.num_devices(), "policy: device count mismatch");
  for (std::size_t n = 0; n < policy.num_devices(); ++n)
    require(policy.row(n).size() == problem.num_states(n),
            "policy: state count mismatch for device " + std::to_string(n));
}

}  // namespace

double objective_value(const PolicyTable& policy, const Marginals& dist,
                       const OffloadProblem& problem) {
  check_policy(policy, problem);
  check_marginals(dist, problem);
  double total = 0.0;
  for (std::size_t n = 0; n < problem.num_devices(); ++n)
    for (std::size_t j = 0; j < problem.num_states(n); ++j)
      total += problem.gain[n][j] * policy.at(n, j) * dist[n][j];
  return total;
}

double objective_value(const PolicyTable& policy, const Marginals& dist,
                       const std::vector<LocalStates>& states) {
  require(policy.num_devices() == states.size() && dist.size() == states.size(),
          "objective_value: dimension mismatch");
  double total = 0.0;
  for (std::size_t n = 0; n < states.size(); ++n) {
    require(policy.row(n).size() == states[n].size() && dist[n].size() == states[n].size(),
            "objective_value: dimension mismatch");
    for (std::size_t j = 0; j < states[n].size(); ++j)
      total += states[n].gain[j] * policy.at(n, j) * dist[n][j];
  }
  return total;
}

std::vector<double> constraint_values(const PolicyTable& policy, const Marginals& dist,
                                      const OffloadProblem& problem) {
  check_policy(policy, problem);
  check_marginals(dist, problem);
  const std::size_t N = problem.num_devices();
  std::vector<double> g;
  g.reserve(problem.num_constraints());
  for (std::size_t n = 0; n < N; ++n) {
    double load = 0.0;
    for (std::size_t j = 0; j < problem.num_states(n); ++j)
      load += (problem.device_offset[n][j] + problem.device_coef[n][j] * policy.at(n, j)) *
              dist[n][j];
    g.push_back(load - problem.device_capacity[n]);
  }
  for (const auto& row : problem.coupled) {
    double load = 0.0;
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t j = 0; j < problem.num_states(n); ++j)
        load += row.coef[n][j] * policy.at(n, j) * dist[n][j];
    g.push_back(load - row.capacity);
  }
  return g;
}

std::vector<double> constraint_values(const PolicyTable& policy, const Marginals& dist,
                                      const std::vector<LocalStates>& states,
                                      const ResourceBudgets& budgets,
                                      ConstraintVariant variant) {
  return constraint_values(policy, dist, make_problem(states, budgets, variant));
}

std::vector<double> dual_components(const DualVector& dual, const OffloadProblem& problem) {
  std::vector<double> v = dual.lambda;
  if (!problem.coupled.empty()) v.push_back(dual.mu);
  if (problem.coupled.size() > 1) v.push_back(dual.link);
  return v;
}

}  // namespace edgeoff
