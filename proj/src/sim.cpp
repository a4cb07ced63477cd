#include "edgeoff/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace edgeoff {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw ModelError(what);
}

std::string fmt(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string to_string(PolicyKind k) {
  switch (k) {
    case PolicyKind::onalgo: return "onalgo";
    case PolicyKind::ato: return "ato";
    case PolicyKind::rco: return "rco";
    case PolicyKind::ocos: return "ocos";
  }
  return "onalgo";
}

PolicyKind parse_policy_kind(const std::string& s) {
  std::string k = s;
  std::transform(k.begin(), k.end(), k.begin(), [](unsigned char c) { return std::tolower(c); });
  if (k == "onalgo") return PolicyKind::onalgo;
  if (k == "ato") return PolicyKind::ato;
  if (k == "rco") return PolicyKind::rco;
  if (k == "ocos") return PolicyKind::ocos;
  throw ModelError("policy: unknown kind '" + s + "'");
}

void Scenario::validate() const {
  require(!name.empty(), "name: must not be empty");
  require(slot_seconds > 0.0, "slot_seconds: must be > 0");
  require(table.num_devices() > 0, "devices: at least one device required");
  const std::size_t N = table.num_devices();
  processes.validate(table);
  budgets.validate(N, variant);
  gain.validate(N);
  delay.validate();
  cost.validate();
  schedule.validate();
  require(ato_threshold >= 0.0 && ato_threshold <= 1.0, "ato_threshold: must lie in [0,1]");
  if (gate.kind == CapacityGate::Kind::token_bucket)
    require(gate.depth >= budgets.cloudlet, "capacity_gate.depth: must be >= budgets.cloudlet_gcycles");
  if (variant == ConstraintVariant::offload_first)
    for (std::size_t n = 0; n < N; ++n)
      require(budgets.local_power[n] < budgets.power[n],
              "budgets.local_power[" + std::to_string(n) + "]: must be below budgets.power");
}

PolicyConfig Scenario::default_policy(PolicyKind kind) const {
  PolicyConfig p;
  p.kind = kind;
  p.name = to_string(kind);
  p.schedule = schedule;
  p.ato_threshold = ato_threshold;
  return p;
}

ScenarioModel ScenarioModel::build(const Scenario& s) {
  ScenarioModel m;
  m.states = s.table.flatten();
  m.problem = make_problem(m.states, s.budgets, s.variant);
  const double speed = s.budgets.cloudlet / s.slot_seconds;
  m.base_delay = delay_components(s.delay, speed, s.delay.rate);
  m.base_delay.d_tr = 0.0;
  m.csma = s.delay.csma;
  const std::size_t N = m.states.size();
  m.d_tr.resize(N);
  for (std::size_t n = 0; n < N; ++n) {
    const auto& st = m.states[n];
    m.d_tr[n].assign(st.size(), 0.0);
    for (std::size_t j = 0; j < st.size(); ++j) {
      if (!st.task[j]) continue;
      const double rate = st.rate[j] > 0.0 ? st.rate[j] : s.delay.rate;
      DelayModelParams dedicated = s.delay;
      dedicated.csma = false;
      m.d_tr[n][j] = delay_components(dedicated, speed, rate).d_tr;
      if (s.rule == RuleVariant::delay_aware)
        m.problem.gain[n][j] = st.gain[j] - s.delay.zeta * (m.d_tr[n][j] + m.base_delay.d0_pr);
    }
  }
  return m;
}

namespace {

double csma_tr(const Scenario& s, const ScenarioModel& m, std::size_t n, std::size_t j,
               std::uint64_t own, std::uint64_t total) {
  const auto& st = m.states[n];
  const double rate = st.rate[j] > 0.0 ? st.rate[j] : s.delay.rate;
  // the device counts its own prospective transmission in the share
  return delay_components(s.delay, s.budgets.cloudlet / s.slot_seconds, rate,
                          static_cast<double>(own + 1), static_cast<double>(total + 1))
      .d_tr;
}

}  // namespace

DeviceNode::DeviceNode(const Scenario& scenario, const ScenarioModel& model,
                       const PolicyConfig& policy, std::size_t device, std::uint64_t seed)
    : scenario_(scenario),
      model_(model),
      policy_(policy),
      n_(device),
      stream_(scenario.processes, scenario.table.device(device), device, seed),
      outcomes_(scenario.gain, device, seed),
      ledger_(scenario.slot_seconds) {}

DeviceReport DeviceNode::step(std::uint64_t t) {
  auto s = stream_.next();
  if (!s)
    throw TraceExhausted("trace exhausted at slot " + std::to_string(t) + " for device " +
                         std::to_string(n_));
  const auto& grid = scenario_.table.device(n_);
  const auto& st = model_.states[n_];
  DeviceReport r;
  r.t = t;
  r.device = n_;
  r.state = *s;
  const std::size_t j = grid.index_of(*s);
  r.index = static_cast<std::uint32_t>(j);
  r.lambda = lambda_;
  if (s->has_task) {
    const auto out = outcomes_.draw(st.gain[j]);
    r.d_local = out.d_local;
    r.phi = out.phi;
    switch (policy_.kind) {
      case PolicyKind::onalgo: {
        const auto& p = model_.problem;
        double c = p.gain[n_][j];
        if (model_.csma && scenario_.rule == RuleVariant::delay_aware)
          c = st.gain[j] - scenario_.delay.zeta *
                               (csma_tr(scenario_, model_, n_, j, own_offloads_, total_offloads_) +
                                model_.base_delay.d0_pr);
        double price = lambda_ * p.device_coef[n_][j];
        if (!p.coupled.empty()) price += mu_ * p.coupled[0].coef[n_][j];
        if (p.coupled.size() > 1) price += link_ * p.coupled[1].coef[n_][j];
        r.decision = c > price;
        break;
      }
      case PolicyKind::ato: r.decision = ato_decide(r.d_local, policy_.ato_threshold); break;
      case PolicyKind::rco:
        r.decision = rco_decide(ledger_, st.power[j], scenario_.budgets.power[n_]);
        break;
      case PolicyKind::ocos: r.decision = true; break;
    }
  }
  last_ = r;
  return r;
}

void DeviceNode::receive(const Broadcast& b) {
  const std::size_t j = last_.index;
  const auto& p = model_.problem;
  if (last_.decision) ++own_offloads_;
  total_offloads_ = b.total_offloads;
  ledger_.record(last_.decision ? model_.states[n_].power[j] * scenario_.slot_seconds : 0.0);
  if (policy_.kind == PolicyKind::onalgo) {
    const double a = step_size(policy_.schedule, b.t);
    const double budget = p.device_capacity[n_];
    if (policy_.dual_update == DualUpdateMode::expected) {
      const double load = rule_load(p, n_, lambda_, mu_, link_, p.device_coef[n_],
                                    p.device_offset[n_], b.counts) /
                          static_cast<double>(b.t);
      lambda_ = projected_step(lambda_, a, load - budget);
    } else {
      const double load = p.device_offset[n_][j] + p.device_coef[n_][j] * (last_.decision ? 1.0 : 0.0);
      lambda_ = projected_step(lambda_, a, load - budget);
    }
  }
  mu_ = b.mu_next;
  link_ = b.link_next;
}

CloudletNode::CloudletNode(const Scenario& scenario, const ScenarioModel& model,
                           const PolicyConfig& policy, std::uint64_t horizon)
    : scenario_(scenario), model_(model), policy_(policy), N_(scenario.num_devices()) {
  lambda_mirror_.assign(N_, 0.0);
  counts_.resize(N_);
  for (std::size_t n = 0; n < N_; ++n) counts_[n].assign(model_.states[n].size(), 0);
  own_offloads_.assign(N_, 0);
  served_.assign(N_, 0);
  tr_.num_devices = N_;
  tr_.reserve(horizon);
  if (policy_.kind == PolicyKind::onalgo) tr_.duals.reserve((horizon + 1) * tr_.dual_width());
}

void CloudletNode::process(std::span<const DeviceReport> reports) {
  ++t_;
  if (reports.size() != N_) throw std::runtime_error("cloudlet: expected one report per device");
  const auto& p = model_.problem;
  const bool onalgo = policy_.kind == PolicyKind::onalgo;
  for (std::size_t n = 0; n < N_; ++n) {
    const auto& r = reports[n];
    if (r.t != t_ || r.device != n)
      throw std::runtime_error("cloudlet: report out of order at slot " + std::to_string(t_));
    if (r.index >= counts_[n].size())
      throw std::runtime_error("cloudlet: state index out of range from device " + std::to_string(n));
    if (onalgo && r.lambda != lambda_mirror_[n])
      throw std::runtime_error("cloudlet: multiplier of device " + std::to_string(n) + " diverged");
  }
  if (onalgo) {
    for (std::size_t n = 0; n < N_; ++n) tr_.duals.push_back(lambda_mirror_[n]);
    tr_.duals.push_back(mu_);
    tr_.duals.push_back(link_);
  }

  std::vector<TaskRequest> requests;
  for (std::size_t n = 0; n < N_; ++n)
    if (reports[n].decision) requests.push_back({n, model_.states[n].cycles[reports[n].index]});
  double capacity = scenario_.budgets.cloudlet;
  if (scenario_.gate.kind == CapacityGate::Kind::token_bucket) {
    tokens_ = std::min(scenario_.gate.depth, tokens_ + scenario_.budgets.cloudlet);
    capacity = tokens_;
  }
  std::fill(served_.begin(), served_.end(), 0);
  for (std::size_t n : admit_tasks(requests, capacity)) {
    served_[n] = 1;
    if (scenario_.gate.kind == CapacityGate::Kind::token_bucket)
      tokens_ -= model_.states[n].cycles[reports[n].index];
  }

  for (std::size_t n = 0; n < N_; ++n) {
    const auto& r = reports[n];
    const std::size_t j = r.index;
    const auto& st = model_.states[n];
    const bool task = r.state.has_task;
    double delay = 0.0;
    if (task) {
      delay = model_.base_delay.d_pr;
      if (r.decision) {
        delay += model_.csma ? csma_tr(scenario_, model_, n, j, own_offloads_[n], total_offloads_)
                             : model_.d_tr[n][j];
        if (served_[n]) delay += model_.base_delay.d0_pr;
      }
    }
    tr_.state.push_back(r.index);
    tr_.offloaded.push_back(r.decision ? 1 : 0);
    tr_.served.push_back(served_[n]);
    tr_.phi.push_back(task ? r.phi : 0.0);
    tr_.d_local.push_back(task ? r.d_local : 0.0);
    tr_.power.push_back(r.decision ? st.power[j] * scenario_.slot_seconds : 0.0);
    tr_.cycles.push_back(r.decision ? st.cycles[j] : 0.0);
    tr_.delay.push_back(delay);
  }
  for (std::size_t n = 0; n < N_; ++n) {
    ++counts_[n][reports[n].index];
    if (reports[n].decision) {
      ++own_offloads_[n];
      ++total_offloads_;
    }
  }

  if (onalgo) {
    const double a = step_size(policy_.schedule, t_);
    const double T = static_cast<double>(t_);
    double mu_next = mu_, link_next = link_;
    if (policy_.dual_update == DualUpdateMode::expected) {
      if (!p.coupled.empty()) {
        double load = 0.0;
        for (std::size_t n = 0; n < N_; ++n)
          load += rule_load(p, n, lambda_mirror_[n], mu_, link_, p.coupled[0].coef[n], {}, counts_[n]);
        mu_next = projected_step(mu_, a, load / T - p.coupled[0].capacity);
      }
      if (p.coupled.size() > 1) {
        double load = 0.0;
        for (std::size_t n = 0; n < N_; ++n)
          load += rule_load(p, n, lambda_mirror_[n], mu_, link_, p.coupled[1].coef[n], {}, counts_[n]);
        link_next = projected_step(link_, a, load / T - p.coupled[1].capacity);
      }
      for (std::size_t n = 0; n < N_; ++n) {
        const double load = rule_load(p, n, lambda_mirror_[n], mu_, link_, p.device_coef[n],
                                      p.device_offset[n], counts_[n]) /
                            T;
        lambda_mirror_[n] = projected_step(lambda_mirror_[n], a, load - p.device_capacity[n]);
      }
    } else {
      double h_load = 0.0, l_load = 0.0;
      for (std::size_t n = 0; n < N_; ++n) {
        const std::size_t j = reports[n].index;
        const double y = reports[n].decision ? 1.0 : 0.0;
        if (!p.coupled.empty()) h_load += p.coupled[0].coef[n][j] * y;
        if (p.coupled.size() > 1) l_load += p.coupled[1].coef[n][j] * y;
        const double load = p.device_offset[n][j] + p.device_coef[n][j] * y;
        lambda_mirror_[n] = projected_step(lambda_mirror_[n], a, load - p.device_capacity[n]);
      }
      if (!p.coupled.empty()) mu_next = projected_step(mu_, a, h_load - p.coupled[0].capacity);
      if (p.coupled.size() > 1) link_next = projected_step(link_, a, l_load - p.coupled[1].capacity);
    }
    mu_ = mu_next;
    link_ = link_next;
  }
}

Broadcast CloudletNode::broadcast_for(std::size_t n) const {
  Broadcast b;
  b.t = t_;
  b.served = served_[n] != 0;
  b.mu_next = mu_;
  b.link_next = link_;
  b.counts = counts_[n];
  b.total_offloads = total_offloads_;
  return b;
}

Trajectory CloudletNode::finish() {
  if (policy_.kind == PolicyKind::onalgo) {
    for (std::size_t n = 0; n < N_; ++n) tr_.duals.push_back(lambda_mirror_[n]);
    tr_.duals.push_back(mu_);
    tr_.duals.push_back(link_);
  }
  tr_.slots = t_;
  return std::move(tr_);
}

Trajectory run_episode(const Scenario& scenario, const PolicyConfig& policy, std::uint64_t T,
                       std::uint64_t seed) {
  const ScenarioModel model = ScenarioModel::build(scenario);
  std::vector<DeviceNode> devices;
  devices.reserve(scenario.num_devices());
  for (std::size_t n = 0; n < scenario.num_devices(); ++n)
    devices.emplace_back(scenario, model, policy, n, seed);
  CloudletNode cloudlet(scenario, model, policy, T);
  std::vector<DeviceReport> reports(devices.size());
  for (std::uint64_t t = 1; t <= T; ++t) {
    for (std::size_t n = 0; n < devices.size(); ++n) reports[n] = devices[n].step(t);
    cloudlet.process(reports);
    for (std::size_t n = 0; n < devices.size(); ++n) devices[n].receive(cloudlet.broadcast_for(n));
  }
  return cloudlet.finish();
}

SummaryRow metrics_summary(const Trajectory& tr, const Scenario& scenario) {
  require(tr.slots > 0, "metrics_summary: empty trajectory");
  const std::size_t N = tr.num_devices;
  require(N == scenario.num_devices(), "metrics_summary: device count mismatch");
  SummaryRow row;
  row.scenario = scenario.name;
  row.slots = tr.slots;
  row.partial = tr.partial;
  row.device_power.assign(N, 0.0);
  row.power_budget = scenario.budgets.power;
  std::uint64_t offloads = 0, served = 0;
  double acc = 0.0, local = 0.0, delay = 0.0, load = 0.0, requested = 0.0;
  for (std::uint64_t t = 1; t <= tr.slots; ++t)
    for (std::size_t n = 0; n < N; ++n) {
      const std::size_t i = tr.at(t, n);
      row.device_power[n] += tr.power[i];
      if (tr.offloaded[i]) {
        ++offloads;
        requested += tr.cycles[i];
      }
      if (tr.served[i]) {
        ++served;
        load += tr.cycles[i];
      }
      if (tr.state[i] == 0) continue;
      ++row.tasks;
      local += tr.d_local[i];
      acc += tr.d_local[i] + (tr.served[i] ? tr.phi[i] : 0.0);
      delay += tr.delay[i];
    }
  const double T = static_cast<double>(tr.slots);
  const double tasks = static_cast<double>(row.tasks);
  if (row.tasks > 0) {
    row.accuracy = acc / tasks;
    row.local_accuracy = local / tasks;
    row.offload_fraction = static_cast<double>(offloads) / tasks;
    row.mean_delay = delay / tasks;
  }
  row.served_fraction = offloads > 0 ? static_cast<double>(served) / static_cast<double>(offloads) : 0.0;
  double viol = 0.0;
  for (std::size_t n = 0; n < N; ++n) {
    row.device_power[n] /= T * scenario.slot_seconds;
    row.mean_power += row.device_power[n] / static_cast<double>(N);
    const double over = std::max(0.0, row.device_power[n] - scenario.budgets.power[n]);
    viol += over * over;
  }
  row.power_violation = std::sqrt(viol);
  row.cloud_load = load / T;
  row.cloud_requested = requested / T;
  row.cloud_capacity = scenario.budgets.cloudlet;
  row.cloud_utilization = row.cloud_load / scenario.budgets.cloudlet;
  row.cloud_violation = std::max(0.0, row.cloud_requested - scenario.budgets.cloudlet);
  return row;
}

nlohmann::ordered_json to_json(const SummaryRow& r) {
  nlohmann::ordered_json j;
  j["scenario"] = r.scenario;
  j["policy"] = r.policy;
  j["seed"] = r.seed;
  j["slots"] = r.slots;
  j["tasks"] = r.tasks;
  j["accuracy"] = r.accuracy;
  j["local_accuracy"] = r.local_accuracy;
  j["offload_fraction"] = r.offload_fraction;
  j["served_fraction"] = r.served_fraction;
  j["mean_power"] = r.mean_power;
  j["device_power"] = r.device_power;
  j["power_budget"] = r.power_budget;
  j["cloud_load"] = r.cloud_load;
  j["cloud_requested"] = r.cloud_requested;
  j["cloud_capacity"] = r.cloud_capacity;
  j["cloud_utilization"] = r.cloud_utilization;
  j["power_violation"] = r.power_violation;
  j["cloud_violation"] = r.cloud_violation;
  j["mean_delay"] = r.mean_delay;
  j["partial"] = r.partial;
  return j;
}

void write_trajectory_csv(std::ostream& out, const Trajectory& tr, const Scenario& scenario) {
  const auto states = scenario.table.flatten();
  out << "slot,device,o,h,w,offloaded,served,gain,power\n";
  for (std::uint64_t t = 1; t <= tr.slots; ++t)
    for (std::size_t n = 0; n < tr.num_devices; ++n) {
      const std::size_t i = tr.at(t, n);
      const std::size_t j = tr.state[i];
      const auto& st = states[n];
      out << t << ',' << n << ',' << fmt(st.power[j]) << ',' << fmt(st.cycles[j]) << ','
          << fmt(st.gain[j]) << ',' << int(tr.offloaded[i]) << ',' << int(tr.served[i]) << ','
          << fmt(tr.served[i] ? tr.phi[i] : 0.0) << ',' << fmt(tr.power[i] / scenario.slot_seconds)
          << '\n';
    }
}

bool bound_report_applies(const Scenario& scenario, const PolicyConfig& policy) {
  return policy.kind == PolicyKind::onalgo && policy.dual_update == DualUpdateMode::expected &&
         !scenario.delay.csma;
}

BoundReport evaluate_bounds(const Scenario& scenario, const PolicyConfig& policy,
                            const Trajectory& trajectory,
                            const std::vector<std::uint64_t>& checkpoints) {
  const ScenarioModel model = ScenarioModel::build(scenario);
  const Marginals truth = true_marginals(scenario.processes, scenario.table);
  const OfflineSolution opt = solve_offline(model.problem, truth);
  const BoundConstants constants = bound_constants(model.problem, policy.schedule);
  return theorem1_report(trajectory, model.problem, truth, opt, constants, policy.schedule, checkpoints);
}

RunResult run_single(const Scenario& scenario, const PolicyConfig& policy, std::uint64_t T,
                     std::uint64_t seed, const std::vector<std::uint64_t>& checkpoints) {
  RunResult res;
  res.trajectory = run_episode(scenario, policy, T, seed);
  res.summary = metrics_summary(res.trajectory, scenario);
  res.summary.policy = policy.name;
  res.summary.seed = seed;
  if (bound_report_applies(scenario, policy))
    res.bounds = evaluate_bounds(scenario, policy, res.trajectory, checkpoints);
  return res;
}

}  // namespace edgeoff
