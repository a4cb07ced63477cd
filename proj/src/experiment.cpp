#include "edgeoff/experiment.hpp"

#include <atomic>
#include <charconv>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include "edgeoff/scenario_io.hpp"
#include "edgeoff/wire.hpp"

namespace edgeoff {

namespace fs = std::filesystem;
using nlohmann::json;

std::string to_string(RunMode m) {
  switch (m) {
    case RunMode::sim: return "sim";
    case RunMode::wire_cloudlet: return "wire-cloudlet";
    case RunMode::wire_device: return "wire-device";
  }
  return "sim";
}

RunMode parse_run_mode(const std::string& s) {
  if (s == "sim") return RunMode::sim;
  if (s == "wire-cloudlet") return RunMode::wire_cloudlet;
  if (s == "wire-device") return RunMode::wire_device;
  throw ModelError("mode: unknown value '" + s + "'");
}

PolicyConfig PolicySpec::resolve(const Scenario& scenario) const {
  PolicyConfig p = scenario.default_policy(kind);
  p.name = name;
  if (schedule) p.schedule = *schedule;
  if (ato_threshold) p.ato_threshold = *ato_threshold;
  p.dual_update = dual_update;
  return p;
}

void ExperimentPlan::validate() const {
  if (scenarios.empty()) throw ModelError("scenarios: at least one scenario required");
  if (policies.empty()) throw ModelError("policies: at least one policy required");
  if (seeds.empty()) throw ModelError("seeds: at least one seed required");
  std::set<std::string> names;
  for (const auto& p : policies) {
    if (p.name.empty()) throw ModelError("policies: empty policy name");
    if (!names.insert(p.name).second) throw ModelError("policies: duplicate name '" + p.name + "'");
    if (p.schedule) p.schedule->validate();
    if (p.ato_threshold && !(*p.ato_threshold >= 0.0 && *p.ato_threshold <= 1.0))
      throw ModelError("policies." + p.name + ".ato_threshold: must lie in [0,1]");
  }
  if (mode == RunMode::wire_device && !device) throw ModelError("device: required in wire-device mode");
}

namespace {

template <class T>
T get(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ModelError(field + ": wrong type");
  }
}

PolicySpec parse_policy(const json& j, std::size_t i) {
  const std::string field = "policies[" + std::to_string(i) + "]";
  PolicySpec p;
  if (j.is_string()) {
    p.kind = parse_policy_kind(j.get<std::string>());
    p.name = to_string(p.kind);
    return p;
  }
  if (!j.is_object()) throw ModelError(field + ": expected a name or an object");
  if (!j.contains("kind")) throw ModelError(field + ".kind: required");
  p.kind = parse_policy_kind(get<std::string>(j["kind"], field + ".kind"));
  p.name = j.contains("name") ? get<std::string>(j["name"], field + ".name") : to_string(p.kind);
  if (j.contains("schedule")) p.schedule = parse_schedule(j["schedule"], field + ".schedule");
  if (j.contains("ato_threshold")) p.ato_threshold = get<double>(j["ato_threshold"], field + ".ato_threshold");
  if (j.contains("dual_update")) {
    const auto d = get<std::string>(j["dual_update"], field + ".dual_update");
    if (d == "expected") p.dual_update = DualUpdateMode::expected;
    else if (d == "realized") p.dual_update = DualUpdateMode::realized;
    else throw ModelError(field + ".dual_update: unknown value '" + d + "'");
  }
  return p;
}

std::string fmt(double x) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

struct Outcome {
  SummaryRow summary;
  std::optional<BoundReport> bounds;
  Trajectory trajectory;
  bool done = false;
};

}  // namespace

ExperimentPlan parse_plan(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ModelError("plan: expected an object");
  ExperimentPlan plan;
  if (j.contains("scenarios")) {
    const json& s = j["scenarios"];
    const auto list = s.is_string() ? std::vector<std::string>{s.get<std::string>()}
                                    : get<std::vector<std::string>>(s, "scenarios");
    for (const auto& p : list) {
      fs::path path = p;
      plan.scenarios.push_back(path.is_relative() ? base_dir / path : path);
    }
  }
  if (j.contains("policies")) {
    const json& p = j["policies"];
    if (!p.is_array()) throw ModelError("policies: expected an array");
    for (std::size_t i = 0; i < p.size(); ++i) plan.policies.push_back(parse_policy(p[i], i));
  }
  if (j.contains("seeds")) {
    const json& s = j["seeds"];
    if (s.is_object()) {
      const auto start = s.contains("start") ? get<std::uint64_t>(s["start"], "seeds.start") : 1;
      const auto count = s.contains("count") ? get<std::uint64_t>(s["count"], "seeds.count") : 20;
      for (std::uint64_t k = 0; k < count; ++k) plan.seeds.push_back(start + k);
    } else {
      plan.seeds = get<std::vector<std::uint64_t>>(s, "seeds");
    }
  } else {
    for (std::uint64_t k = 1; k <= 20; ++k) plan.seeds.push_back(k);
  }
  if (j.contains("horizon")) plan.horizon = get<std::uint64_t>(j["horizon"], "horizon");
  if (j.contains("checkpoints")) plan.checkpoints = get<std::vector<std::uint64_t>>(j["checkpoints"], "checkpoints");
  if (j.contains("out")) {
    fs::path out = get<std::string>(j["out"], "out");
    plan.out_dir = out.is_relative() ? base_dir / out : out;
  }
  if (j.contains("mode")) plan.mode = parse_run_mode(get<std::string>(j["mode"], "mode"));
  if (j.contains("write_trajectories"))
    plan.write_trajectories = get<bool>(j["write_trajectories"], "write_trajectories");
  if (j.contains("threads")) plan.threads = get<unsigned>(j["threads"], "threads");
  if (j.contains("listen")) plan.listen = get<std::string>(j["listen"], "listen");
  if (j.contains("connect")) plan.connect = get<std::string>(j["connect"], "connect");
  if (j.contains("device")) plan.device = get<std::size_t>(j["device"], "device");
  if (j.contains("join_timeout_ms")) plan.join_timeout_ms = get<std::uint64_t>(j["join_timeout_ms"], "join_timeout_ms");
  return plan;
}

ExperimentPlan load_plan(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(path.string() + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelError(path.string() + ": parse error at byte " + std::to_string(e.byte));
  }
  return parse_plan(j, path.parent_path());
}

std::vector<PlannedRun> expand_plan(const ExperimentPlan& plan, const std::vector<Scenario>& scenarios) {
  std::vector<PlannedRun> runs;
  for (std::size_t s = 0; s < scenarios.size(); ++s)
    for (std::uint64_t seed : plan.seeds)
      for (std::size_t p = 0; p < plan.policies.size(); ++p)
        runs.push_back({s, p, seed,
                        scenarios[s].name + "_" + plan.policies[p].name + "_s" + std::to_string(seed)});
  return runs;
}

void write_comparison_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "scenario,policy,seed,slots,tasks,accuracy,local_accuracy,offload_fraction,served_fraction,"
         "mean_power,cloud_load,cloud_utilization,power_violation,cloud_violation,mean_delay\n";
  auto line = [&](const SummaryRow& r, const std::string& seed) {
    out << r.scenario << ',' << r.policy << ',' << seed << ',' << r.slots << ',' << r.tasks << ','
        << fmt(r.accuracy) << ',' << fmt(r.local_accuracy) << ',' << fmt(r.offload_fraction) << ','
        << fmt(r.served_fraction) << ',' << fmt(r.mean_power) << ',' << fmt(r.cloud_load) << ','
        << fmt(r.cloud_utilization) << ',' << fmt(r.power_violation) << ','
        << fmt(r.cloud_violation) << ',' << fmt(r.mean_delay) << '\n';
  };
  for (const auto& r : rows) line(r, std::to_string(r.seed));

  // seed means per (scenario, policy), in first-appearance order
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, std::vector<const SummaryRow*>> groups;
  for (const auto& r : rows) {
    auto key = std::make_pair(r.scenario, r.policy);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  for (const auto& key : order) {
    const auto& g = groups[key];
    const double k = static_cast<double>(g.size());
    SummaryRow m;
    m.scenario = key.first;
    m.policy = key.second;
    for (const auto* r : g) {
      m.slots += r->slots;
      m.tasks += r->tasks;
      m.accuracy += r->accuracy / k;
      m.local_accuracy += r->local_accuracy / k;
      m.offload_fraction += r->offload_fraction / k;
      m.served_fraction += r->served_fraction / k;
      m.mean_power += r->mean_power / k;
      m.cloud_load += r->cloud_load / k;
      m.cloud_utilization += r->cloud_utilization / k;
      m.power_violation += r->power_violation / k;
      m.cloud_violation += r->cloud_violation / k;
      m.mean_delay += r->mean_delay / k;
    }
    m.slots /= g.size();
    m.tasks /= g.size();
    line(m, "mean");
  }
}

int run_command(const ExperimentPlan& plan) {
  try {
    plan.validate();
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  std::vector<Scenario> scenarios;
  try {
    for (const auto& p : plan.scenarios) scenarios.push_back(load_scenario(p));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  const auto runs = expand_plan(plan, scenarios);
  auto horizon_of = [&](const Scenario& s) { return plan.horizon.value_or(s.horizon); };
  const wire::WireOptions wopt{std::chrono::milliseconds(plan.join_timeout_ms)};

  if (plan.mode == RunMode::wire_device) {
    const wire::Endpoint ep = wire::parse_endpoint(plan.connect);
    for (const auto& r : runs) {
      const Scenario& s = scenarios[r.scenario];
      if (*plan.device >= s.num_devices()) {
        std::cerr << "error: device " << *plan.device << " outside scenario " << s.name << '\n';
        return kExitUsage;
      }
      const int rc = wire::run_device(ep, s, plan.policies[r.policy].resolve(s), horizon_of(s), r.seed,
                                      *plan.device, wopt);
      if (rc != 0) {
        std::cerr << "error: cloudlet went away during " << r.tag << '\n';
        return kExitAborted;
      }
    }
    return kExitOk;
  }

  std::vector<Outcome> outcomes(runs.size());
  auto finish = [&](std::size_t i, Trajectory tr) {
    const auto& r = runs[i];
    const Scenario& s = scenarios[r.scenario];
    const PolicyConfig policy = plan.policies[r.policy].resolve(s);
    Outcome& o = outcomes[i];
    o.summary = metrics_summary(tr, s);
    o.summary.policy = policy.name;
    o.summary.seed = r.seed;
    if (bound_report_applies(s, policy) && !tr.partial)
      o.bounds = evaluate_bounds(s, policy, tr, plan.checkpoints);
    if (plan.write_trajectories) o.trajectory = std::move(tr);
    o.done = true;
  };

  try {
    if (plan.mode == RunMode::wire_cloudlet) {
      wire::Listener listener(wire::parse_endpoint(plan.listen));
      for (std::size_t i = 0; i < runs.size(); ++i) {
        const auto& r = runs[i];
        const Scenario& s = scenarios[r.scenario];
        Trajectory tr = wire::run_cloudlet(listener, s, plan.policies[r.policy].resolve(s), horizon_of(s), wopt);
        const bool partial = tr.partial;
        if (tr.slots > 0) finish(i, std::move(tr));
        if (partial) {
          outcomes[i].summary.partial = true;
          std::cerr << "error: device lost during " << r.tag << "; partial trajectory\n";
          break;
        }
      }
    } else {
      const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
      const unsigned nthreads =
          static_cast<unsigned>(std::min<std::size_t>(plan.threads ? plan.threads : hw, runs.size()));
      std::atomic<std::size_t> next{0};
      std::vector<std::exception_ptr> errors(nthreads);
      auto worker = [&](unsigned w) {
        try {
          for (std::size_t i; (i = next.fetch_add(1)) < runs.size();) {
            const auto& r = runs[i];
            const Scenario& s = scenarios[r.scenario];
            finish(i, run_episode(s, plan.policies[r.policy].resolve(s), horizon_of(s), r.seed));
          }
        } catch (...) {
          errors[w] = std::current_exception();
          next = runs.size();
        }
      };
      std::vector<std::thread> pool;
      for (unsigned w = 1; w < nthreads; ++w) pool.emplace_back(worker, w);
      worker(0);
      for (auto& t : pool) t.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitAborted;
  }

  fs::create_directories(plan.out_dir);
  std::vector<SummaryRow> rows;
  nlohmann::ordered_json summary = nlohmann::ordered_json::array();
  bool all_hold = true, aborted = false;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const Outcome& o = outcomes[i];
    if (!o.done) {
      aborted = true;
      continue;
    }
    aborted = aborted || o.summary.partial;
    rows.push_back(o.summary);
    summary.push_back(to_json(o.summary));
    if (o.bounds) {
      write_text(plan.out_dir / ("bounds_" + runs[i].tag + ".json"), to_json(*o.bounds).dump(2) + "\n");
      if (!o.bounds->all_hold()) {
        all_hold = false;
        std::cerr << "bound check failed: " << runs[i].tag << '\n';
      }
    }
    if (plan.write_trajectories) {
      std::ofstream out(plan.out_dir / ("trajectory_" + runs[i].tag + ".csv"), std::ios::binary | std::ios::trunc);
      write_trajectory_csv(out, o.trajectory, scenarios[runs[i].scenario]);
    }
  }
  write_text(plan.out_dir / "summary.json", summary.dump(2) + "\n");
  {
    std::ofstream out(plan.out_dir / "comparison.csv", std::ios::binary | std::ios::trunc);
    write_comparison_csv(out, rows);
  }
  if (aborted) return kExitAborted;
  return all_hold ? kExitOk : kExitBoundFailed;
}

}  // namespace edgeoff
