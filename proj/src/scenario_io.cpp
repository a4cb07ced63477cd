#include "edgeoff/scenario_io.hpp"

#include <fstream>
#include <memory>

namespace edgeoff {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& what) {
  throw ModelError(field + ": " + what);
}

const json* find(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <class T>
T get(const json& j, const std::string& field) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    fail(field, "wrong type");
  }
}

template <class T>
void read(const json& obj, const char* key, T& out, const std::string& prefix) {
  if (const json* v = find(obj, key)) out = get<T>(*v, prefix + key);
}

void expect_object(const json& j, const std::string& field) {
  if (!j.is_object()) fail(field, "expected an object");
}

std::vector<double> doubles(const json& j, const std::string& field) {
  if (!j.is_array()) fail(field, "expected an array of numbers");
  return get<std::vector<double>>(j, field);
}

LevelProcessSpec parse_level(const json& j, const std::string& field) {
  expect_object(j, field);
  LevelProcessSpec s;
  const std::string kind = find(j, "kind") ? get<std::string>(j["kind"], field + ".kind") : "categorical";
  if (kind == "categorical") {
    s.kind = LevelProcessSpec::Kind::categorical;
    if (!find(j, "probs")) fail(field + ".probs", "required for categorical");
    s.probs = doubles(j["probs"], field + ".probs");
  } else if (kind == "markov") {
    s.kind = LevelProcessSpec::Kind::markov;
    if (!find(j, "transition")) fail(field + ".transition", "required for markov");
    s.transition = get<std::vector<std::vector<double>>>(j["transition"], field + ".transition");
    read(j, "initial", s.initial, field + ".");
  } else if (kind == "truncated_normal" || kind == "truncated-normal") {
    s.kind = LevelProcessSpec::Kind::truncated_normal;
    read(j, "mean", s.mean, field + ".");
    read(j, "std", s.stddev, field + ".");
  } else {
    fail(field + ".kind", "unknown value '" + kind + "'");
  }
  return s;
}

ArrivalSpec parse_arrivals(const json& j, const std::string& field) {
  expect_object(j, field);
  ArrivalSpec a;
  const std::string kind = find(j, "kind") ? get<std::string>(j["kind"], field + ".kind") : "always";
  if (kind == "always") a.kind = ArrivalSpec::Kind::always;
  else if (kind == "bernoulli") a.kind = ArrivalSpec::Kind::bernoulli;
  else if (kind == "bursty") a.kind = ArrivalSpec::Kind::bursty;
  else fail(field + ".kind", "unknown value '" + kind + "'");
  const std::string p = field + ".";
  read(j, "probability", a.probability, p);
  read(j, "bursts_per_minute", a.bursts_per_minute, p);
  read(j, "min_duration_s", a.min_duration_s, p);
  read(j, "max_duration_s", a.max_duration_s, p);
  return a;
}

// An array gives one entry per device; an object is replicated.
std::vector<json> per_device(const json& j, std::size_t devices, const std::string& field) {
  if (j.is_array()) {
    if (j.size() != devices) fail(field, "expected " + std::to_string(devices) + " entries");
    return {j.begin(), j.end()};
  }
  expect_object(j, field);
  return std::vector<json>(devices, j);
}

std::vector<double> per_device_values(const json& j, std::size_t devices, const std::string& field) {
  if (j.is_number()) return std::vector<double>(devices, j.get<double>());
  return doubles(j, field);
}

}  // namespace

StepSchedule parse_schedule(const json& j, const std::string& field) {
  expect_object(j, field);
  StepSchedule s;
  if (const json* k = find(j, "kind")) {
    try {
      s.kind = parse_schedule_kind(get<std::string>(*k, field + ".kind"));
    } catch (const ModelError&) {
      fail(field + ".kind", "unknown value");
    }
  }
  read(j, "a", s.a, field + ".");
  read(j, "beta", s.beta, field + ".");
  return s;
}

Scenario parse_scenario(const json& j, const fs::path& base_dir) {
  expect_object(j, "scenario");
  Scenario s;
  read(j, "name", s.name, "");
  read(j, "seed", s.seed, "");
  read(j, "horizon", s.horizon, "");
  read(j, "slot_seconds", s.slot_seconds, "");
  read(j, "ato_threshold", s.ato_threshold, "");

  if (const json* c = find(j, "cost")) {
    expect_object(*c, "cost");
    auto& m = s.cost;
    for (auto [k, v] : {std::pair{"p2", &m.p2}, {"p1", &m.p1}, {"p0", &m.p0}, {"max_rate", &m.max_rate},
                        {"device_cycles_mean", &m.device_cycles_mean},
                        {"device_cycles_std", &m.device_cycles_std},
                        {"cloud_cycles_mean", &m.cloud_cycles_mean},
                        {"cloud_cycles_std", &m.cloud_cycles_std}, {"d_pr", &m.d_pr},
                        {"d0_pr", &m.d0_pr}, {"d_tr", &m.d_tr}})
      read(*c, k, *v, "cost.");
  }

  std::size_t N = 0;
  const json* grids = find(j, "grids");
  if (!grids) fail("grids", "required");
  if (grids->is_array()) N = grids->size();
  if (const json* n = find(j, "num_devices")) {
    const auto declared = get<std::size_t>(*n, "num_devices");
    if (N != 0 && declared != N) fail("num_devices", "does not match grids");
    N = declared;
  }
  if (N == 0) fail("num_devices", "at least one device required");

  std::vector<DeviceGrid> dg;
  const auto gj = per_device(*grids, N, "grids");
  for (std::size_t n = 0; n < N; ++n) {
    const std::string p = "grids[" + std::to_string(n) + "].";
    DeviceGrid g;
    if (const json* r = find(gj[n], "rate")) g.rate = doubles(*r, p + "rate");
    if (const json* o = find(gj[n], "power")) {
      g.power = doubles(*o, p + "power");
    } else if (!g.rate.empty()) {
      for (double r : g.rate) {
        try {
          g.power.push_back(tx_power(r, s.cost));
        } catch (const ModelError& e) {
          fail(p + "rate", e.what());
        }
      }
    } else {
      fail(p + "power", "required when no rate grid is given");
    }
    if (!find(gj[n], "cycles")) fail(p + "cycles", "required");
    if (!find(gj[n], "gain")) fail(p + "gain", "required");
    g.cycles = doubles(gj[n]["cycles"], p + "cycles");
    g.gain = doubles(gj[n]["gain"], p + "gain");
    dg.push_back(std::move(g));
  }
  s.table = StateTable(std::move(dg));

  s.processes.slot_seconds = s.slot_seconds;
  if (const json* t = find(j, "trace")) {
    fs::path tp = get<std::string>(*t, "trace");
    if (tp.is_relative()) tp = base_dir / tp;
    s.processes.trace = std::make_shared<const Trace>(load_trace(tp.string(), N));
  } else {
    const json* pj = find(j, "processes");
    if (!pj) fail("processes", "required unless a trace is given");
    const auto items = per_device(*pj, N, "processes");
    for (std::size_t n = 0; n < N; ++n) {
      const std::string p = "processes[" + std::to_string(n) + "]";
      DeviceProcessSpec d;
      const json& it = items[n];
      if (!find(it, "rate") || !find(it, "h") || !find(it, "w")) fail(p, "rate, h and w are required");
      d.power = parse_level(it["rate"], p + ".rate");
      d.cycles = parse_level(it["h"], p + ".h");
      d.gain = parse_level(it["w"], p + ".w");
      if (const json* a = find(it, "arrivals")) d.arrivals = parse_arrivals(*a, p + ".arrivals");
      s.processes.devices.push_back(std::move(d));
    }
  }

  const json* b = find(j, "budgets");
  if (!b) fail("budgets", "required");
  expect_object(*b, "budgets");
  if (!find(*b, "power")) fail("budgets.power", "required");
  if (!find(*b, "cloudlet")) fail("budgets.cloudlet", "required");
  s.budgets.power = per_device_values((*b)["power"], N, "budgets.power");
  s.budgets.cloudlet = get<double>((*b)["cloudlet"], "budgets.cloudlet");
  if (const json* l = find(*b, "link")) s.budgets.link = get<double>(*l, "budgets.link");
  if (const json* l = find(*b, "object_size"))
    s.budgets.object_size = per_device_values(*l, N, "budgets.object_size");
  if (const json* l = find(*b, "local_power"))
    s.budgets.local_power = per_device_values(*l, N, "budgets.local_power");

  if (const json* v = find(j, "variant")) {
    try {
      s.variant = parse_constraint_variant(get<std::string>(*v, "variant"));
    } catch (const ModelError&) {
      fail("variant", "unknown value");
    }
  }
  if (const json* r = find(j, "rule")) {
    const auto rule = get<std::string>(*r, "rule");
    if (rule == "accuracy-only") s.rule = RuleVariant::accuracy_only;
    else if (rule == "delay-aware") s.rule = RuleVariant::delay_aware;
    else fail("rule", "unknown value '" + rule + "'");
  }

  s.gain.risk_aversion.assign(N, 0.0);
  if (const json* g = find(j, "gain_model")) {
    expect_object(*g, "gain_model");
    if (const json* v = find(*g, "risk_aversion"))
      s.gain.risk_aversion = per_device_values(*v, N, "gain_model.risk_aversion");
    read(*g, "confidence_max", s.gain.confidence_max, "gain_model.");
    read(*g, "prediction_noise", s.gain.prediction_noise, "gain_model.");
    read(*g, "cloud_accuracy_mean", s.gain.cloud_accuracy_mean, "gain_model.");
    read(*g, "cloud_accuracy_std", s.gain.cloud_accuracy_std, "gain_model.");
  }

  if (const json* d = find(j, "delay")) {
    expect_object(*d, "delay");
    auto& m = s.delay;
    for (auto [k, v] : {std::pair{"task_cycles", &m.task_cycles}, {"device_speed", &m.device_speed},
                        {"object_size", &m.object_size}, {"rate", &m.rate},
                        {"bandwidth", &m.bandwidth}, {"zeta", &m.zeta}})
      read(*d, k, *v, "delay.");
    read(*d, "csma", m.csma, "delay.");
  }

  if (const json* sc = find(j, "schedule")) s.schedule = parse_schedule(*sc, "schedule");

  if (const json* g = find(j, "capacity_gate")) {
    expect_object(*g, "capacity_gate");
    const std::string kind = find(*g, "kind") ? get<std::string>((*g)["kind"], "capacity_gate.kind") : "per-slot";
    if (kind == "per-slot") s.gate.kind = CapacityGate::Kind::per_slot;
    else if (kind == "token-bucket") s.gate.kind = CapacityGate::Kind::token_bucket;
    else fail("capacity_gate.kind", "unknown value '" + kind + "'");
    read(*g, "depth", s.gate.depth, "capacity_gate.");
  }

  s.validate();
  return s;
}

Scenario load_scenario(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelError(path.string() + ": cannot open");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ModelError(path.string() + ": parse error at byte " + std::to_string(e.byte));
  }
  return parse_scenario(j, path.parent_path());
}

}  // namespace edgeoff
