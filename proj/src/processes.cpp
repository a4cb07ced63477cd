#include "edgeoff/processes.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace edgeoff {

namespace {

constexpr double kProbTol = 1e-12;

void require(bool cond, const std::string& what) {
  if (!cond) throw ModelError(what);
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

void check_distribution(const std::vector<double>& p, std::size_t levels, const std::string& field) {
  require(p.size() == levels, field + ": expected " + std::to_string(levels) + " probabilities");
  double sum = 0.0;
  for (double x : p) {
    require(std::isfinite(x) && x >= 0.0, field + ": probabilities must be >= 0");
    sum += x;
  }
  require(std::abs(sum - 1.0) <= kProbTol, field + ": probabilities must sum to 1");
}

double normal_cdf(double x, double mean, double std) {
  return 0.5 * std::erfc(-(x - mean) / (std * std::sqrt(2.0)));
}

std::vector<double> level_distribution(const LevelProcessSpec& spec, const std::vector<double>& grid) {
  switch (spec.kind) {
    case LevelProcessSpec::Kind::categorical: return spec.probs;
    case LevelProcessSpec::Kind::markov: return markov_limit(spec.transition, spec.initial);
    case LevelProcessSpec::Kind::truncated_normal:
      return truncated_normal_pmf(spec.mean, spec.stddev, grid);
  }
  return {};
}

}  // namespace

void LevelProcessSpec::validate(std::size_t levels, const std::string& field) const {
  switch (kind) {
    case Kind::categorical: check_distribution(probs, levels, field + ".probs"); break;
    case Kind::markov:
      require(transition.size() == levels, field + ".transition: expected " +
                                               std::to_string(levels) + " rows");
      for (std::size_t i = 0; i < levels; ++i)
        check_distribution(transition[i], levels,
                           field + ".transition[" + std::to_string(i) + "]");
      require(initial < levels, field + ".initial: level out of range");
      break;
    case Kind::truncated_normal:
      require(std::isfinite(mean) && mean >= 0.0, field + ".mean: must be >= 0");
      require(std::isfinite(stddev) && stddev >= 0.0, field + ".std: must be >= 0");
      break;
  }
}

void ArrivalSpec::validate(const std::string& field) const {
  switch (kind) {
    case Kind::always: break;
    case Kind::bernoulli:
      require(probability >= 0.0 && probability <= 1.0, field + ".probability: must lie in [0,1]");
      break;
    case Kind::bursty:
      require(bursts_per_minute > 0.0, field + ".bursts_per_minute: must be > 0");
      require(min_duration_s > 0.0 && max_duration_s >= min_duration_s,
              field + ".duration_s: need 0 < min <= max");
      break;
  }
}

Trace parse_trace(std::istream& in, std::size_t devices) {
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "trace: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == "slot,device,o_level,h_level,w_level,has_task",
          "trace: header must be slot,device,o_level,h_level,w_level,has_task");
  struct Row {
    std::size_t slot, device;
    DeviceState state;
  };
  std::vector<Row> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream row(line);
    long long slot, device, o, h, w, task;
    require(static_cast<bool>(row >> slot >> device >> o >> h >> w >> task),
            "trace: malformed row at line " + std::to_string(lineno));
    require(slot >= 0 && device >= 0 && device < static_cast<long long>(devices) && o >= 0 &&
                h >= 0 && w >= 0 && (task == 0 || task == 1),
            "trace: value out of range at line " + std::to_string(lineno));
    DeviceState st;
    st.o_level = static_cast<std::size_t>(o);
    st.h_level = static_cast<std::size_t>(h);
    st.w_level = static_cast<std::size_t>(w);
    st.has_task = task == 1;
    rows.push_back({static_cast<std::size_t>(slot), static_cast<std::size_t>(device), st});
  }
  Trace trace;
  trace.num_devices = devices;
  if (rows.empty()) return trace;
  // slots may be numbered from 0 or 1; the first listed slot is replayed first
  std::size_t base = rows.front().slot;
  for (const auto& r : rows) base = std::min(base, r.slot);
  std::vector<std::vector<std::uint8_t>> seen;
  for (const auto& r : rows) {
    const std::size_t s = r.slot - base;
    if (trace.slots.size() <= s) {
      trace.slots.resize(s + 1, std::vector<DeviceState>(devices));
      seen.resize(s + 1, std::vector<std::uint8_t>(devices, 0));
    }
    require(!seen[s][r.device], "trace: duplicate row for slot " + std::to_string(r.slot) +
                                    " device " + std::to_string(r.device));
    seen[s][r.device] = 1;
    trace.slots[s][r.device] = r.state;
  }
  for (std::size_t s = 0; s < seen.size(); ++s)
    for (std::size_t n = 0; n < devices; ++n)
      require(seen[s][n], "trace: slot " + std::to_string(s + base) + " has no row for device " +
                              std::to_string(n));
  return trace;
}

Trace load_trace(const std::string& path, std::size_t devices) {
  std::ifstream in(path);
  require(in.good(), "trace: cannot open " + path);
  return parse_trace(in, devices);
}

ProcessKind ProcessSpec::kind() const {
  if (trace) return ProcessKind::trace;
  bool markov = false;
  for (const auto& d : devices) {
    if (d.arrivals.kind == ArrivalSpec::Kind::bursty) return ProcessKind::bursty;
    for (const auto* l : {&d.power, &d.cycles, &d.gain})
      if (l->kind == LevelProcessSpec::Kind::markov) markov = true;
  }
  return markov ? ProcessKind::markov : ProcessKind::iid;
}

void ProcessSpec::validate(const StateTable& table) const {
  require(slot_seconds > 0.0, "slot_seconds: must be > 0");
  if (trace) {
    require(trace->num_devices == table.num_devices(), "trace: device count mismatch");
    for (std::size_t s = 0; s < trace->slots.size(); ++s)
      for (std::size_t n = 0; n < table.num_devices(); ++n) {
        const auto& st = trace->slots[s][n];
        const auto& g = table.device(n);
        require(st.o_level < g.power.size() && st.h_level < g.cycles.size() &&
                    st.w_level < g.gain.size(),
                "trace: level outside grid at slot " + std::to_string(s));
      }
    return;
  }
  require(devices.size() == table.num_devices(), "processes: one entry per device required");
  for (std::size_t n = 0; n < devices.size(); ++n) {
    const std::string p = "processes[" + std::to_string(n) + "]";
    const auto& g = table.device(n);
    devices[n].power.validate(g.power.size(), p + ".rate");
    devices[n].cycles.validate(g.cycles.size(), p + ".h");
    devices[n].gain.validate(g.gain.size(), p + ".w");
    devices[n].arrivals.validate(p + ".arrivals");
  }
}

std::uint64_t substream_seed(std::uint64_t master, std::uint64_t device, std::uint64_t stream) {
  return splitmix64(splitmix64(splitmix64(master) ^ device) ^ (stream * 0x632be59bd9b4e019ULL));
}

std::vector<double> truncated_normal_pmf(double mean, double std, const std::vector<double>& grid) {
  require(!grid.empty(), "truncated_normal_pmf: empty grid");
  std::vector<double> p(grid.size(), 0.0);
  if (std <= 0.0) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < grid.size(); ++i)
      if (std::abs(grid[i] - mean) < std::abs(grid[best] - mean)) best = i;
    p[best] = 1.0;
    return p;
  }
  const double lo = std::max(0.0, mean - 3.0 * std);
  const double hi = mean + 3.0 * std;
  const double mass = normal_cdf(hi, mean, std) - normal_cdf(lo, mean, std);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double a = i == 0 ? -INFINITY : 0.5 * (grid[i - 1] + grid[i]);
    double b = i + 1 == grid.size() ? INFINITY : 0.5 * (grid[i] + grid[i + 1]);
    a = std::max(a, lo);
    b = std::min(b, hi);
    if (b > a) p[i] = (normal_cdf(b, mean, std) - normal_cdf(a, mean, std)) / mass;
  }
  double sum = 0.0;
  for (double x : p) sum += x;
  for (double& x : p) x /= sum;
  return p;
}

LevelStream::LevelStream(const LevelProcessSpec& spec, const std::vector<double>& grid,
                         std::uint64_t seed)
    : spec_(spec), grid_(grid), rng_(seed), current_(spec.initial) {
  switch (spec_.kind) {
    case LevelProcessSpec::Kind::categorical:
      categorical_ = std::discrete_distribution<std::size_t>(spec_.probs.begin(), spec_.probs.end());
      break;
    case LevelProcessSpec::Kind::markov:
      for (const auto& row : spec_.transition) rows_.emplace_back(row.begin(), row.end());
      break;
    case LevelProcessSpec::Kind::truncated_normal:
      normal_ = std::normal_distribution<double>(spec_.mean, spec_.stddev > 0.0 ? spec_.stddev : 1.0);
      break;
  }
}

std::size_t LevelStream::nearest(double x) const {
  auto it = std::lower_bound(grid_.begin(), grid_.end(), x);
  if (it == grid_.end()) return grid_.size() - 1;
  auto i = static_cast<std::size_t>(it - grid_.begin());
  // ties at a midpoint go to the lower level, matching the pmf cells
  if (i > 0 && x - grid_[i - 1] <= grid_[i] - x) --i;
  return i;
}

std::size_t LevelStream::next() {
  switch (spec_.kind) {
    case LevelProcessSpec::Kind::categorical: return categorical_(rng_);
    case LevelProcessSpec::Kind::markov:
      if (started_) current_ = rows_[current_](rng_);
      started_ = true;
      return current_;
    case LevelProcessSpec::Kind::truncated_normal: {
      if (spec_.stddev <= 0.0) return nearest(spec_.mean);
      const double lo = std::max(0.0, spec_.mean - 3.0 * spec_.stddev);
      const double hi = spec_.mean + 3.0 * spec_.stddev;
      double x;
      do x = normal_(rng_);
      while (x < lo || x > hi);
      return nearest(x);
    }
  }
  return 0;
}

std::pair<std::uint64_t, std::uint64_t> ArrivalStream::duration_slots(const ArrivalSpec& spec,
                                                                      double slot_seconds) {
  auto lo = static_cast<std::uint64_t>(std::ceil(spec.min_duration_s / slot_seconds - 1e-9));
  auto hi = static_cast<std::uint64_t>(std::floor(spec.max_duration_s / slot_seconds + 1e-9));
  lo = std::max<std::uint64_t>(lo, 1);
  hi = std::max(hi, lo);
  return {lo, hi};
}

double ArrivalStream::mean_gap_slots(const ArrivalSpec& spec, double slot_seconds) {
  return 60.0 / spec.bursts_per_minute / slot_seconds;
}

double ArrivalStream::task_fraction(const ArrivalSpec& spec, double slot_seconds) {
  switch (spec.kind) {
    case ArrivalSpec::Kind::always: return 1.0;
    case ArrivalSpec::Kind::bernoulli: return spec.probability;
    case ArrivalSpec::Kind::bursty: {
      auto [lo, hi] = duration_slots(spec, slot_seconds);
      const double d = 0.5 * static_cast<double>(lo + hi);
      return d / (d + mean_gap_slots(spec, slot_seconds));
    }
  }
  return 1.0;
}

ArrivalStream::ArrivalStream(const ArrivalSpec& spec, double slot_seconds, std::uint64_t seed)
    : spec_(spec), rng_(seed), coin_(spec.kind == ArrivalSpec::Kind::bernoulli ? spec.probability : 1.0) {
  if (spec_.kind == ArrivalSpec::Kind::bursty) {
    gap_ = std::geometric_distribution<std::uint64_t>(1.0 / (1.0 + mean_gap_slots(spec_, slot_seconds)));
    auto [lo, hi] = duration_slots(spec_, slot_seconds);
    duration_ = std::uniform_int_distribution<std::uint64_t>(lo, hi);
    gap_left_ = gap_(rng_);
  }
}

bool ArrivalStream::next() {
  switch (spec_.kind) {
    case ArrivalSpec::Kind::always: return true;
    case ArrivalSpec::Kind::bernoulli: return coin_(rng_);
    case ArrivalSpec::Kind::bursty:
      if (burst_left_ == 0) {
        if (gap_left_ > 0) {
          --gap_left_;
          return false;
        }
        burst_left_ = duration_(rng_);
        gap_left_ = gap_(rng_);
      }
      --burst_left_;
      return true;
  }
  return false;
}

DeviceStateStream::DeviceStateStream(const ProcessSpec& spec, const DeviceGrid& grid,
                                     std::size_t device, std::uint64_t master_seed)
    : device_(device), trace_(spec.trace) {
  if (trace_) return;
  const auto& d = spec.devices.at(device);
  power_.emplace(d.power, grid.power, substream_seed(master_seed, device, kStreamPower));
  cycles_.emplace(d.cycles, grid.cycles, substream_seed(master_seed, device, kStreamCycles));
  gain_.emplace(d.gain, grid.gain, substream_seed(master_seed, device, kStreamGain));
  arrivals_.emplace(d.arrivals, spec.slot_seconds,
                    substream_seed(master_seed, device, kStreamArrivals));
}

std::optional<DeviceState> DeviceStateStream::next() {
  if (trace_) {
    if (cursor_ >= trace_->slots.size()) return std::nullopt;
    return trace_->slots[cursor_++][device_];
  }
  DeviceState s;
  s.o_level = power_->next();
  s.h_level = cycles_->next();
  s.w_level = gain_->next();
  s.has_task = arrivals_->next();
  return s;
}

OutcomeStream::OutcomeStream(const GainModelParams& params, std::size_t device,
                             std::uint64_t master_seed)
    : params_(params),
      v_(params.risk_aversion.at(device)),
      rng_(substream_seed(master_seed, device, kStreamOutcome)) {}

TaskOutcome OutcomeStream::draw(double w) {
  TaskOutcome out;
  out.sigma = params_.confidence_max * uniform_(rng_);
  const double predicted = std::min(1.0, w + v_ * out.sigma);
  const double phi = std::clamp(predicted * (1.0 + params_.prediction_noise * normal_(rng_)), 0.0, 1.0);
  const double d0 = std::clamp(params_.cloud_accuracy_mean + params_.cloud_accuracy_std * normal_(rng_), 0.0, 1.0);
  out.phi = std::min(phi, d0);
  out.d_local = d0 - out.phi;
  return out;
}

std::vector<double> markov_limit(const std::vector<std::vector<double>>& transition,
                                 std::size_t initial) {
  const std::size_t L = transition.size();
  require(initial < L, "markov_limit: initial level out of range");
  // powers of the lazy chain (I+P)/2 converge to the Cesaro limit of P
  std::vector<std::vector<double>> m(L, std::vector<double>(L, 0.0));
  for (std::size_t i = 0; i < L; ++i)
    for (std::size_t j = 0; j < L; ++j) m[i][j] = 0.5 * transition[i][j] + (i == j ? 0.5 : 0.0);
  std::vector<std::vector<double>> sq(L, std::vector<double>(L));
  for (int it = 0; it < 64; ++it) {
    for (std::size_t i = 0; i < L; ++i)
      for (std::size_t j = 0; j < L; ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < L; ++k) s += m[i][k] * m[k][j];
        sq[i][j] = s;
      }
    // rounding in the row sums would otherwise compound across squarings
    double change = 0.0;
    for (std::size_t i = 0; i < L; ++i) {
      double sum = 0.0;
      for (double x : sq[i]) sum += x;
      for (std::size_t j = 0; j < L; ++j) {
        sq[i][j] /= sum;
        change = std::max(change, std::abs(sq[i][j] - m[i][j]));
      }
    }
    std::swap(m, sq);
    if (change == 0.0) break;
  }
  std::vector<double> row = m[initial];
  double sum = 0.0;
  for (double x : row) sum += x;
  for (double& x : row) x /= sum;
  return row;
}

Marginals true_marginals(const ProcessSpec& spec, const StateTable& table) {
  const std::size_t N = table.num_devices();
  Marginals out(N);
  if (spec.trace) {
    const auto& slots = spec.trace->slots;
    require(!slots.empty(), "trace: no slots");
    for (std::size_t n = 0; n < N; ++n) {
      const auto& g = table.device(n);
      out[n].assign(g.num_states(), 0.0);
      for (const auto& row : slots) out[n][g.index_of(row[n])] += 1.0;
      for (double& x : out[n]) x /= static_cast<double>(slots.size());
    }
    return out;
  }
  for (std::size_t n = 0; n < N; ++n) {
    const auto& g = table.device(n);
    const auto& d = spec.devices.at(n);
    const auto po = level_distribution(d.power, g.power);
    const auto ph = level_distribution(d.cycles, g.cycles);
    const auto pw = level_distribution(d.gain, g.gain);
    const double task = ArrivalStream::task_fraction(d.arrivals, spec.slot_seconds);
    auto& m = out[n];
    m.assign(g.num_states(), 0.0);
    m[0] = 1.0 - task;
    std::size_t j = 1;
    for (std::size_t o = 0; o < po.size(); ++o)
      for (std::size_t h = 0; h < ph.size(); ++h)
        for (std::size_t w = 0; w < pw.size(); ++w) m[j++] = task * po[o] * ph[h] * pw[w];
  }
  return out;
}

void CostModelParams::validate() const {
  require(max_rate > 0.0, "cost.max_rate: must be > 0");
  require(device_cycles_mean > 0.0 && cloud_cycles_mean > 0.0, "cost: cycle means must be > 0");
  require(device_cycles_std >= 0.0 && cloud_cycles_std >= 0.0, "cost: cycle stds must be >= 0");
  require(d_pr >= 0.0 && d0_pr >= 0.0 && d_tr >= 0.0, "cost: delays must be >= 0");
}

double tx_power(double rate_mbps, const CostModelParams& params) {
  require(std::isfinite(rate_mbps) && rate_mbps >= 0.0, "tx_power: rate must be >= 0");
  require(rate_mbps <= params.max_rate, "tx_power: rate above configured range");
  return std::max(0.0, (params.p2 * rate_mbps + params.p1) * rate_mbps + params.p0);
}

DelayTerms delay_components(const DelayModelParams& params, double cloudlet_speed, double rate,
                            double own_offloads, double total_offloads) {
  require(cloudlet_speed > 0.0 && rate > 0.0, "delay_components: speeds must be > 0");
  DelayTerms d;
  d.d_pr = params.task_cycles / params.device_speed;
  d.d0_pr = params.task_cycles / cloudlet_speed;
  if (!params.csma) {
    d.d_tr = params.object_size / (rate * params.bandwidth);
  } else if (total_offloads <= 0.0) {
    d.d_tr = 0.0;
  } else {
    const double share = own_offloads / total_offloads;
    d.d_tr = share > 0.0 ? params.object_size / (rate * params.bandwidth * share) : INFINITY;
  }
  return d;
}

void empirical_update(EmpiricalDistribution& dist, const std::vector<DeviceState>& observed,
                      const StateTable& table) {
  require(observed.size() == table.num_devices(), "empirical_update: one state per device");
  std::vector<std::size_t> idx(observed.size());
  for (std::size_t n = 0; n < observed.size(); ++n) idx[n] = table.device(n).index_of(observed[n]);
  dist.observe(idx);
}

}  // namespace edgeoff
