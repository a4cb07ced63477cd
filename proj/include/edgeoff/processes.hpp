#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "edgeoff/model.hpp"

namespace edgeoff {

class TraceExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Process driving one quantized level (rate/power, cycles or gain).
struct LevelProcessSpec {
  enum class Kind { categorical, markov, truncated_normal };
  Kind kind = Kind::categorical;
  std::vector<double> probs;                    // categorical
  std::vector<std::vector<double>> transition;  // markov, row-stochastic
  std::size_t initial = 0;                      // markov start level
  double mean = 0.0;                            // truncated_normal, in grid units
  double stddev = 0.0;

  void validate(std::size_t levels, const std::string& field) const;
};

struct ArrivalSpec {
  enum class Kind { always, bernoulli, bursty };
  Kind kind = Kind::always;
  double probability = 1.0;        // bernoulli
  double bursts_per_minute = 6.0;  // bursty: mean idle gap is 60/rate seconds
  double min_duration_s = 5.0;
  double max_duration_s = 10.0;

  void validate(const std::string& field) const;
};

struct DeviceProcessSpec {
  LevelProcessSpec power;  // drives o (through the rate grid when present)
  LevelProcessSpec cycles;
  LevelProcessSpec gain;
  ArrivalSpec arrivals;
};

enum class ProcessKind { iid, markov, bursty, trace };

/// Recorded state sequence, one row per device per slot.
struct Trace {
  std::size_t num_devices = 0;
  std::vector<std::vector<DeviceState>> slots;  // [slot][device]
};

Trace load_trace(const std::string& path, std::size_t devices);
Trace parse_trace(std::istream& in, std::size_t devices);

struct ProcessSpec {
  std::vector<DeviceProcessSpec> devices;
  std::shared_ptr<const Trace> trace;  // overrides the generators when set
  double slot_seconds = 1.0;

  ProcessKind kind() const;
  void validate(const StateTable& table) const;
};

/// splitmix64-derived seed for (master, device, stream).
std::uint64_t substream_seed(std::uint64_t master, std::uint64_t device, std::uint64_t stream);

enum Stream : std::uint64_t { kStreamPower = 0, kStreamCycles = 1, kStreamGain = 2, kStreamArrivals = 3, kStreamOutcome = 4 };

/// Probability of each grid level under a normal truncated at +-3 std and at 0,
/// quantized to the nearest grid value.
std::vector<double> truncated_normal_pmf(double mean, double std, const std::vector<double>& grid);

class LevelStream {
 public:
  LevelStream(const LevelProcessSpec& spec, const std::vector<double>& grid, std::uint64_t seed);
  std::size_t next();

 private:
  std::size_t nearest(double x) const;

  LevelProcessSpec spec_;
  std::vector<double> grid_;
  std::mt19937_64 rng_;
  std::discrete_distribution<std::size_t> categorical_;
  std::vector<std::discrete_distribution<std::size_t>> rows_;
  std::normal_distribution<double> normal_;
  std::size_t current_ = 0;
  bool started_ = false;
};

class ArrivalStream {
 public:
  ArrivalStream(const ArrivalSpec& spec, double slot_seconds, std::uint64_t seed);
  bool next();

  /// Long-run fraction of slots carrying a task.
  static double task_fraction(const ArrivalSpec& spec, double slot_seconds);
  static std::pair<std::uint64_t, std::uint64_t> duration_slots(const ArrivalSpec& spec,
                                                                double slot_seconds);
  static double mean_gap_slots(const ArrivalSpec& spec, double slot_seconds);

 private:
  ArrivalSpec spec_;
  std::mt19937_64 rng_;
  std::bernoulli_distribution coin_;
  std::geometric_distribution<std::uint64_t> gap_;
  std::uniform_int_distribution<std::uint64_t> duration_;
  std::uint64_t gap_left_ = 0;
  std::uint64_t burst_left_ = 0;
};

/// State sequence of one device: a generator or a trace column.
class DeviceStateStream {
 public:
  DeviceStateStream(const ProcessSpec& spec, const DeviceGrid& grid, std::size_t device,
                    std::uint64_t master_seed);

  /// nullopt once a trace runs out.
  std::optional<DeviceState> next();

 private:
  std::size_t device_;
  std::shared_ptr<const Trace> trace_;
  std::size_t cursor_ = 0;
  std::optional<LevelStream> power_, cycles_, gain_;
  std::optional<ArrivalStream> arrivals_;
};

/// Realized quantities of one task: predictor confidence, realized improvement
/// phi and the local classifier's accuracy.
struct TaskOutcome {
  double sigma = 0.0;
  double phi = 0.0;
  double d_local = 0.0;
};

class OutcomeStream {
 public:
  OutcomeStream(const GainModelParams& params, std::size_t device, std::uint64_t master_seed);
  TaskOutcome draw(double w);

 private:
  GainModelParams params_;
  double v_ = 0.0;
  std::mt19937_64 rng_;
  std::uniform_real_distribution<double> uniform_;
  std::normal_distribution<double> normal_;
};

/// Long-run per-device state frequencies implied by the process description: levels advance
/// every slot independently and the task flag gates them.
Marginals true_marginals(const ProcessSpec& spec, const StateTable& table);

/// Cesaro limit of a row-stochastic matrix started at `initial`.
std::vector<double> markov_limit(const std::vector<std::vector<double>>& transition,
                                 std::size_t initial);

struct CostModelParams {
  double p2 = -0.00037;
  double p1 = 0.0214;
  double p0 = 0.1277;
  double max_rate = 50.0;
  double device_cycles_mean = 3.044;  // Gcycles
  double device_cycles_std = 0.173;
  double cloud_cycles_mean = 0.441;
  double cloud_cycles_std = 0.090;
  double d_pr = 2.537e-3;  // s
  double d0_pr = 0.191e-3;
  double d_tr = 0.157e-3;

  void validate() const;
};

/// Transmit power (W) at rate r (Mbps).
double tx_power(double rate_mbps, const CostModelParams& params = {});

struct DelayTerms {
  double d_pr = 0.0;
  double d0_pr = 0.0;
  double d_tr = 0.0;
};

/// own/total offloads feed the CSMA airtime share; ignored for dedicated channels.
DelayTerms delay_components(const DelayModelParams& params, double cloudlet_speed, double rate,
                            double own_offloads = 1.0, double total_offloads = 1.0);

void empirical_update(EmpiricalDistribution& dist, const std::vector<DeviceState>& observed,
                      const StateTable& table);

}  // namespace edgeoff
