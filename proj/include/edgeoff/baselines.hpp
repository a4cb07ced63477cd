#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace edgeoff {

/// Running energy account of one device.
class EnergyLedger {
 public:
  explicit EnergyLedger(double slot_seconds = 1.0);

  /// Closes one slot; `energy` is the joules spent in it.
  void record(double energy);
  double energy() const { return energy_; }
  std::uint64_t slots() const { return slots_; }
  double slot_seconds() const { return slot_seconds_; }
  double average_power() const;

 private:
  double energy_ = 0.0;
  std::uint64_t slots_ = 0;
  double slot_seconds_ = 1.0;
};

/// Offload iff the local classifier's confidence is below c.
bool ato_decide(double d_local, double threshold);

/// Offload iff the running average power stays within B after spending o.
bool rco_decide(const EnergyLedger& ledger, double cost, double budget);

struct TaskRequest {
  std::size_t device = 0;
  double cycles = 0.0;
};

/// Greedy in request order; a request is admitted iff it fits the remaining capacity.
std::vector<std::size_t> admit_tasks(const std::vector<TaskRequest>& requests, double capacity);

/// Same gate; every device with a task asks.
std::vector<std::size_t> ocos_schedule(const std::vector<TaskRequest>& requests, double capacity);

}  // namespace edgeoff
