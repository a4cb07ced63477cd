#include "edgeoff/baselines.hpp"

#include "edgeoff/model.hpp"

namespace edgeoff {

EnergyLedger::EnergyLedger(double slot_seconds) : slot_seconds_(slot_seconds) {
  if (!(slot_seconds > 0.0)) throw ModelError("EnergyLedger: slot length must be > 0");
}

void EnergyLedger::record(double energy) {
  if (energy < 0.0) throw ModelError("EnergyLedger: energy must be >= 0");
  energy_ += energy;
  ++slots_;
}

double EnergyLedger::average_power() const {
  if (slots_ == 0) return 0.0;
  return energy_ / (static_cast<double>(slots_) * slot_seconds_);
}

bool ato_decide(double d_local, double threshold) { return d_local < threshold; }

bool rco_decide(const EnergyLedger& ledger, double cost, double budget) {
  const double horizon = static_cast<double>(ledger.slots() + 1) * ledger.slot_seconds();
  return (ledger.energy() + cost * ledger.slot_seconds()) / horizon <= budget;
}

std::vector<std::size_t> admit_tasks(const std::vector<TaskRequest>& requests, double capacity) {
  if (capacity < 0.0) throw ModelError("admit_tasks: capacity must be >= 0");
  std::vector<std::size_t> served;
  double left = capacity;
  for (const auto& r : requests) {
    if (r.cycles <= left) {
      served.push_back(r.device);
      left -= r.cycles;
    }
  }
  return served;
}

std::vector<std::size_t> ocos_schedule(const std::vector<TaskRequest>& requests, double capacity) {
  if (!(capacity > 0.0)) throw ModelError("ocos_schedule: capacity must be > 0");
  return admit_tasks(requests, capacity);
}

}  // namespace edgeoff
