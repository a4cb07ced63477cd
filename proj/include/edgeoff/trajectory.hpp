#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace edgeoff {

/// Per-slot record of one episode, stored column-wise. Device-slot entries are
/// laid out at [(t-1)*N + n] for slots t = 1..slots.
struct Trajectory {
  std::size_t num_devices = 0;
  std::uint64_t slots = 0;
  bool partial = false;

  std::vector<std::uint32_t> state;  // device-local state index
  std::vector<std::uint8_t> offloaded;
  std::vector<std::uint8_t> served;
  std::vector<double> phi;      // realized improvement (0 without a task)
  std::vector<double> d_local;  // local classifier accuracy (0 without a task)
  std::vector<double> power;    // energy spent transmitting, J
  std::vector<double> cycles;   // cloudlet cycles requested by an offload
  std::vector<double> delay;    // task delay, s (0 without a task)

  /// Multipliers in effect at slot t, rows t = 1..slots+1; each row holds
  /// lambda_1..lambda_N, mu, link. Empty for policies without multipliers.
  std::vector<double> duals;

  std::size_t dual_width() const { return num_devices + 2; }
  bool has_duals() const { return !duals.empty(); }
  std::size_t at(std::uint64_t t, std::size_t n) const { return (t - 1) * num_devices + n; }
  std::span<const double> dual_row(std::uint64_t t) const {
    return {duals.data() + (t - 1) * dual_width(), dual_width()};
  }

  void reserve(std::uint64_t T) {
    const auto k = static_cast<std::size_t>(T) * num_devices;
    state.reserve(k);
    offloaded.reserve(k);
    served.reserve(k);
    phi.reserve(k);
    d_local.reserve(k);
    power.reserve(k);
    cycles.reserve(k);
    delay.reserve(k);
  }
};

}  // namespace edgeoff
