#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "edgeoff/sim.hpp"

namespace edgeoff {

enum class RunMode { sim, wire_cloudlet, wire_device };

std::string to_string(RunMode m);
RunMode parse_run_mode(const std::string& s);

/// A policy as named in a plan. Unset fields fall back to the scenario.
struct PolicySpec {
  std::string name;
  PolicyKind kind = PolicyKind::onalgo;
  std::optional<StepSchedule> schedule;
  std::optional<double> ato_threshold;
  DualUpdateMode dual_update = DualUpdateMode::expected;

  PolicyConfig resolve(const Scenario& scenario) const;
};

struct ExperimentPlan {
  std::vector<std::filesystem::path> scenarios;
  std::vector<PolicySpec> policies;
  std::vector<std::uint64_t> seeds;
  std::optional<std::uint64_t> horizon;  // scenario horizon when unset
  std::vector<std::uint64_t> checkpoints{10, 100, 1000, 10000, 100000};
  std::filesystem::path out_dir = "out";
  RunMode mode = RunMode::sim;
  bool write_trajectories = false;
  unsigned threads = 0;  // 0: hardware concurrency

  std::string listen = "127.0.0.1:7070";
  std::string connect = "127.0.0.1:7070";
  std::optional<std::size_t> device;
  std::uint64_t join_timeout_ms = 30000;

  void validate() const;
};

/// Paths in the plan resolve against the plan file's directory.
ExperimentPlan load_plan(const std::filesystem::path& path);
ExperimentPlan parse_plan(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

enum ExitCode : int { kExitOk = 0, kExitBoundFailed = 1, kExitUsage = 2, kExitAborted = 3 };

/// One (scenario, policy, seed) triple of a plan, in output order.
struct PlannedRun {
  std::size_t scenario = 0;
  std::size_t policy = 0;
  std::uint64_t seed = 0;
  std::string tag;  // <scenario>_<policy>_s<seed>
};

std::vector<PlannedRun> expand_plan(const ExperimentPlan& plan, const std::vector<Scenario>& scenarios);

/// Runs the plan and writes its artifacts. Returns an ExitCode.
int run_command(const ExperimentPlan& plan);

void write_comparison_csv(std::ostream& out, const std::vector<SummaryRow>& rows);

}  // namespace edgeoff
