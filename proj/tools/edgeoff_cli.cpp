#include <iostream>

#include <CLI11.hpp>

#include "edgeoff/experiment.hpp"
#include "edgeoff/scenario_io.hpp"

using namespace edgeoff;

int main(int argc, char** argv) {
  CLI::App app{"Edge-assisted analytics offloading simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run an experiment plan");
  std::string plan_path, out_dir, mode, listen, connect;
  std::optional<std::size_t> device;
  std::optional<std::uint64_t> seed_override, horizon;
  std::optional<unsigned> threads;
  bool trajectories = false;
  run->add_option("--plan", plan_path, "Plan file (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--mode", mode, "sim | wire-cloudlet | wire-device")
      ->check(CLI::IsMember({"sim", "wire-cloudlet", "wire-device"}));
  run->add_option("--listen", listen, "host:port the cloudlet listens on");
  run->add_option("--connect", connect, "host:port of the cloudlet");
  run->add_option("--device", device, "Device id (wire-device)");
  run->add_option("--seed-override", seed_override, "Run this single seed");
  run->add_option("--horizon", horizon, "Override T");
  run->add_option("--threads", threads, "Worker threads for sweeps");
  run->add_flag("--trajectories", trajectories, "Write trajectory CSVs");

  auto* check = app.add_subcommand("check", "Validate a scenario file");
  std::string scenario_path;
  check->add_option("scenario", scenario_path, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*check) {
    try {
      const Scenario s = load_scenario(scenario_path);
      std::cout << s.name << ": ok, " << s.num_devices() << " devices, "
                << s.table.device(0).num_states() << " states per device\n";
      return kExitOk;
    } catch (const std::exception& e) {
      std::cerr << "error: " << e.what() << '\n';
      return kExitUsage;
    }
  }

  ExperimentPlan plan;
  try {
    plan = load_plan(plan_path);
    if (!out_dir.empty()) plan.out_dir = out_dir;
    if (!mode.empty()) plan.mode = parse_run_mode(mode);
    if (!listen.empty()) plan.listen = listen;
    if (!connect.empty()) plan.connect = connect;
    if (device) plan.device = device;
    if (seed_override) plan.seeds = {*seed_override};
    if (horizon) plan.horizon = horizon;
    if (threads) plan.threads = *threads;
    if (trajectories) plan.write_trajectories = true;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return run_command(plan);
}
