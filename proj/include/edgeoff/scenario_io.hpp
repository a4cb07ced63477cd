#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "edgeoff/sim.hpp"

namespace edgeoff {

/// Reads a scenario file. Relative trace paths resolve against the file's
/// directory. Errors are ModelError naming the offending key.
Scenario load_scenario(const std::filesystem::path& path);
Scenario parse_scenario(const nlohmann::json& j, const std::filesystem::path& base_dir = {});

StepSchedule parse_schedule(const nlohmann::json& j, const std::string& field);

}  // namespace edgeoff
