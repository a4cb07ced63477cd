#include <doctest.h>

#include <fstream>
#include <sstream>

#include "edgeoff/experiment.hpp"
#include "support.hpp"

using namespace edgeoff;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("edgeoff_exp_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

ExperimentPlan plan_for(const json& j, const fs::path& out) {
  auto plan = parse_plan(j, testing::source_dir() / "scenarios");
  plan.out_dir = out;
  return plan;
}

}  // namespace

TEST_CASE("an OnAlgo plan passes its bound checks") {
  const auto out = scratch("onalgo");
  const auto plan = plan_for({{"scenarios", {"scenario2.json"}},
                              {"policies", {"onalgo"}},
                              {"seeds", {1}},
                              {"horizon", 10000},
                              {"checkpoints", {10, 100, 1000, 10000}}},
                             out);
  CHECK(run_command(plan) == kExitOk);
  const auto bounds = json::parse(slurp(out / "bounds_scenario2_onalgo_s1.json"));
  REQUIRE(bounds.size() == 4);
  for (const auto& r : bounds) {
    CHECK(r["gap_holds"] == true);
    CHECK(r["viol_holds"] == true);
  }
  const auto summary = json::parse(slurp(out / "summary.json"));
  CHECK(summary.size() == 1);
  fs::remove_all(out);
}

TEST_CASE("four policies give four comparison rows per scenario and seed") {
  const auto out = scratch("four");
  const auto plan = plan_for({{"scenarios", {"scenario1.json", "scenario2.json"}},
                              {"policies", {"onalgo", "ato", "rco", "ocos"}},
                              {"seeds", {{"start", 3}, {"count", 2}}},
                              {"horizon", 500}},
                             out);
  CHECK(run_command(plan) == kExitOk);
  std::ifstream in(out / "comparison.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("scenario,policy,seed,", 0) == 0);
  std::map<std::string, int> per;
  int means = 0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string scenario, policy, seed;
    std::getline(row, scenario, ',');
    std::getline(row, policy, ',');
    std::getline(row, seed, ',');
    if (seed == "mean") ++means;
    else ++per[scenario + "/" + seed];
  }
  CHECK(per.size() == 4);
  for (const auto& [k, n] : per) CHECK(n == 4);
  CHECK(means == 8);
  // baselines carry no multipliers and get no bound report
  CHECK(fs::exists(out / "bounds_scenario1_onalgo_s3.json"));
  CHECK_FALSE(fs::exists(out / "bounds_scenario1_ocos_s3.json"));
  fs::remove_all(out);
}

TEST_CASE("an empty policy list is a usage error") {
  const auto out = scratch("empty");
  const auto plan = plan_for({{"scenarios", {"scenario2.json"}}, {"policies", json::array()}}, out);
  CHECK(run_command(plan) == kExitUsage);
  auto missing = plan_for({{"scenarios", {"nope.json"}}, {"policies", {"onalgo"}}}, out);
  CHECK(run_command(missing) == kExitUsage);
  CHECK_THROWS_AS(plan_for({{"policies", {"magic"}}}, out), ModelError);
  fs::remove_all(out);
}

TEST_CASE("re-running a plan rewrites identical bytes") {
  const auto a = scratch("rerun_a"), b = scratch("rerun_b");
  const json j{{"scenarios", {"scenario2.json"}},
               {"policies", {"onalgo", {{"kind", "onalgo"}, {"name", "sqrt"}, {"schedule", {{"kind", "power-decay"}, {"a", 1.0}}}}, "rco"}},
               {"seeds", {1, 2}},
               {"horizon", 2000},
               {"write_trajectories", true}};
  auto pa = plan_for(j, a), pb = plan_for(j, b);
  pa.threads = 1;
  pb.threads = 4;
  REQUIRE(run_command(pa) == kExitOk);
  REQUIRE(run_command(pb) == kExitOk);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a)) {
    ++files;
    CHECK(slurp(e.path()) == slurp(b / e.path().filename()));
  }
  CHECK(files == 2 + 4 + 6);
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST_CASE("plan parsing") {
  const auto plan = parse_plan({{"scenarios", "s.json"}, {"policies", {"ato"}}, {"mode", "wire-device"}, {"device", 2}},
                               "/base");
  CHECK(plan.scenarios.at(0) == fs::path("/base/s.json"));
  CHECK(plan.seeds.size() == 20);
  CHECK(plan.checkpoints == std::vector<std::uint64_t>{10, 100, 1000, 10000, 100000});
  CHECK(plan.mode == RunMode::wire_device);
  CHECK_NOTHROW(plan.validate());
  auto bad = plan;
  bad.device.reset();
  CHECK_THROWS_AS(bad.validate(), ModelError);
  CHECK_THROWS_AS(parse_plan({{"mode", "cluster"}}), ModelError);
  CHECK_THROWS_AS(parse_plan({{"policies", {"ato", "ato"}}, {"scenarios", "x"}}).validate(), ModelError);
}
