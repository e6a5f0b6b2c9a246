#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "common.hpp"

using namespace fbsde;
namespace fs = std::filesystem;

namespace {

const char* kCascade = R"({
  "task": "cascade",
  "system": {"n_particles": 2, "sigma": 1.0, "horizon": 1.0,
             "network": {"symmetric": {"alpha": 1.0}}}
})";

std::string field_of(const std::string& text) {
  try {
    config_from_json(parse_config_text(text));
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("fbsde_cli_" + name);
  fs::remove_all(p);
  return p;
}

Json simulate_config() {
  Json j = Json::parse(kCascade);
  j["task"] = "simulate";
  j["seed"] = 3;
  j["cascade"] = {{"grid", {{"space_steps", 41}, {"time_steps", 20}, {"refinement", 1}}}};
  j["simulate"] = {{"dt", 0.01}, {"paths", 12}, {"initial_states", {2.2, 2.6}}};
  return j;
}

}  // namespace

TEST(Config, MinimalCascadeLoads) {
  const RunConfig c = config_from_json(parse_config_text(kCascade));
  EXPECT_EQ(c.task, Task::Cascade);
  EXPECT_EQ(c.params->n_particles, 2);
  EXPECT_EQ(c.cascade.method, Method::Fd);
  EXPECT_FALSE(task_is_stochastic(c));
}

TEST(Config, ValidationNamesTheField) {
  Json j = Json::parse(kCascade);
  j["system"]["sigma"] = -1.0;
  EXPECT_EQ(field_of(j.dump()), "sigma");
  j = Json::parse(kCascade);
  j["task"] = {"cascade", "simulate"};
  EXPECT_EQ(field_of(j.dump()), "task");
  j = Json::parse(kCascade);
  j["lattice"] = {{"time_steps", 4}, {"initial_states", {1, 1}}};
  EXPECT_EQ(field_of(j.dump()), "task");
  j = Json::parse(kCascade);
  j["system"]["sigmaa"] = 1.0;
  EXPECT_EQ(field_of(j.dump()), "sigmaa");
  j = simulate_config();
  j.erase("seed");
  EXPECT_EQ(field_of(j.dump()), "seed");
  j = simulate_config();
  j["simulate"]["dt"] = 0.3;
  EXPECT_EQ(field_of(j.dump()), "dt");
}

TEST(Config, ParseErrorCarriesLineAndColumn) {
  try {
    parse_config_text("{\n  \"task\": \"cascade\",\n  \"system\": {,}\n}");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ParseError);
    EXPECT_NE(std::string(e.what()).find("line 3, column 14"), std::string::npos) << e.what();
  }
}

TEST(Config, HashTracksEveryField) {
  const Json a = simulate_config();
  Json b = a;
  EXPECT_EQ(config_hash(a), config_hash(b));
  b["simulate"]["paths"] = 13;
  EXPECT_NE(config_hash(a), config_hash(b));
  b = a;
  b["seed"] = 4;
  EXPECT_NE(config_hash(a), config_hash(b));
}

TEST(Run, SimulateOutputsAreIdenticalAcrossWorkerCounts) {
  std::vector<fs::path> dirs;
  for (int workers : {1, 2, 8}) {
    Json j = simulate_config();
    const fs::path out = scratch("det" + std::to_string(workers));
    j["output_dir"] = out.string();
    set_worker_count(workers);
    EXPECT_EQ(run(config_from_json(j)), 0);
    dirs.push_back(out);
  }
  set_worker_count(1);
  for (const char* name : {"trajectories.csv", "killing.csv", "diagnostics.csv"})
    for (std::size_t k = 1; k < dirs.size(); ++k) EXPECT_EQ(slurp(dirs[0] / name), slurp(dirs[k] / name)) << name;
  const Json manifest = Json::parse(slurp(dirs[0] / "manifest.json"));
  EXPECT_EQ(manifest["status"], "ok");
  EXPECT_EQ(manifest["seed"], 3);
  const std::string header = slurp(dirs[0] / "trajectories.csv").substr(0, 60);
  EXPECT_EQ(header.rfind("path_id,k,t,x_1,x_2,alive_bits,y_1,y_2,b_1,b_2", 0), 0u);
}

TEST(Run, NumericFailureWritesErrorRecord) {
  Json j = Json::parse(R"({"task": "lattice",
    "system": {"n_particles": 3, "sigma": 1.0, "horizon": 1.0, "network": {"symmetric": {"alpha": 1.0}}},
    "lattice": {"time_steps": 100, "initial_states": [2, 2, 2], "state_budget": 1000}})");
  const fs::path out = scratch("budget");
  j["output_dir"] = out.string();
  EXPECT_EQ(run(config_from_json(j)), kExitBudget);
  const Json rec = Json::parse(slurp(out / "error.json"));
  EXPECT_EQ(rec["code"], "StateSpaceExceeded");
  EXPECT_EQ(rec["exit_code"], 4);
}

TEST(Run, MeanfieldListsBothFixedPoints) {
  const fs::path out = scratch("mf");
  Json j = Json::parse(slurp(fs::path(FBSDE_CONFIG_DIR) / "meanfield_calibrated.json"));
  j["output_dir"] = out.string();
  ASSERT_EQ(run(config_from_json(j)), 0);
  std::istringstream csv(slurp(out / "fixed_points.csv"));
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line, "p,residual");
  std::vector<double> ps;
  while (std::getline(csv, line)) ps.push_back(std::stod(line.substr(0, line.find(','))));
  ASSERT_EQ(ps.size(), 2u);
  EXPECT_NEAR(ps[0], 0.5, 1e-6);
  EXPECT_NEAR(ps[1], 1.0, 1e-6);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("exit");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.json") << "{\"task\": \"cascade\",";
  }
  Json j = Json::parse(kCascade);
  j["system"]["sigma"] = 0;
  {
    std::ofstream(dir / "invalid.json") << j.dump();
  }
  auto status = [&](const std::string& args) {
    const int rc = std::system((std::string(FBSDE_RUN_PATH) + " " + args + " >/dev/null 2>&1").c_str());
    return WEXITSTATUS(rc);
  };
  EXPECT_EQ(status((dir / "bad.json").string() + " --out " + (dir / "o1").string()), 2);
  EXPECT_TRUE(fs::exists(dir / "o1" / "error.json"));
  EXPECT_EQ(status((dir / "invalid.json").string()), 2);
  EXPECT_EQ(status((dir / "missing.json").string()), 2);
  EXPECT_EQ(status(std::string(FBSDE_CONFIG_DIR) + "/clearing_three_banks.json --out " + (dir / "o2").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "o2" / "clearing.csv"));
}
