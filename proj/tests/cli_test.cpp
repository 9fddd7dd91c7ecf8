#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "contact_forge/config.hpp"
#include "contact_forge/flows.hpp"
#include "contact_forge/suites.hpp"

using namespace cforge;
namespace fs = std::filesystem;

namespace {

const std::string kCli = CF_CLI_PATH;
const std::string kData = CF_TEST_DATA;

int run(const std::string& args, const std::string& env = {}) {
  const std::string cmd = (env.empty() ? "" : env + " ") + kCli + " " + args + " > /dev/null 2>&1";
  const int raw = std::system(cmd.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path tmp(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("cf_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  return dir / name;
}

json without_wall_time(json j) {
  for (auto& r : j["reports"]) r.erase("wall_time");
  return j;
}

std::vector<std::vector<double>> read_csv(const fs::path& p, std::string& header) {
  std::ifstream in(p);
  std::getline(in, header);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
    rows.push_back(row);
  }
  return rows;
}

ConfigError config_error(const std::string& text) {
  try {
    load_scenario(text);
  } catch (const ConfigError& e) {
    return e;
  }
  ADD_FAILURE() << "no ConfigError for:\n" << text;
  return ConfigError("none", 0, 0);
}

}  // namespace

TEST(Config, Defaults) {
  ScenarioConfig c = load_scenario("");
  EXPECT_TRUE(c.suites.empty());
  EXPECT_EQ(c.seed, kDefaultSeed);
  EXPECT_EQ(c.squeeze.samples, 10000);
  EXPECT_DOUBLE_EQ(c.squeeze.target_factor, 7.0 / 6.0);
  EXPECT_EQ(c.unwrap.n, (std::vector<int>{1, 3}));
  EXPECT_FALSE(c.custom);
  EXPECT_EQ(selected_suites(c).size(), suite_names().size() - 1);
}

TEST(Config, ParsesValues) {
  ScenarioConfig c = load_scenario(
      "# comment\n"
      "[run]\n"
      "suites = squeeze, unwrap   ; trailing\n"
      "seed = 18446744073709551615\n"
      "\n"
      "[squeeze]\n"
      "target_factor = 7/6\n"
      "h = \"2*pi\"\n"
      "[unwrap]\n"
      "n = 2\n"
      "hbars = 0.001, 0.002\n");
  EXPECT_EQ(c.suites, (std::vector<std::string>{"squeeze", "unwrap"}));
  EXPECT_EQ(c.seed, 18446744073709551615ULL);
  EXPECT_DOUBLE_EQ(c.squeeze.h, 2 * std::numbers::pi);
  EXPECT_EQ(c.unwrap.n, (std::vector<int>{2}));
  EXPECT_EQ(*c.unwrap.hbars, (std::vector<double>{0.001, 0.002}));
}

TEST(Config, ErrorsCarryPosition) {
  ConfigError e1 = config_error("[squeeze]\nh = -5\n");
  EXPECT_EQ(e1.line(), 2u);
  EXPECT_EQ(e1.column(), 5u);
  ConfigError e2 = config_error("[squeeze]\n  hh = 5\n");
  EXPECT_EQ(e2.line(), 2u);
  EXPECT_EQ(e2.column(), 3u);
  ConfigError e3 = config_error("[squeeze\n");
  EXPECT_EQ(e3.line(), 1u);
  ConfigError e4 = config_error("[nowhere]\nx = 1\n");
  EXPECT_EQ(e4.line(), 1u);
  ConfigError e5 = config_error("[run]\nsuites = squeeze, bogus\n");
  EXPECT_EQ(e5.column(), 19u);
  ConfigError e6 = config_error("[squeeze]\nsamples = 2.5\n");
  EXPECT_EQ(e6.line(), 2u);
  config_error("[squeeze]\nh = 1\nh = 2\n");
  config_error("h = 1\n");
  config_error("[squeeze]\nh 5\n");
  config_error("[squeeze]\nh = \"5\n");
  config_error("[squeeze]\nh = sin(\n");
  config_error("[run]\nseed = -3\n");
  config_error("[custom]\ncoordinates = \"x, y\"\nalpha.x = \"y\"\n");
  config_error("[custom]\ncoordinates = \"x, y, z\"\nalpha.w = \"1\"\n");
  ConfigError e7 = config_error("[custom]\ncoordinates = \"x, y, z\"\nalpha.z = \"1 + w\"\n");
  EXPECT_EQ(e7.line(), 3u);
  EXPECT_EQ(e7.column(), 11u);
  config_error("[legendrian]\nbump_lo = 0.8\nbump_hi = 0.2\n");
}

TEST(Config, GoldenFilesLoad) {
  EXPECT_NO_THROW(load_scenario_file(kData + "/pass.ini"));
  EXPECT_NO_THROW(load_scenario_file(kData + "/fail.ini"));
  EXPECT_THROW(load_scenario_file(kData + "/error.ini"), ConfigError);
  EXPECT_THROW(load_scenario_file(kData + "/missing.ini"), IoError);
}

TEST(Suites, ExitCodeContract) {
  Report p, f, e;
  f.status = Status::Fail;
  e.status = Status::Error;
  EXPECT_EQ(exit_code({p, p}), 0);
  EXPECT_EQ(exit_code({p, f}), 1);
  EXPECT_EQ(exit_code({f, e, p}), 2);
  EXPECT_EQ(exit_code({}), 0);
}

TEST(Suites, ErrorsBecomeReports) {
  ScenarioConfig c;
  c.suites = {"unwrap"};
  c.unwrap.n = {2};
  c.unwrap.hbars = std::vector<double>{0.5};
  auto reports = run_scenario(c);
  ASSERT_EQ(reports.size(), 1u);
  EXPECT_EQ(reports[0].status, Status::Error);
  EXPECT_FALSE(reports[0].message.empty());
}

TEST(Cli, GoldenExitCodes) {
  EXPECT_EQ(run("run --config " + kData + "/pass.ini"), 0);
  EXPECT_EQ(run("run --config " + kData + "/fail.ini"), 1);
  EXPECT_EQ(run("run --config " + kData + "/error.ini"), 2);
  EXPECT_EQ(run("run --config " + kData + "/missing.ini"), 2);
  EXPECT_EQ(run("run --suite nonsense"), 2);
  EXPECT_EQ(run("table --kind nonsense"), 2);
  EXPECT_EQ(run("frobnicate"), 2);
}

TEST(Cli, FailReportHasWitness) {
  fs::path out = tmp("fail.json");
  ASSERT_EQ(run("run --config " + kData + "/fail.ini --json " + out.string()), 1);
  json j = json::parse(slurp(out));
  EXPECT_EQ(j["schema"], 1);
  ASSERT_EQ(j["reports"].size(), 1u);
  const json& r = j["reports"][0];
  EXPECT_EQ(r["status"], "FAIL");
  EXPECT_TRUE(r["witness"].is_array());
  EXPECT_GT(r["metrics"]["max_fiber_factor"].get<double>(), 1.01);
  for (const char* key : {"check", "status", "parameters", "samples", "max_residual", "witness", "wall_time", "seed"})
    EXPECT_TRUE(r.contains(key)) << key;
}

TEST(Cli, ReproducibleJson) {
  fs::path a = tmp("a.json"), b = tmp("b.json"), c = tmp("c.json");
  ASSERT_EQ(run("run --config " + kData + "/pass.ini --json " + a.string()), 0);
  ASSERT_EQ(run("run --config " + kData + "/pass.ini --json " + b.string()), 0);
  ASSERT_EQ(run("run --config " + kData + "/pass.ini --parallel --json " + c.string()), 0);
  json ja = json::parse(slurp(a)), jb = json::parse(slurp(b)), jc = json::parse(slurp(c));
  EXPECT_EQ(without_wall_time(ja).dump(2), without_wall_time(jb).dump(2));
  EXPECT_EQ(without_wall_time(ja).dump(2), without_wall_time(jc).dump(2));
  // sorted by check name
  std::vector<std::string> names;
  for (const auto& r : ja["reports"]) names.push_back(r["check"]);
  EXPECT_TRUE(std::is_sorted(names.begin(), names.end()));
  EXPECT_GE(names.size(), 20u);
}

TEST(Cli, SeedPrecedence) {
  fs::path a = tmp("s1.json"), b = tmp("s2.json"), c = tmp("s3.json");
  const std::string base = "run --suite squeeze --config " + kData + "/fail.ini --json ";
  run(base + a.string());
  run(base + b.string(), "CONTACT_FORGE_SEED=99");
  run(base + c.string() + " --seed 5", "CONTACT_FORGE_SEED=99");
  EXPECT_EQ(json::parse(slurp(a))["reports"][0]["seed"], 7);
  EXPECT_EQ(json::parse(slurp(b))["reports"][0]["seed"], 99);
  EXPECT_EQ(json::parse(slurp(c))["reports"][0]["seed"], 5);
  EXPECT_NE(json::parse(slurp(a))["reports"][0]["witness"], json::parse(slurp(b))["reports"][0]["witness"]);
  EXPECT_EQ(run("run --suite constants --seed abc"), 2);
}

TEST(Cli, GScanCrossings) {
  fs::path out = tmp("g.csv");
  ASSERT_EQ(run("table --kind g_scan --points 10000 --out " + out.string()), 0);
  std::string header;
  auto rows = read_csv(out, header);
  EXPECT_EQ(header, "r,g");
  ASSERT_EQ(rows.size(), 10000u);
  EXPECT_EQ(rows.front()[0], 0.0);
  EXPECT_NEAR(rows.back()[0], std::numbers::pi + 0.1, 1e-15);
  double gmax = -1;
  std::vector<double> crossings;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    gmax = std::max(gmax, rows[k][1]);
    // 17 significant digits round-trip exactly
    EXPECT_EQ(rows[k][1], scaling_factor(rows[k][0]));
    if (k && (rows[k - 1][1] > 0) != (rows[k][1] > 0)) {
      const double r0 = rows[k - 1][0], r1 = rows[k][0], g0 = rows[k - 1][1], g1 = rows[k][1];
      crossings.push_back(r0 - g0 * (r1 - r0) / (g1 - g0));
    }
  }
  EXPECT_GT(gmax, 0);
  EXPECT_LT(gmax, 0.1);
  ASSERT_EQ(crossings.size(), 2u);
  EXPECT_NEAR(crossings[0], std::numbers::pi / 2, 1e-6);
  EXPECT_NEAR(crossings[1], find_r_M(), 1e-6);
}

TEST(Cli, FlowPortraitAndGScan) {
  fs::path out = tmp("portrait.csv");
  ASSERT_EQ(run("table --kind flow_portrait --points 101 --radii 0.5,2.5 --out " + out.string()), 0);
  std::string header;
  auto rows = read_csv(out, header);
  EXPECT_EQ(header, "r0,t,r");
  ASSERT_EQ(rows.size(), 202u);
  EXPECT_EQ(rows.back()[0], 2.5);
  EXPECT_EQ(rows.back()[1], 50.0);
  EXPECT_NEAR(rows.back()[2], std::numbers::pi, 1e-4);
  EXPECT_LT(rows[100][2], 1e-3);

  fs::path g = tmp("G.csv");
  ASSERT_EQ(run("table --kind G_scan --points 200 --out " + g.string()), 0);
  auto grow = read_csv(g, header);
  EXPECT_EQ(header, "r,maxG,t_at_max");
  ASSERT_EQ(grow.size(), 200u);
  double best = 0;
  for (const auto& r : grow) best = std::max(best, r[1]);
  EXPECT_LT(best, std::log(7.0 / 6.0));
}

TEST(Cli, Constants) {
  fs::path out = tmp("constants.json");
  const int raw = std::system((kCli + " constants > " + out.string()).c_str());
  ASSERT_EQ(WEXITSTATUS(raw), 0);
  json j = json::parse(slurp(out));
  EXPECT_NEAR(j["r_M"].get<double>(), 2.0288, 5e-4);
  EXPECT_NEAR(j["ln76"].get<double>(), std::log(7.0 / 6.0), 1e-15);
  EXPECT_LT(j["sharp_bound"].get<double>(), j["ln76"].get<double>());
  EXPECT_LT(j["g_max"].get<double>(), 0.1);
}
