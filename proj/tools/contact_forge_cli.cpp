// contact-forge: batch verification front-end.
//
//   contact-forge run [--config PATH] [--suite NAME]... [--seed N] [--parallel] [--json PATH|-]
//   contact-forge table --kind g_scan|G_scan|flow_portrait [--points N] [--out PATH]
//   contact-forge constants

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "contact_forge/config.hpp"
#include "contact_forge/flows.hpp"
#include "contact_forge/suites.hpp"

namespace {

using namespace cforge;

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int run_command(const std::string& config_path, const std::vector<std::string>& suites, const std::string& seed_flag,
                bool parallel, const std::string& json_path) {
  ScenarioConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_scenario_file(config_path);
    if (const char* env = std::getenv("CONTACT_FORGE_SEED"); env && *env) {
      try {
        cfg.seed = detail::parse_seed(env, 0, 0);
      } catch (const ConfigError&) {
        throw ConfigError("CONTACT_FORGE_SEED must be a non-negative integer", 0, 0);
      }
    }
    if (!seed_flag.empty()) {
      try {
        cfg.seed = detail::parse_seed(seed_flag, 0, 0);
      } catch (const ConfigError&) {
        throw ConfigError("--seed must be a non-negative integer", 0, 0);
      }
    }
    if (!suites.empty()) {
      cfg.suites.clear();
      for (const auto& s : suites) {
        if (s == "all") continue;
        const auto& names = suite_names();
        if (std::find(names.begin(), names.end(), s) == names.end()) throw ConfigError("unknown suite '" + s + "'", 0, 0);
        cfg.suites.push_back(s);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  const auto reports = run_scenario(cfg, parallel);
  const int code = exit_code(reports);
  const std::string body = reports_json(reports).dump(2) + "\n";
  if (json_path == "-") {
    std::cout << body;
  } else {
    for (const auto& r : reports) {
      std::cout << to_string(r.status) << "  " << r.check << "  samples=" << r.samples
                << "  max_residual=" << num(r.max_residual);
      if (!r.message.empty()) std::cout << "  " << r.message;
      std::cout << "\n";
    }
    if (!json_path.empty()) {
      std::ofstream out(json_path, std::ios::binary);
      if (!out) {
        std::cerr << "error: cannot write '" << json_path << "'\n";
        return 2;
      }
      out << body;
    }
  }
  return code;
}

int table_command(const std::string& kind, int points, const std::string& out_path, double delta,
                  const std::vector<double>& radii, double t_end) {
  std::ostringstream csv;
  if (kind == "g_scan") {
    csv << "r,g\n";
    const double top = std::numbers::pi + delta;
    for (int k = 0; k < points; ++k) {
      const double r = top * k / (points - 1);
      csv << num(r) << "," << num(scaling_factor(r)) << "\n";
    }
  } else if (kind == "G_scan") {
    csv << "r,maxG,t_at_max\n";
    for (const auto& row : sup_G_scan(points, {}, 1, delta).rows)
      csv << num(row.r) << "," << num(row.max_G) << "," << num(row.t_at_max) << "\n";
  } else if (kind == "flow_portrait") {
    csv << "r0,t,r\n";
    for (const auto& row : flow_portrait(radii, t_end, points))
      csv << num(row.r0) << "," << num(row.t) << "," << num(row.r) << "\n";
  } else {
    throw UnknownKind("unknown table kind '" + kind + "'");
  }
  if (out_path.empty() || out_path == "-") {
    std::cout << csv.str();
  } else {
    std::ofstream out(out_path, std::ios::binary);
    if (!out) throw IoError("cannot write '" + out_path + "'");
    out << csv.str();
    if (!out) throw IoError("write to '" + out_path + "' failed");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification of contact-geometric constructions"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run verification suites");
  std::string config_path, seed_flag, json_path;
  std::vector<std::string> suites;
  bool parallel = false;
  run->add_option("--config", config_path, "Scenario config file");
  run->add_option("--suite", suites, "Suite to run (repeatable)")->take_all();
  run->add_option("--seed", seed_flag, "Random seed (overrides config and CONTACT_FORGE_SEED)");
  run->add_flag("--parallel", parallel, "Run suites concurrently");
  run->add_option("--json", json_path, "Write JSON reports to PATH ('-' for stdout)");

  auto* table = app.add_subcommand("table", "Emit a CSV table");
  std::string kind, out_path;
  int points = 1000;
  double delta = kDefaultDelta, t_end = 50.0;
  std::vector<double> radii{0.5, 1.0, 1.5, 1.6, 1.8, 2.0, 2.5, 3.0, 3.2};
  table->add_option("--kind", kind, "g_scan, G_scan or flow_portrait")->required();
  table->add_option("--points", points, "Grid points (per trajectory for flow_portrait)")->check(CLI::Range(2, 100000000));
  table->add_option("--out", out_path, "Output CSV path (stdout if omitted)");
  table->add_option("--delta", delta, "Radial margin beyond pi")->check(CLI::PositiveNumber);
  table->add_option("--radii", radii, "Initial radii for flow_portrait")->delimiter(',');
  table->add_option("--t-end", t_end, "Final time for flow_portrait")->check(CLI::PositiveNumber);

  app.add_subcommand("constants", "Print r_M, the sharp bound, ln(7/6) and max g as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) return run_command(config_path, suites, seed_flag, parallel, json_path);
    if (table->parsed()) return table_command(kind, points, out_path, delta, radii, t_end);
    std::cout << to_json(compute_constants()).dump(2) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
