#include <chrono>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "acceptance.hpp"

namespace acceptance {

namespace {
Paths g_paths;
}

const Paths& paths() { return g_paths; }

std::string fmt(double v, int precision) {
  std::ostringstream os;
  os.precision(precision);
  os << v;
  return os.str();
}

}  // namespace acceptance

int main(int argc, char** argv) {
  using namespace acceptance;
  CLI::App app{"Acceptance criteria"};
  std::string only;
  std::string report_path;
  std::string work = BISIMKIT_ACCEPTANCE_WORK;
  app.add_option("--only", only, "run only criteria whose name contains this text");
  app.add_option("--report", report_path, "write a JSON report of all verdicts");
  app.add_option("--work", work, "scratch directory");
  CLI11_PARSE(app, argc, argv);

  g_paths.configs = BISIMKIT_CONFIG_DIR;
  g_paths.test_data = BISIMKIT_TEST_DATA_DIR;
  g_paths.tool = BISIMKIT_TOOL;
  g_paths.work = work;
  std::filesystem::remove_all(g_paths.work);
  std::filesystem::create_directories(g_paths.work);

  std::vector<Criterion> all;
  for (auto group : {exact_criteria, gradient_criteria, learning_criteria, determinism_criteria})
    for (auto& c : group()) all.push_back(std::move(c));

  int passed = 0, ran = 0;
  nlohmann::json report = nlohmann::json::array();
  for (const auto& c : all) {
    if (!only.empty() && c.name.find(only) == std::string::npos) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.passed = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_seconds <= 0.0 || secs <= c.limit_seconds;
    const bool ok = o.passed && in_time;
    for (const auto& n : o.notes) std::cout << "    " << n << '\n';
    std::cout << (ok ? "[PASS] " : "[FAIL] ") << c.name << ": " << o.detail << " (" << fmt(secs, 3) << " s";
    if (c.limit_seconds > 0.0) std::cout << ", limit " << fmt(c.limit_seconds, 6) << " s";
    if (!in_time) std::cout << ", OVER TIME";
    std::cout << ")" << std::endl;
    passed += ok;
    report.push_back({{"criterion", c.name},
                      {"passed", ok},
                      {"detail", o.detail},
                      {"notes", o.notes},
                      {"seconds", secs},
                      {"limit_seconds", c.limit_seconds}});
  }
  std::cout << passed << "/" << ran << " criteria passed" << std::endl;
  if (!report_path.empty()) std::ofstream(report_path) << report.dump(2) << '\n';
  return ran > 0 && passed == ran ? 0 : 1;
}
