#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "cli_support.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using cli_support::run_tool;

namespace {

const fs::path kTool = BISIMKIT_TOOL;
const fs::path kData = BISIMKIT_TEST_DATA_DIR;
const fs::path kWork = BISIMKIT_CLI_WORK;

// Keys holding machine-specific absolute paths.
const std::set<std::string> kPathKeys{"checkpoint", "mdp"};

cli_support::RunResult run(const std::string& label, const std::vector<std::string>& args) {
  return run_tool(kTool, args, kWork / "logs" / label);
}

// Empty when `actual` matches `golden` up to relative tolerance `rtol` on
// numbers; otherwise the JSON pointer of the first mismatch.
std::string json_diff(const json& golden, const json& actual, double rtol, const std::string& where = "") {
  if (golden.is_number() && actual.is_number()) {
    const double g = golden.get<double>(), a = actual.get<double>();
    if (g == a) return {};
    if (std::abs(g - a) <= rtol * std::max({std::abs(g), std::abs(a), 1e-12})) return {};
    std::ostringstream os;
    os.precision(17);
    os << where << ": golden " << g << ", actual " << a;
    return os.str();
  }
  if (golden.type() != actual.type()) return where + ": type differs";
  if (golden.is_object()) {
    for (auto it = golden.begin(); it != golden.end(); ++it) {
      if (kPathKeys.count(it.key())) continue;
      if (!actual.contains(it.key())) return where + "/" + it.key() + ": missing";
      auto d = json_diff(it.value(), actual.at(it.key()), rtol, where + "/" + it.key());
      if (!d.empty()) return d;
    }
    for (auto it = actual.begin(); it != actual.end(); ++it)
      if (!golden.contains(it.key())) return where + "/" + it.key() + ": unexpected";
    return {};
  }
  if (golden.is_array()) {
    if (golden.size() != actual.size()) return where + ": array length differs";
    for (std::size_t i = 0; i < golden.size(); ++i) {
      auto d = json_diff(golden[i], actual[i], rtol, where + "/" + std::to_string(i));
      if (!d.empty()) return d;
    }
    return {};
  }
  return golden == actual ? std::string() : where + ": value differs";
}

// Compares against tests/data/golden/<name>.json. With BISIMKIT_UPDATE_GOLDENS
// set, rewrites the golden file instead.
void check_golden(const std::string& name, const json& summary, double rtol) {
  const fs::path golden = kData / "golden" / (name + ".json");
  if (std::getenv("BISIMKIT_UPDATE_GOLDENS")) {
    fs::create_directories(golden.parent_path());
    std::ofstream(golden) << summary.dump(2) << '\n';
    MESSAGE("updated ", golden.string());
    return;
  }
  REQUIRE_MESSAGE(fs::exists(golden), "missing golden file ", golden.string());
  const json expected = json::parse(cli_support::slurp(golden));
  const std::string diff = json_diff(expected, summary, rtol);
  CHECK_MESSAGE(diff.empty(), name, " summary differs from golden: ", diff);
}

json run_ok(const std::string& label, const std::string& command, const fs::path& config, const fs::path& out,
            const std::string& seed = "") {
  std::vector<std::string> args{command, "--config", config.string(), "--out", out.string()};
  if (!seed.empty()) {
    args.push_back("--seed");
    args.push_back(seed);
  }
  fs::remove_all(out);
  const auto r = run(label, args);
  REQUIRE_MESSAGE(r.exit_code == 0, label, " failed: ", r.err);
  const json printed = json::parse(r.out);
  const json written = json::parse(cli_support::slurp(out / "summary.json"));
  CHECK(printed == written);
  CHECK(written["schema"] == "bisimkit-summary/1");
  CHECK(written["command"] == command);
  return written;
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  std::getline(in, line);
  return line;
}

fs::path train_checkpoint(const std::string& config_name) {
  const fs::path out = kWork / ("source_" + fs::path(config_name).stem().string());
  if (!fs::exists(out / "checkpoint.json")) run_ok("source_" + config_name, "train", kData / config_name, out);
  return out / "checkpoint.json";
}

fs::path eval_config(const std::string& config_name) {
  return cli_support::derive_config(kData / config_name,
                                    {{"eval", {{"checkpoint", train_checkpoint(config_name).string()}}}},
                                    kWork / "configs" / (fs::path(config_name).stem().string() + ".json"));
}

}  // namespace

TEST_CASE("invalid configs and arguments exit with code 2") {
  for (const char* name : {"unknown_key.toml", "bad_type.toml", "bad_value.toml", "bad_syntax.toml"}) {
    const auto r = run(name, {"train", "--config", (kData / name).string(), "--out", (kWork / "bad").string()});
    CHECK_MESSAGE(r.exit_code == 2, name);
    CHECK_MESSAGE(r.err.find("config error") != std::string::npos, name, ": ", r.err);
  }
  CHECK(run("missing", {"exact", "--config", (kData / "missing.toml").string(), "--out", "x"}).exit_code == 2);
  CHECK(run("no_out", {"exact", "--config", (kData / "grid_short.toml").string()}).exit_code == 2);
  CHECK(run("no_command", {}).exit_code == 2);
  CHECK(run("bad_command", {"frobnicate"}).exit_code == 2);
  CHECK(run("bad_seed", {"exact", "--config", (kData / "grid_short.toml").string(), "--out", "x", "--seed", "abc"})
            .exit_code == 2);
  // eval commands need a checkpoint; exact needs a tabular environment.
  CHECK(run("no_checkpoint", {"eval-corr", "--config", (kData / "grid_short.toml").string(), "--out",
                              (kWork / "bad").string()})
            .exit_code == 2);
  CHECK(run("exact_point_mass", {"exact", "--config", (kData / "point_mass_short.toml").string(), "--out",
                                 (kWork / "bad").string()})
            .exit_code == 2);
}

TEST_CASE("non-finite training exits with code 3") {
  const auto r = run("blowup", {"train", "--config", (kData / "numerical_blowup.toml").string(), "--out",
                                (kWork / "blowup").string()});
  CHECK(r.exit_code == 3);
  CHECK(r.err.find("numerical error") != std::string::npos);
  CHECK(r.err.find("at step") != std::string::npos);
}

TEST_CASE("exact on an MDP file") {
  const fs::path out = kWork / "exact_file";
  const json s = run_ok("exact_file", "exact", kData / "exact_from_file.toml", out);
  check_golden("exact_from_file", s, 1e-9);
  CHECK(s["bounds"]["all_hold"] == true);
  for (const char* f : {"metric.csv", "metric_onpolicy.csv", "partition.csv", "bounds.json"})
    CHECK_MESSAGE(fs::exists(out / f), f);
  CHECK(first_line(out / "metric.csv") == "i,j,d");
}

TEST_CASE("train writes every artefact and honours --seed") {
  const fs::path out = kWork / "train_grid";
  const json s = run_ok("train_grid", "train", kData / "grid_short.toml", out, "3");
  CHECK(s["seed"] == 3);
  check_golden("train_grid_short", s, 1e-6);
  CHECK(first_line(out / "train.csv") == "step,episode,return,critic_loss,actor_loss,alpha,encoder_loss,dyn_loss,rew_loss");
  CHECK(first_line(out / "eval.csv") == "step,episode,mean_return");
  CHECK(first_line(out / "latents.csv").rfind("episode,step,obs_id,z_0", 0) == 0);
  CHECK(json::parse(cli_support::slurp(out / "checkpoint.json")).contains("env"));

  const json other = run_ok("train_grid_seed4", "train", kData / "grid_short.toml", kWork / "train_grid_4", "4");
  CHECK(other["evaluations"] != s["evaluations"]);
}

TEST_CASE("eval-corr and eval-inv summaries") {
  const fs::path cfg = eval_config("grid_short.toml");
  const json corr = run_ok("eval_corr", "eval-corr", cfg, kWork / "eval_corr");
  check_golden("eval_corr_grid_short", corr, 1e-6);
  CHECK(corr["n_states"] == 80);
  CHECK(std::abs(corr["pearson"].get<double>()) <= 1.0);

  const json inv = run_ok("eval_inv", "eval-inv", cfg, kWork / "eval_inv");
  check_golden("eval_inv_grid_short", inv, 1e-6);
  CHECK(inv["ratio"].get<double>() >= 0.0);
}

TEST_CASE("eval-transfer summary") {
  const fs::path cfg = eval_config("point_mass_short.toml");
  const fs::path out = kWork / "eval_transfer";
  const json s = run_ok("eval_transfer", "eval-transfer", cfg, out);
  check_golden("eval_transfer_point_mass_short", s, 1e-6);
  CHECK(s["ancestor_premise_holds"] == true);
  CHECK(s["swap"].is_object());
  CHECK(fs::exists(out / "frozen_curve.csv"));
  CHECK(fs::exists(out / "scratch_curve.csv"));
}

TEST_CASE("reruns are byte-identical") {
  const fs::path a = kWork / "rerun_a", b = kWork / "rerun_b";
  run_ok("rerun_a", "train", kData / "grid_short.toml", a, "5");
  run_ok("rerun_b", "train", kData / "grid_short.toml", b, "5");
  CHECK(cli_support::compare_trees(a, b) == "");
}
