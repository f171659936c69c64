#include <string>
#include <vector>

#include "acceptance.hpp"
#include "cli_support.hpp"

namespace acceptance {

namespace fs = std::filesystem;

namespace {

struct Rerun {
  std::string label;
  std::string command;
  fs::path config;
};

// Runs the command twice into separate directories; empty on success.
std::string rerun_identical(const Rerun& r, const fs::path& root) {
  std::vector<fs::path> outs;
  std::vector<std::string> stdouts;
  for (const char* tag : {"a", "b"}) {
    const fs::path out = root / r.label / tag;
    fs::remove_all(out);
    const auto res = cli_support::run_tool(paths().tool,
                                           {r.command, "--config", r.config.string(), "--seed", "7", "--out", out.string()},
                                           root / "logs" / (r.label + "_" + tag));
    if (res.exit_code != 0) return r.label + " exited with " + std::to_string(res.exit_code) + ": " + res.err;
    outs.push_back(out);
    stdouts.push_back(res.out);
  }
  if (stdouts[0] != stdouts[1]) return r.label + ": stdout differs";
  return cli_support::compare_trees(outs[0], outs[1]);
}

Outcome determinism() {
  Outcome o;
  const fs::path root = paths().work / "determinism";
  const fs::path data = paths().test_data;

  // Checkpoint producers first; later commands read run "a" of these.
  std::vector<Rerun> plan{
      {"exact_grid", "exact", paths().configs / "exact_grid.toml"},
      {"exact_factored", "exact", paths().configs / "exact_factored.toml"},
      {"exact_file", "exact", data / "exact_from_file.toml"},
      {"train_grid", "train", data / "grid_short.toml"},
      {"train_point_mass", "train", data / "point_mass_short.toml"},
  };
  const fs::path grid_eval = cli_support::derive_config(
      data / "grid_short.toml", {{"eval", {{"checkpoint", (root / "train_grid" / "a" / "checkpoint.json").string()}}}},
      root / "configs" / "grid_eval.json");
  const fs::path pm_eval = cli_support::derive_config(
      data / "point_mass_short.toml",
      {{"eval", {{"checkpoint", (root / "train_point_mass" / "a" / "checkpoint.json").string()}}}},
      root / "configs" / "point_mass_eval.json");
  plan.push_back({"eval_corr", "eval-corr", grid_eval});
  plan.push_back({"eval_inv_grid", "eval-inv", grid_eval});
  plan.push_back({"eval_inv_point_mass", "eval-inv", pm_eval});
  plan.push_back({"eval_transfer", "eval-transfer", pm_eval});

  int identical = 0;
  for (const auto& r : plan) {
    const std::string diff = rerun_identical(r, root);
    identical += diff.empty();
    o.notes.push_back(r.label + " (" + r.command + "): " + (diff.empty() ? "identical" : diff));
  }
  o.passed = identical == static_cast<int>(plan.size());
  o.detail = std::to_string(identical) + "/" + std::to_string(plan.size()) +
             " reruns byte-identical across all written files and stdout";
  return o;
}

}  // namespace

std::vector<Criterion> determinism_criteria() { return {{"determinism of every subcommand", 0.0, determinism}}; }

}  // namespace acceptance
