#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bisimkit/config.hpp"
#include "bisimkit/errors.hpp"
#include "bisimkit/harness.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bisimulation metrics and bisimulation-based representation learning"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  const char* commands[][2] = {
      {"exact", "exact metrics, partition and bound checks for a tabular MDP"},
      {"train", "train an agent and write train.csv, eval.csv, latents.csv and a checkpoint"},
      {"eval-corr", "correlate learned distances with the exact on-policy metric"},
      {"eval-inv", "latent distance ratio of distractor-only to task-only observation pairs"},
      {"eval-transfer", "SAC on a reward variant with a frozen encoder versus from scratch"},
  };
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "TOML or JSON experiment config")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "overrides run.seed");
    sub->add_option("--out", out_dir, "output directory")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  try {
    bisimkit::ExperimentConfig config = bisimkit::load_experiment_config(config_path);
    if (seed) config.run.seed = *seed;
    const auto summary = bisimkit::run_command(command, config, out_dir);
    std::cout << summary.dump(2) << '\n';
    return 0;
  } catch (const bisimkit::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const bisimkit::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
