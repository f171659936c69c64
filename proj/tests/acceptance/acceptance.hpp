#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace acceptance {

struct Outcome {
  bool passed = false;
  std::string detail;               // one-line summary of the measured quantity
  std::vector<std::string> notes;   // per-seed or per-case lines printed above the verdict
};

struct Criterion {
  std::string name;
  double limit_seconds = 0.0;  // 0 when no runtime limit applies
  std::function<Outcome()> run;
};

struct Paths {
  std::filesystem::path configs;    // shipped experiment configs
  std::filesystem::path test_data;  // short configs used by the rerun checks
  std::filesystem::path tool;       // command-line executable
  std::filesystem::path work;       // scratch space, wiped at start
};

const Paths& paths();

std::vector<Criterion> exact_criteria();
std::vector<Criterion> gradient_criteria();
std::vector<Criterion> learning_criteria();
std::vector<Criterion> determinism_criteria();

std::string fmt(double v, int precision = 4);

}  // namespace acceptance
