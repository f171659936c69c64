#pragma once

// Helpers for driving the command-line tool from tests.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <json.hpp>

#include "bisimkit/toml_lite.hpp"

namespace cli_support {

namespace fs = std::filesystem;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::string quote(const std::string& s) {
  std::string q = "'";
  for (char c : s) q += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return q + "'";
}

// Runs the tool with the given arguments; stdout and stderr are captured
// through files next to capture_stem.
inline RunResult run_tool(const fs::path& tool, const std::vector<std::string>& args, const fs::path& capture_stem) {
  fs::create_directories(capture_stem.parent_path());
  const fs::path out = capture_stem.string() + ".stdout";
  const fs::path err = capture_stem.string() + ".stderr";
  std::string cmd = quote(tool.string());
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote(out.string()) + " 2>" + quote(err.string());
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

// Copy of a config document as JSON with extra keys set, e.g.
// {"eval": {"checkpoint": "/abs/path"}}. Relative paths in the template are
// not rewritten, so templates used here should not contain any.
inline fs::path derive_config(const fs::path& templ, const nlohmann::json& patch, const fs::path& dest) {
  nlohmann::json doc = bisimkit::load_config_document(templ);
  doc.merge_patch(patch);
  fs::create_directories(dest.parent_path());
  std::ofstream(dest) << doc.dump(2) << '\n';
  return dest;
}

inline std::vector<fs::path> relative_files(const fs::path& root) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root));
  std::sort(files.begin(), files.end());
  return files;
}

// Empty when both trees hold the same file names with identical bytes;
// otherwise a description of the first difference.
inline std::string compare_trees(const fs::path& a, const fs::path& b) {
  const auto fa = relative_files(a);
  const auto fb = relative_files(b);
  if (fa != fb) return "file lists differ between " + a.string() + " and " + b.string();
  if (fa.empty()) return "no files written under " + a.string();
  for (const auto& f : fa)
    if (slurp(a / f) != slurp(b / f)) return "bytes differ in " + f.string();
  return {};
}

}  // namespace cli_support
