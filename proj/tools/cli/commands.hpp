#pragma once

// The four batch commands. Each returns a report (deterministic JSON, no
// timestamps) plus any CSV/JSON side files; `run` writes them to the output
// directory together with timing.json and maps the outcome to an exit code.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "spec.hpp"

namespace fredholm::cli {

struct RunOptions {
  std::filesystem::path spec;
  std::filesystem::path out = "fredholm-out";
  std::size_t t_samples = 33;
  std::size_t grid_refine = 4;
  double eps_gap_tol = 1e-6;
  std::uint64_t seed = 0;
  bool emit_frames = false;
  bool emit_branches = false;
  // section
  std::optional<std::filesystem::path> section;
  bool auto_section = false;
  std::optional<std::size_t> query_sample;
  std::optional<double> query_s;
  // flow, section, polarize
  std::optional<std::filesystem::path> atlas;
};

enum class Outcome { ok, obstruction, invariant_failure };

struct CommandResult {
  Json report;
  Outcome outcome = Outcome::ok;
  std::map<std::string, std::string> files;  // name -> contents
};

CommandResult cmd_flow(const RunOptions& options);
CommandResult cmd_suspend(const RunOptions& options);
CommandResult cmd_section(const RunOptions& options);
CommandResult cmd_polarize(const RunOptions& options);

/// Runs `command`, writes report.json, timing.json and side files into
/// options.out. Exit codes: 0 success, 2 obstruction, 1 error or failed
/// invariant. Errors are printed to stderr.
int run(const std::string& command, const RunOptions& options);

/// FNV-1a, 64 bit, printed as 16 hex digits.
std::string fnv1a64(const std::string& bytes);

}  // namespace fredholm::cli
