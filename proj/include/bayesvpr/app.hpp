#pragma once

// Command implementations behind the bayesvpr executable.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bayesvpr/config.hpp"
#include "bayesvpr/dataset.hpp"
#include "bayesvpr/error.hpp"
#include "bayesvpr/evaluation.hpp"

namespace bayesvpr {

enum ExitCode : int {
  kExitOk = 0,
  kExitUnexpected = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitNotLocalized = 4,
};

int exit_code_for(ErrorCode code);

/// Flag values that take precedence over the config file.
struct CliOverrides {
  std::optional<std::string> method;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> trials;
  std::optional<std::size_t> jobs;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> tolerance;
};

/// Loads the config (defaults when `path` is empty) and applies overrides.
RunConfig resolve_config(const std::filesystem::path& path, const CliOverrides& overrides);

/// --out, then run.out, then $BAYESVPR_OUT, then the working directory.
std::filesystem::path output_dir(const RunConfig& cfg);

/// Map, the query traverse with the configured odometry, and the trials.
struct PreparedRun {
  LocalizationMap map;
  QueryTraverse query;
  std::vector<TrialSlice> trials;
  LocalizerConfig localizer;  // with the velocity range resolved
};

PreparedRun prepare_run(const RunConfig& cfg);

/// Particle seed for one trial.
std::uint64_t trial_seed(std::uint64_t run_seed, std::size_t trial_id);

struct EvaluationResult {
  PrCurve curve;
  SummaryRow summary;
  std::vector<TrialTrace> traces;
};

EvaluationResult evaluate(const RunConfig& cfg, const PreparedRun& run);

// Commands. Each returns an exit code; errors go to `err` as one line.
int cmd_generate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err);
int cmd_localize(const RunConfig& cfg, std::size_t trial_index, std::ostream& out, std::ostream& err);
int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace bayesvpr
