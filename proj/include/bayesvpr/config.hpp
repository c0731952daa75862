#pragma once

// Run configuration: INI-style sections of key = value lines. Every key has a
// default, so an empty file is a complete configuration.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bayesvpr/dataset.hpp"
#include "bayesvpr/localizers.hpp"

namespace bayesvpr {

enum class OdometrySource { kSensor, kGroundTruth };

struct RunConfig {
  // [run]
  Method method = Method::kTopological;
  std::size_t num_trials = 500;
  std::size_t query_len = 30;
  std::uint64_t seed = 1;
  std::size_t jobs = 0;  // 0 = one per hardware thread
  std::string tolerance = "5m30deg";
  std::string embedding = "synthetic";  // label for summary.csv
  OdometrySource odometry = OdometrySource::kSensor;
  std::filesystem::path out_dir;  // empty: $BAYESVPR_OUT, else "."

  // [data]
  bool synthetic = true;
  std::filesystem::path map_prefix;
  std::filesystem::path query_prefix;
  std::filesystem::path odom_path;
  std::filesystem::path trials_path;  // optional fixed trial offsets
  std::size_t traverse = 0;           // which synthetic query traverse

  // [world]
  SyntheticWorldConfig world;

  // [measurement], [topological], [mcl], [seqmatch]
  LocalizerConfig localizer;
  double seq_v_min = 0.8;  // multiples of the nominal slope
  double seq_v_max = 1.5;
  std::optional<double> nominal_slope;  // unset: estimated from odometry

  // [baseline]
  double baseline_threshold = 1e300;  // acceptance for single/seqmatch in `localize`

  // [bench]
  std::size_t bench_repetitions = 5;
  std::size_t bench_trials = 3;
  std::vector<Method> bench_methods{Method::kTopological, Method::kMcl};
};

/// Throws ConfigInvalid naming the offending key.
RunConfig parse_config(std::istream& in);
RunConfig load_config(const std::filesystem::path& path);  // ParseError if unreadable
void validate(const RunConfig& cfg);

/// Writes every key with its effective value; parsing the dump gives the same
/// configuration.
void dump_config(std::ostream& out, const RunConfig& cfg);

}  // namespace bayesvpr
