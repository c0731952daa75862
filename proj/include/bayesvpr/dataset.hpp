#pragma once

// Synthetic traverses, dataset files and trial sampling.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "bayesvpr/geometry.hpp"
#include "bayesvpr/map_store.hpp"
#include "bayesvpr/mcl_filter.hpp"

namespace bayesvpr {

/// Appearance of [src_start, src_end) is repeated on [dst_start, dst_start + length).
struct AliasSegment {
  double src_start = 0.0;
  double src_end = 0.0;
  double dst_start = 0.0;

  double length() const { return src_end - src_start; }
};

struct SyntheticWorldConfig {
  double route_length = 1000.0;  // meters
  double ref_spacing = 0.5;
  double query_spacing = 3.0;
  double query_spacing_jitter = 0.0;  // each gap drawn from query_spacing +- jitter
  std::size_t query_len = 30;
  std::size_t embed_dim = 128;
  double appearance_noise_sigma = 0.0;  // per embedding component
  // Log-scale std of a slowly varying factor on the noise level along each
  // query traverse (changing conditions); 0 keeps the level constant.
  double noise_variation = 0.0;
  double noise_variation_length = 50.0;  // meters
  double appearance_length_scale = 2.0;  // meters; correlation length of appearance
  std::vector<AliasSegment> aliasing_segments;
  // Extra aliased pairs placed at random, each `random_alias_length` meters long.
  std::size_t random_alias_pairs = 0;
  double random_alias_length = 60.0;
  Vector6d odom_noise_sigma = Vector6d::Zero();  // body-frame twist std per step
  std::size_t num_query_traverses = 1;
  double query_lateral_offset = 0.0;  // meters to the left of the reference path
  std::uint64_t rng_seed = 1;
};

void validate(const SyntheticWorldConfig& cfg);  // throws ConfigInvalid

/// Everything a localizer may see about a query traverse.
struct SensorStream {
  EmbeddingMatrix embeddings;  // T x D
  std::vector<Pose> odometry;  // T - 1 increments
  OdometryFrame frame = OdometryFrame::kBody;

  std::size_t size() const { return static_cast<std::size_t>(embeddings.rows()); }
  std::span<const float> embedding(std::size_t t) const {
    return {embeddings.data() + t * static_cast<std::size_t>(embeddings.cols()),
            static_cast<std::size_t>(embeddings.cols())};
  }
};

/// Sensor data plus ground truth. Localizers only ever receive `sensors`;
/// ground truth is read by the evaluation harness.
struct QueryTraverse {
  SensorStream sensors;
  std::vector<Pose> ground_truth;  // T poses

  std::size_t size() const { return sensors.size(); }
};

struct SyntheticWorld {
  LocalizationMap map;
  std::vector<QueryTraverse> queries;
  std::vector<double> ref_arclength;
  std::vector<std::vector<double>> query_arclength;
  std::vector<AliasSegment> aliasing;  // explicit plus randomly placed segments
};

SyntheticWorld generate_world(const SyntheticWorldConfig& cfg,
                              PoseMetricParams metric = PoseMetricParams{});

/// Odometry recomputed from ground truth (body frame, noise free).
SensorStream ground_truth_odometry(const QueryTraverse& traverse);

struct TrialSlice {
  std::size_t id = 0;
  std::size_t offset = 0;
  std::size_t length = 0;
};

std::vector<TrialSlice> sample_trials(const QueryTraverse& traverse, std::size_t num_trials,
                                      std::size_t query_len, std::uint64_t seed);

// Odometry file: header line "frame=body" or "frame=world", then pose rows.
void write_odometry(const std::filesystem::path& path, std::span<const Pose> odometry,
                    OdometryFrame frame);
std::pair<std::vector<Pose>, OdometryFrame> read_odometry(const std::filesystem::path& path);

// Trials file: one start offset per line.
void write_trials(const std::filesystem::path& path, std::span<const TrialSlice> trials);
std::vector<std::size_t> read_trials(const std::filesystem::path& path);

/// <prefix>.emb, <prefix>.poses (ground truth) and <prefix>.odom.
void save_traverse(const std::filesystem::path& prefix, const QueryTraverse& traverse);

struct LoadedDataset {
  LocalizationMap map;
  QueryTraverse query;
};

/// Loads <map_prefix>.{poses,emb}, <query_prefix>.{emb,poses} and the odometry
/// file, checking every count and the embedding dimension.
LoadedDataset load_real_dataset(const std::filesystem::path& map_prefix,
                                const std::filesystem::path& query_prefix,
                                const std::filesystem::path& odom_path,
                                PoseMetricParams metric = PoseMetricParams{});

}  // namespace bayesvpr
