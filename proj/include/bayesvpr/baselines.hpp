#pragma once

// Comparison localizers: single image retrieval and fixed-length linear
// sequence matching. Both report a score where lower is better.

#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "bayesvpr/map_store.hpp"

namespace bayesvpr {

struct MatchResult {
  std::size_t index = 0;
  double score = 0.0;
  double slope = 0.0;  // sequence matching only
};

struct SequenceMatchParams {
  std::size_t seq_length = 10;
  double v_min = 0.8;  // reference indices advanced per query
  double v_max = 1.5;
  std::size_t num_slopes = 8;
};

void validate(const SequenceMatchParams& params);

/// Nearest reference in embedding space; ties go to the lowest index.
MatchResult single_image_match(std::span<const float> query, const LocalizationMap& map);

/// Evenly spaced slopes over [v_min, v_max] (a single slope when v_min == v_max
/// or num_slopes == 1).
std::vector<double> sequence_slopes(const SequenceMatchParams& params);

/// Mean of dist(j, round(start + v j)) over the rows of an L x N distance matrix,
/// column indices clamped to N - 1.
double sequence_path_score(const Eigen::MatrixXd& dist, std::size_t start, double slope);

/// Searches every start index and slope over the L x N query/reference distance
/// matrix. No contrast normalization is applied. `score` is the minimal mean
/// distance along the path and `index` its start. Ties keep the first
/// (start, slope) in scan order: start ascending, then slope ascending.
MatchResult sequence_match_distances(const Eigen::MatrixXd& dist, const SequenceMatchParams& params);

/// `queries` holds at least seq_length rows; only the first seq_length are used.
MatchResult sequence_match(const EmbeddingMatrix& queries, const LocalizationMap& map,
                           const SequenceMatchParams& params);

}  // namespace bayesvpr
