#include "bayesvpr/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bayesvpr/error.hpp"

namespace bayesvpr {

void validate(const SequenceMatchParams& p) {
  if (p.seq_length < 1) throw Error(ErrorCode::kInvalidArgument, "seq_length must be >= 1");
  if (!(p.v_min > 0.0) || !(p.v_min <= p.v_max)) {
    throw Error(ErrorCode::kInvalidArgument, "velocity range needs 0 < v_min <= v_max");
  }
  if (p.num_slopes < 1) throw Error(ErrorCode::kInvalidArgument, "num_slopes must be >= 1");
}

MatchResult single_image_match(std::span<const float> query, const LocalizationMap& map) {
  const Eigen::VectorXd d = embedding_distances(query, map);
  Eigen::Index best = 0;
  const double score = d.minCoeff(&best);
  return {static_cast<std::size_t>(best), score, 0.0};
}

std::vector<double> sequence_slopes(const SequenceMatchParams& p) {
  if (p.num_slopes == 1 || p.v_min == p.v_max) return {p.v_min};
  std::vector<double> out(p.num_slopes);
  const double step = (p.v_max - p.v_min) / static_cast<double>(p.num_slopes - 1);
  for (std::size_t i = 0; i < p.num_slopes; ++i) out[i] = p.v_min + step * static_cast<double>(i);
  out.back() = p.v_max;
  return out;
}

double sequence_path_score(const Eigen::MatrixXd& dist, std::size_t start, double slope) {
  const Eigen::Index rows = dist.rows();
  const long last = static_cast<long>(dist.cols()) - 1;
  double total = 0.0;
  for (Eigen::Index j = 0; j < rows; ++j) {
    const long col = std::min(
        last, std::lround(static_cast<double>(start) + slope * static_cast<double>(j)));
    total += dist(j, col);
  }
  return total / static_cast<double>(rows);
}

MatchResult sequence_match_distances(const Eigen::MatrixXd& dist,
                                     const SequenceMatchParams& params) {
  validate(params);
  const std::vector<double> slopes = sequence_slopes(params);
  MatchResult best{0, std::numeric_limits<double>::infinity(), slopes.front()};
  const std::size_t n = static_cast<std::size_t>(dist.cols());
  for (std::size_t s = 0; s < n; ++s) {
    for (double v : slopes) {
      const double score = sequence_path_score(dist, s, v);
      if (score < best.score) best = {s, score, v};
    }
  }
  return best;
}

MatchResult sequence_match(const EmbeddingMatrix& queries, const LocalizationMap& map,
                           const SequenceMatchParams& params) {
  validate(params);
  const std::size_t len = params.seq_length;
  if (static_cast<std::size_t>(queries.rows()) < len) {
    throw Error(ErrorCode::kInvalidArgument, "sequence match needs " + std::to_string(len) +
                                                 " queries, got " +
                                                 std::to_string(queries.rows()));
  }
  Eigen::MatrixXd dist(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(map.size()));
  for (std::size_t j = 0; j < len; ++j) {
    const std::span<const float> row(queries.data() + j * queries.cols(),
                                     static_cast<std::size_t>(queries.cols()));
    dist.row(static_cast<Eigen::Index>(j)) = embedding_distances(row, map).transpose();
  }
  return sequence_match_distances(dist, params);
}

}  // namespace bayesvpr
