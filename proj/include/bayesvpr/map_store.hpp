#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "bayesvpr/geometry.hpp"

namespace bayesvpr {

/// N x D descriptors, one row per image.
using EmbeddingMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MeasurementParams {
  double lambda1 = 0.0;  // per unit of embedding distance
  double delta = 5.0;
};

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;

  friend bool operator<(const Neighbor& a, const Neighbor& b) {
    return a.distance < b.distance || (a.distance == b.distance && a.index < b.index);
  }
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Uniform 2D grid over reference translations (x, y), stored CSR style.
/// Cell membership is only a candidate filter; distances are always exact.
class PoseGridIndex {
 public:
  PoseGridIndex() = default;
  PoseGridIndex(std::span<const Pose> poses, double cell_size);

  bool empty() const { return cell_start_.empty(); }
  double cell_size() const { return cell_; }

  /// Calls fn(index) for every reference whose cell overlaps the axis-aligned
  /// square of half-width `radius` around (x, y). Returns true when that square
  /// covers every cell of the grid.
  template <typename Fn>
  bool visit_square(double x, double y, double radius, Fn&& fn) const;

 private:
  long clamp_x(double x) const;
  long clamp_y(double y) const;

  double cell_ = 1.0;
  double min_x_ = 0.0, min_y_ = 0.0;
  long nx_ = 0, ny_ = 0;
  std::vector<std::size_t> cell_start_;
  std::vector<std::size_t> items_;
};

/// The reference traverse: ordered poses with one embedding per pose.
/// Immutable after construction; every query is const and thread-safe.
class LocalizationMap {
 public:
  LocalizationMap(std::vector<Pose> poses, EmbeddingMatrix embeddings,
                  PoseMetricParams metric = {});

  std::size_t size() const { return poses_.size(); }
  std::size_t dim() const { return static_cast<std::size_t>(embeddings_.cols()); }
  const std::vector<Pose>& poses() const { return poses_; }
  const EmbeddingMatrix& embeddings() const { return embeddings_; }
  std::span<const float> embedding(std::size_t i) const {
    return {embeddings_.data() + i * dim(), dim()};
  }
  const PoseMetricParams& metric() const { return metric_; }
  const PoseGridIndex& index() const { return index_; }

 private:
  std::vector<Pose> poses_;
  EmbeddingMatrix embeddings_;
  PoseMetricParams metric_;
  PoseGridIndex index_;
};

/// ||query - z_s|| for every reference s, accumulated in double.
Eigen::VectorXd embedding_distances(std::span<const float> query, const LocalizationMap& map);

/// Quantile with linear interpolation between order statistics (inclusive).
double quantile(std::vector<double> values, double q);

/// lambda1 = log(delta) / (d_0.975 - d_0.025) over the distances from the
/// first query to every reference.
MeasurementParams calibrate_lambda1(std::span<const float> first_query,
                                    const LocalizationMap& map, double delta);

/// k nearest references under the pose metric, ascending, ties to lower index.
std::vector<Neighbor> knn_by_pose(const Pose& query, const LocalizationMap& map, std::size_t k);

/// Exhaustive scan; the reference answer for knn_by_pose.
std::vector<Neighbor> knn_by_pose_linear(const Pose& query, const LocalizationMap& map,
                                         std::size_t k);

// Files: <prefix>.poses (pose rows) and <prefix>.emb (binary VPRE).
void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& embeddings);
EmbeddingMatrix read_embeddings(const std::filesystem::path& path);
void write_poses(const std::filesystem::path& path, std::span<const Pose> poses);
std::vector<Pose> read_poses(const std::filesystem::path& path);

void save_map(const std::filesystem::path& prefix, const LocalizationMap& map);
LocalizationMap load_map(const std::filesystem::path& prefix, PoseMetricParams metric = {});

// ---------------------------------------------------------------------------

template <typename Fn>
bool PoseGridIndex::visit_square(double x, double y, double radius, Fn&& fn) const {
  const long x0 = clamp_x(x - radius), x1 = clamp_x(x + radius);
  const long y0 = clamp_y(y - radius), y1 = clamp_y(y + radius);
  for (long iy = y0; iy <= y1; ++iy) {
    const std::size_t row = static_cast<std::size_t>(iy * nx_);
    const std::size_t begin = cell_start_[row + static_cast<std::size_t>(x0)];
    const std::size_t end = cell_start_[row + static_cast<std::size_t>(x1) + 1];
    for (std::size_t j = begin; j < end; ++j) fn(items_[j]);
  }
  // Covered when the (unclamped) square reaches past every grid edge.
  return x - radius <= min_x_ && y - radius <= min_y_ &&
         x + radius >= min_x_ + static_cast<double>(nx_) * cell_ &&
         y + radius >= min_y_ + static_cast<double>(ny_) * cell_;
}

}  // namespace bayesvpr
