#include "bayesvpr/map_store.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>
#include <string>

#include "bayesvpr/error.hpp"

namespace bayesvpr {

namespace {

constexpr double kDefaultCellSize = 2.0;
constexpr double kMaxCells = 4.0e6;

}  // namespace

PoseGridIndex::PoseGridIndex(std::span<const Pose> poses, double cell_size) : cell_(cell_size) {
  if (poses.empty()) return;
  double max_x = poses[0].translation.x(), max_y = poses[0].translation.y();
  min_x_ = max_x;
  min_y_ = max_y;
  for (const Pose& p : poses) {
    min_x_ = std::min(min_x_, p.translation.x());
    min_y_ = std::min(min_y_, p.translation.y());
    max_x = std::max(max_x, p.translation.x());
    max_y = std::max(max_y, p.translation.y());
  }
  const double area = (max_x - min_x_ + cell_) * (max_y - min_y_ + cell_);
  if (area / (cell_ * cell_) > kMaxCells) cell_ = std::sqrt(area / kMaxCells);
  nx_ = static_cast<long>(std::floor((max_x - min_x_) / cell_)) + 1;
  ny_ = static_cast<long>(std::floor((max_y - min_y_) / cell_)) + 1;

  const std::size_t cells = static_cast<std::size_t>(nx_ * ny_);
  std::vector<std::size_t> cell_of(poses.size());
  cell_start_.assign(cells + 1, 0);
  for (std::size_t i = 0; i < poses.size(); ++i) {
    const long ix = clamp_x(poses[i].translation.x());
    const long iy = clamp_y(poses[i].translation.y());
    cell_of[i] = static_cast<std::size_t>(iy * nx_ + ix);
    ++cell_start_[cell_of[i] + 1];
  }
  for (std::size_t c = 0; c < cells; ++c) cell_start_[c + 1] += cell_start_[c];
  items_.resize(poses.size());
  std::vector<std::size_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (std::size_t i = 0; i < poses.size(); ++i) items_[fill[cell_of[i]]++] = i;
}

long PoseGridIndex::clamp_x(double x) const {
  const double c = std::floor((x - min_x_) / cell_);
  return static_cast<long>(std::clamp(c, 0.0, static_cast<double>(nx_ - 1)));
}

long PoseGridIndex::clamp_y(double y) const {
  const double c = std::floor((y - min_y_) / cell_);
  return static_cast<long>(std::clamp(c, 0.0, static_cast<double>(ny_ - 1)));
}

LocalizationMap::LocalizationMap(std::vector<Pose> poses, EmbeddingMatrix embeddings,
                                 PoseMetricParams metric)
    : poses_(std::move(poses)), embeddings_(std::move(embeddings)), metric_(metric) {
  if (poses_.empty()) throw Error(ErrorCode::kInvalidArgument, "map needs at least one reference");
  if (static_cast<std::size_t>(embeddings_.rows()) != poses_.size()) {
    throw Error(ErrorCode::kCountMismatch, "map has " + std::to_string(poses_.size()) +
                                               " poses but " +
                                               std::to_string(embeddings_.rows()) + " embeddings");
  }
  if (embeddings_.cols() < 1) throw Error(ErrorCode::kInvalidArgument, "embedding dimension is 0");
  if (!(metric_.alpha > 0.0)) throw Error(ErrorCode::kInvalidArgument, "alpha must be > 0");
  index_ = PoseGridIndex(poses_, kDefaultCellSize);
}

Eigen::VectorXd embedding_distances(std::span<const float> query, const LocalizationMap& map) {
  const std::size_t d = map.dim();
  if (query.size() != d) {
    throw Error(ErrorCode::kDimensionMismatch, "query has dimension " +
                                                   std::to_string(query.size()) + ", map has " +
                                                   std::to_string(d));
  }
  const std::size_t n = map.size();
  Eigen::VectorXd out(static_cast<Eigen::Index>(n));
  const float* data = map.embeddings().data();
  for (std::size_t s = 0; s < n; ++s) {
    const float* row = data + s * d;
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double diff = static_cast<double>(query[j]) - static_cast<double>(row[j]);
      acc += diff * diff;
    }
    out(static_cast<Eigen::Index>(s)) = std::sqrt(acc);
  }
  return out;
}

double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "quantile of empty set");
  std::sort(values.begin(), values.end());
  const double h = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= values.size()) return values.back();
  return values[lo] + (h - static_cast<double>(lo)) * (values[lo + 1] - values[lo]);
}

MeasurementParams calibrate_lambda1(std::span<const float> first_query,
                                    const LocalizationMap& map, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::kInvalidArgument, "delta must be > 0");
  if (map.size() < 2) throw Error(ErrorCode::kInvalidArgument, "calibration needs N >= 2");
  const Eigen::VectorXd dist = embedding_distances(first_query, map);
  const std::vector<double> values(dist.data(), dist.data() + dist.size());
  const double spread = quantile(values, 0.975) - quantile(values, 0.025);
  if (!(spread >= 1e-12)) {
    throw Error(ErrorCode::kDegenerateSpread, "embedding distances have no spread to calibrate on");
  }
  return {std::log(delta) / spread, delta};
}

namespace {

void check_k(std::size_t k, const LocalizationMap& map) {
  if (k < 1 || k > map.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "k must be in [1, N], got " + std::to_string(k) + " for N = " +
                    std::to_string(map.size()));
  }
}

// Keeps the k smallest neighbors seen so far, sorted.
class TopK {
 public:
  explicit TopK(std::size_t k) : k_(k) { items_.reserve(k + 1); }

  void offer(const Neighbor& n) {
    if (items_.size() == k_ && !(n < items_.back())) return;
    auto pos = std::upper_bound(items_.begin(), items_.end(), n);
    items_.insert(pos, n);
    if (items_.size() > k_) items_.pop_back();
  }

  bool full() const { return items_.size() == k_; }
  double worst() const { return items_.back().distance; }
  void clear() { items_.clear(); }
  std::vector<Neighbor> take() { return std::move(items_); }

 private:
  std::size_t k_;
  std::vector<Neighbor> items_;
};

}  // namespace

std::vector<Neighbor> knn_by_pose_linear(const Pose& query, const LocalizationMap& map,
                                         std::size_t k) {
  check_k(k, map);
  TopK top(k);
  const auto& poses = map.poses();
  for (std::size_t i = 0; i < poses.size(); ++i) {
    top.offer({i, pose_distance(query, poses[i], map.metric())});
  }
  return top.take();
}

std::vector<Neighbor> knn_by_pose(const Pose& query, const LocalizationMap& map, std::size_t k) {
  check_k(k, map);
  const PoseGridIndex& grid = map.index();
  if (grid.empty() || 4 * k >= map.size()) return knn_by_pose_linear(query, map, k);

  // Any reference outside the visited square has translation distance, hence
  // pose distance, greater than the radius. Once k candidates lie within the
  // radius the answer is exact.
  const auto& poses = map.poses();
  const double alpha = map.metric().alpha;
  TopK top(k);
  thread_local std::vector<std::pair<double, std::size_t>> candidates;
  double radius = grid.cell_size();
  while (true) {
    top.clear();
    candidates.clear();
    const bool covered = grid.visit_square(
        query.translation.x(), query.translation.y(), radius, [&](std::size_t i) {
          candidates.emplace_back((query.translation - poses[i].translation).norm(), i);
        });
    // The translation term alone bounds the pose distance from below, so
    // candidates are scored nearest first until that bound exceeds the k-th best.
    std::sort(candidates.begin(), candidates.end());
    for (const auto& [trans, i] : candidates) {
      if (top.full() && trans > top.worst()) break;
      // angle >= ||R1 - R2||_F / sqrt(2); shrunk slightly to stay below the
      // exact value under rounding.
      if (top.full()) {
        const double chord = (query.rotation - poses[i].rotation).norm();
        if (trans + alpha * chord * (std::numbers::sqrt2 / 2.0) * (1.0 - 1e-9) > top.worst()) continue;
      }
      top.offer({i, trans + alpha * rotation_angle_between(query.rotation, poses[i].rotation)});
    }
    if (covered || (top.full() && top.worst() <= radius)) return top.take();
    // Every reference closer than the current k-th best lies within that
    // distance in translation, so one more pass at that radius is exact.
    radius = top.full() ? top.worst() : 2.0 * radius;
  }
}

// ---------------------------------------------------------------------------
// File formats

namespace {

constexpr char kEmbeddingMagic[4] = {'V', 'P', 'R', 'E'};

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
      (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  return true;
}

}  // namespace

void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& embeddings) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(kEmbeddingMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(embeddings.rows()));
  put_u32(out, static_cast<std::uint32_t>(embeddings.cols()));
  const std::size_t count = static_cast<std::size_t>(embeddings.size());
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(embeddings.data()),
              static_cast<std::streamsize>(count * sizeof(float)));
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      put_u32(out, std::bit_cast<std::uint32_t>(embeddings.data()[i]));
    }
  }
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kParseError, path.string() + ": cannot open embedding file");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kEmbeddingMagic, 4) != 0) {
    throw Error(ErrorCode::kParseError, path.string() + ": offset 0: missing VPRE magic");
  }
  std::uint32_t n = 0, d = 0;
  if (!get_u32(in, n) || !get_u32(in, d)) {
    throw Error(ErrorCode::kParseError, path.string() + ": offset 4: truncated header");
  }
  EmbeddingMatrix emb(n, d);
  const std::size_t count = static_cast<std::size_t>(n) * d;
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    if (!get_u32(in, bits)) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ": offset " + std::to_string(12 + 4 * i) +
                      ": truncated data, expected " + std::to_string(count) + " floats");
    }
    emb.data()[i] = std::bit_cast<float>(bits);
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::kParseError,
                path.string() + ": offset " + std::to_string(12 + 4 * count) + ": trailing bytes");
  }
  return emb;
}

void write_poses(const std::filesystem::path& path, std::span<const Pose> poses) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  write_pose_rows(out, poses);
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::vector<Pose> read_poses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, path.string() + ": cannot open pose file");
  std::vector<Pose> poses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      poses.push_back(parse_pose_row(line));
    } catch (const Error& e) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ": line " + std::to_string(line_no) + ": " + e.detail());
    }
  }
  return poses;
}

void save_map(const std::filesystem::path& prefix, const LocalizationMap& map) {
  write_poses(prefix.string() + ".poses", map.poses());
  write_embeddings(prefix.string() + ".emb", map.embeddings());
}

LocalizationMap load_map(const std::filesystem::path& prefix, PoseMetricParams metric) {
  std::vector<Pose> poses = read_poses(prefix.string() + ".poses");
  EmbeddingMatrix emb = read_embeddings(prefix.string() + ".emb");
  if (static_cast<std::size_t>(emb.rows()) != poses.size()) {
    throw Error(ErrorCode::kCountMismatch, prefix.string() + ": " + std::to_string(poses.size()) +
                                               " poses vs " + std::to_string(emb.rows()) +
                                               " embeddings");
  }
  return LocalizationMap(std::move(poses), std::move(emb), metric);
}

}  // namespace bayesvpr
