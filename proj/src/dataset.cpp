#include "bayesvpr/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <string>

#include "bayesvpr/error.hpp"
#include "bayesvpr/rng.hpp"

namespace bayesvpr {

namespace {

// Stream purposes for the world generator. Separate streams keep, e.g., the
// appearance identical when only the odometry noise changes.
enum Purpose : std::uint64_t {
  kRouteStream = 1,
  kFeatureStream = 2,
  kAliasStream = 3,
  kQueryStartStream = 10,
  kQuerySpacingStream = 50,
  kNoiseLevelStream = 400,
  kAppearanceNoiseStream = 100,
  kOdometryNoiseStream = 200,
  kTrialStream = 300,
};

[[noreturn]] void config_error(const std::string& field, const std::string& why) {
  throw Error(ErrorCode::kConfigInvalid, field + ": " + why);
}

// Planar path of constant-curvature pieces with a gentle elevation profile.
class Route {
 public:
  Route(double length, std::uint64_t seed) {
    StreamRng rng = StreamRng::for_key(seed, kRouteStream, 0);
    std::uniform_real_distribution<double> seg_len(40.0, 120.0);
    std::uniform_real_distribution<double> turn(-0.5 * std::numbers::pi, 0.5 * std::numbers::pi);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Knot k{0.0, 0.0, 0.0, 0.0, 0.0};
    while (k.s <= length + 200.0) {
      const double len = seg_len(rng);
      k.curvature = unit(rng) < 0.35 ? 0.0 : turn(rng) / len;
      knots_.push_back(k);
      const Eigen::Vector3d end = advance(k, len);
      k = {k.s + len, end.x(), end.y(), end.z(), 0.0};
    }
  }

  /// Pose at arc length s, shifted `lateral` meters to the left.
  Pose pose_at(double s, double lateral) const {
    const Knot& k = knot_for(s);
    const Eigen::Vector3d xyh = advance(k, s - k.s);
    const double heading = xyh.z();
    const double z = 2.0 * std::sin(2.0 * std::numbers::pi * s / 300.0) +
                     std::sin(2.0 * std::numbers::pi * s / 170.0 + 1.0);
    const double dz = 2.0 * (2.0 * std::numbers::pi / 300.0) * std::cos(2.0 * std::numbers::pi * s / 300.0) +
                      (2.0 * std::numbers::pi / 170.0) * std::cos(2.0 * std::numbers::pi * s / 170.0 + 1.0);
    const Eigen::Matrix3d r =
        (Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()) *
         Eigen::AngleAxisd(-std::atan(dz), Eigen::Vector3d::UnitY()))
            .toRotationMatrix();
    const Eigen::Vector3d left(-std::sin(heading), std::cos(heading), 0.0);
    return {r, Eigen::Vector3d(xyh.x(), xyh.y(), z) + lateral * left};
  }

 private:
  struct Knot {
    double s, x, y, heading, curvature;
  };

  // (x, y, heading) after travelling u meters from the knot.
  static Eigen::Vector3d advance(const Knot& k, double u) {
    if (k.curvature == 0.0) {
      return {k.x + u * std::cos(k.heading), k.y + u * std::sin(k.heading), k.heading};
    }
    const double h = k.heading + k.curvature * u;
    return {k.x + (std::sin(h) - std::sin(k.heading)) / k.curvature,
            k.y - (std::cos(h) - std::cos(k.heading)) / k.curvature, h};
  }

  const Knot& knot_for(double s) const {
    auto it = std::upper_bound(knots_.begin(), knots_.end(), s,
                               [](double v, const Knot& k) { return v < k.s; });
    return it == knots_.begin() ? knots_.front() : *(it - 1);
  }

  std::vector<Knot> knots_;
};

// Random Fourier features of (aliased) arc length: unit norm, with similarity
// decaying smoothly over `length_scale`.
class AppearanceModel {
 public:
  AppearanceModel(std::size_t dim, double length_scale, std::vector<AliasSegment> aliasing,
                  std::uint64_t seed)
      : dim_(dim), aliasing_(std::move(aliasing)) {
    StreamRng rng = StreamRng::for_key(seed, kFeatureStream, 0);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    const std::size_t pairs = (dim + 1) / 2;
    for (std::size_t i = 0; i < pairs; ++i) {
      freq_.push_back(normal(rng) / length_scale);
      phase_.push_back(phase(rng));
    }
  }

  double appearance_position(double s) const {
    for (const AliasSegment& a : aliasing_) {
      if (s >= a.dst_start && s < a.dst_start + a.length()) return a.src_start + (s - a.dst_start);
    }
    return s;
  }

  Eigen::VectorXd at(double s) const {
    const double p = appearance_position(s);
    Eigen::VectorXd e(static_cast<Eigen::Index>(dim_));
    for (std::size_t i = 0; i < dim_; ++i) {
      const double arg = freq_[i / 2] * p + phase_[i / 2];
      e(static_cast<Eigen::Index>(i)) = (i % 2 == 0) ? std::cos(arg) : std::sin(arg);
    }
    return e.normalized();
  }

 private:
  std::size_t dim_;
  std::vector<AliasSegment> aliasing_;
  std::vector<double> freq_;
  std::vector<double> phase_;
};

// Zero-mean scalar function of arc length with standard deviation `scale`,
// varying over `length` meters.
class SmoothField {
 public:
  SmoothField(double scale, double length, StreamRng rng) : scale_(scale) {
    if (scale == 0.0) return;
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> phase(0.0, 2.0 * std::numbers::pi);
    for (int i = 0; i < kTerms; ++i) {
      freq_[i] = normal(rng) / length;
      phase_[i] = phase(rng);
    }
  }

  double at(double s) const {
    if (scale_ == 0.0) return 0.0;
    double v = 0.0;
    for (int i = 0; i < kTerms; ++i) v += std::cos(freq_[i] * s + phase_[i]);
    return scale_ * std::sqrt(2.0 / kTerms) * v;
  }

 private:
  static constexpr int kTerms = 32;
  double scale_;
  double freq_[kTerms] = {};
  double phase_[kTerms] = {};
};

bool overlaps(double a0, double a1, double b0, double b1, double gap) {
  return a0 < b1 + gap && b0 < a1 + gap;
}

std::vector<AliasSegment> place_random_aliasing(const SyntheticWorldConfig& cfg) {
  std::vector<AliasSegment> out = cfg.aliasing_segments;
  if (cfg.random_alias_pairs == 0) return out;
  const double len = cfg.random_alias_length;
  std::vector<std::pair<double, double>> taken;
  for (const AliasSegment& a : out) {
    taken.emplace_back(a.src_start, a.src_end);
    taken.emplace_back(a.dst_start, a.dst_start + a.length());
  }
  StreamRng rng = StreamRng::for_key(cfg.rng_seed, kAliasStream, 0);
  std::uniform_real_distribution<double> start(0.0, cfg.route_length - len);
  constexpr double kGap = 10.0;
  auto pick = [&]() {
    for (int attempt = 0; attempt < 100000; ++attempt) {
      const double s = std::round(start(rng) / cfg.ref_spacing) * cfg.ref_spacing;
      if (s + len > cfg.route_length) continue;
      const bool clash = std::any_of(taken.begin(), taken.end(), [&](const auto& iv) {
        return overlaps(s, s + len, iv.first, iv.second, kGap);
      });
      if (!clash) {
        taken.emplace_back(s, s + len);
        return s;
      }
    }
    config_error("random_alias_pairs", "cannot place that many segments on the route");
  };
  for (std::size_t i = 0; i < cfg.random_alias_pairs; ++i) {
    const double src = pick();
    const double dst = pick();
    out.push_back({src, src + len, dst});
  }
  return out;
}

}  // namespace

void validate(const SyntheticWorldConfig& cfg) {
  if (!(cfg.route_length > 0.0)) config_error("route_length", "must be > 0");
  if (!(cfg.ref_spacing > 0.0)) config_error("ref_spacing", "must be > 0");
  if (!(cfg.query_spacing > 0.0)) config_error("query_spacing", "must be > 0");
  if (!(cfg.query_spacing_jitter >= 0.0 && cfg.query_spacing_jitter < cfg.query_spacing)) {
    config_error("query_spacing_jitter", "must be in [0, query_spacing)");
  }
  if (cfg.route_length < cfg.ref_spacing) config_error("route_length", "shorter than ref_spacing");
  if (cfg.query_len < 1) config_error("query_len", "must be >= 1");
  if (cfg.embed_dim < 2) config_error("embed_dim", "must be >= 2");
  if (!(cfg.appearance_noise_sigma >= 0.0)) config_error("appearance_noise_sigma", "must be >= 0");
  if (!(cfg.noise_variation >= 0.0)) config_error("noise_variation", "must be >= 0");
  if (!(cfg.noise_variation_length > 0.0)) config_error("noise_variation_length", "must be > 0");
  if (!(cfg.appearance_length_scale > 0.0)) config_error("appearance_length_scale", "must be > 0");
  if ((cfg.odom_noise_sigma.array() < 0.0).any()) config_error("odom_noise_sigma", "must be >= 0");
  if (cfg.num_query_traverses < 1) config_error("num_query_traverses", "must be >= 1");
  if (cfg.random_alias_pairs > 0 &&
      !(cfg.random_alias_length > 0.0 && cfg.random_alias_length < cfg.route_length)) {
    config_error("random_alias_length", "must be in (0, route_length)");
  }
  std::vector<std::pair<double, double>> ranges;
  for (const AliasSegment& a : cfg.aliasing_segments) {
    if (!(a.src_end > a.src_start) || a.src_start < 0.0 || a.src_end > cfg.route_length ||
        a.dst_start < 0.0 || a.dst_start + a.length() > cfg.route_length) {
      config_error("aliasing_segments", "segment outside the route or empty");
    }
    ranges.emplace_back(a.src_start, a.src_end);
    ranges.emplace_back(a.dst_start, a.dst_start + a.length());
  }
  for (std::size_t i = 0; i < ranges.size(); ++i) {
    for (std::size_t j = i + 1; j < ranges.size(); ++j) {
      if (overlaps(ranges[i].first, ranges[i].second, ranges[j].first, ranges[j].second, 0.0)) {
        config_error("aliasing_segments", "segments overlap");
      }
    }
  }
}

SyntheticWorld generate_world(const SyntheticWorldConfig& cfg, PoseMetricParams metric) {
  validate(cfg);
  const Route route(cfg.route_length, cfg.rng_seed);
  std::vector<AliasSegment> aliasing = place_random_aliasing(cfg);
  const AppearanceModel appearance(cfg.embed_dim, cfg.appearance_length_scale, aliasing,
                                   cfg.rng_seed);
  const auto dim = static_cast<Eigen::Index>(cfg.embed_dim);

  // Reference traverse.
  const std::size_t n =
      static_cast<std::size_t>(std::floor(cfg.route_length / cfg.ref_spacing + 1e-9)) + 1;
  std::vector<Pose> ref_poses(n);
  std::vector<double> ref_s(n);
  EmbeddingMatrix ref_emb(static_cast<Eigen::Index>(n), dim);
  for (std::size_t i = 0; i < n; ++i) {
    ref_s[i] = static_cast<double>(i) * cfg.ref_spacing;
    ref_poses[i] = route.pose_at(ref_s[i], 0.0);
    ref_emb.row(static_cast<Eigen::Index>(i)) = appearance.at(ref_s[i]).cast<float>().transpose();
  }

  SyntheticWorld world{LocalizationMap(std::move(ref_poses), std::move(ref_emb), metric), {},
                       std::move(ref_s), {}, std::move(aliasing)};

  for (std::size_t k = 0; k < cfg.num_query_traverses; ++k) {
    StreamRng start_rng = StreamRng::for_key(cfg.rng_seed, kQueryStartStream + k, 0);
    const double s0 = start_rng.uniform() * cfg.ref_spacing;
    std::vector<double> qs{s0};
    StreamRng gap_rng = StreamRng::for_key(cfg.rng_seed, kQuerySpacingStream + k, 0);
    while (true) {
      const double jitter = cfg.query_spacing_jitter * (2.0 * gap_rng.uniform() - 1.0);
      const double next = qs.back() + cfg.query_spacing + jitter;
      if (next > cfg.route_length) break;
      qs.push_back(next);
    }
    const std::size_t count = qs.size();

    const SmoothField level(cfg.noise_variation, cfg.noise_variation_length,
                            StreamRng::for_key(cfg.rng_seed, kNoiseLevelStream + k, 0));
    StreamRng noise_rng = StreamRng::for_key(cfg.rng_seed, kAppearanceNoiseStream + k, 0);
    StreamRng odom_rng = StreamRng::for_key(cfg.rng_seed, kOdometryNoiseStream + k, 0);
    std::normal_distribution<double> normal(0.0, 1.0);

    QueryTraverse q;
    q.ground_truth.resize(count);
    q.sensors.embeddings.resize(static_cast<Eigen::Index>(count), dim);
    q.sensors.frame = OdometryFrame::kBody;
    for (std::size_t j = 0; j < count; ++j) {
      q.ground_truth[j] = route.pose_at(qs[j], cfg.query_lateral_offset);
      Eigen::VectorXd e = appearance.at(qs[j]);
      if (cfg.appearance_noise_sigma > 0.0) {
        const double sigma = cfg.appearance_noise_sigma * std::exp(level.at(qs[j]));
        for (Eigen::Index c = 0; c < dim; ++c) e(c) += sigma * normal(noise_rng);
      }
      q.sensors.embeddings.row(static_cast<Eigen::Index>(j)) = e.cast<float>().transpose();
    }
    const bool odom_noise = (cfg.odom_noise_sigma.array() > 0.0).any();
    for (std::size_t j = 0; j + 1 < count; ++j) {
      Pose u = q.ground_truth[j].inverse() * q.ground_truth[j + 1];
      if (odom_noise) {
        Vector6d eps;
        for (int c = 0; c < 6; ++c) eps(c) = cfg.odom_noise_sigma(c) * normal(odom_rng);
        u = compose(u, Twist::from_vector(eps));
      }
      q.sensors.odometry.push_back(u);
    }
    world.queries.push_back(std::move(q));
    world.query_arclength.push_back(std::move(qs));
  }
  return world;
}

SensorStream ground_truth_odometry(const QueryTraverse& traverse) {
  SensorStream out;
  out.embeddings = traverse.sensors.embeddings;
  out.frame = OdometryFrame::kBody;
  for (std::size_t j = 0; j + 1 < traverse.ground_truth.size(); ++j) {
    out.odometry.push_back(traverse.ground_truth[j].inverse() * traverse.ground_truth[j + 1]);
  }
  return out;
}

std::vector<TrialSlice> sample_trials(const QueryTraverse& traverse, std::size_t num_trials,
                                      std::size_t query_len, std::uint64_t seed) {
  if (query_len < 1 || traverse.size() < query_len) {
    throw Error(ErrorCode::kTraverseTooShort,
                "traverse has " + std::to_string(traverse.size()) + " frames, trials need " +
                    std::to_string(query_len));
  }
  const std::size_t choices = traverse.size() - query_len + 1;
  StreamRng rng = StreamRng::for_key(seed, kTrialStream, 0);
  std::vector<TrialSlice> out(num_trials);
  for (std::size_t i = 0; i < num_trials; ++i) {
    const auto offset = static_cast<std::size_t>(rng.uniform() * static_cast<double>(choices));
    out[i] = {i, std::min(offset, choices - 1), query_len};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files

void write_odometry(const std::filesystem::path& path, std::span<const Pose> odometry,
                    OdometryFrame frame) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out << "frame=" << (frame == OdometryFrame::kBody ? "body" : "world") << '\n';
  write_pose_rows(out, odometry);
  if (!out) throw Error(ErrorCode::kIoError, "failed writing " + path.string());
}

std::pair<std::vector<Pose>, OdometryFrame> read_odometry(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, path.string() + ": cannot open odometry file");
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kParseError, path.string() + ": line 1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  OdometryFrame frame;
  if (line == "frame=body") {
    frame = OdometryFrame::kBody;
  } else if (line == "frame=world") {
    frame = OdometryFrame::kWorld;
  } else {
    throw Error(ErrorCode::kParseError,
                path.string() + ": line 1: expected header frame=body or frame=world");
  }
  std::vector<Pose> poses;
  std::size_t line_no = 1;
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
  return {std::move(poses), frame};
}

void write_trials(const std::filesystem::path& path, std::span<const TrialSlice> trials) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const TrialSlice& t : trials) out << t.offset << '\n';
}

std::vector<std::size_t> read_trials(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kParseError, path.string() + ": cannot open trials file");
  std::vector<std::size_t> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ')) line.pop_back();
    if (line.empty()) continue;
    std::size_t v = 0;
    const auto res = std::from_chars(line.data(), line.data() + line.size(), v);
    if (res.ec != std::errc() || res.ptr != line.data() + line.size()) {
      throw Error(ErrorCode::kParseError,
                  path.string() + ": line " + std::to_string(line_no) + ": expected an offset");
    }
    out.push_back(v);
  }
  return out;
}

void save_traverse(const std::filesystem::path& prefix, const QueryTraverse& traverse) {
  write_embeddings(prefix.string() + ".emb", traverse.sensors.embeddings);
  write_poses(prefix.string() + ".poses", traverse.ground_truth);
  write_odometry(prefix.string() + ".odom", traverse.sensors.odometry, traverse.sensors.frame);
}

LoadedDataset load_real_dataset(const std::filesystem::path& map_prefix,
                                const std::filesystem::path& query_prefix,
                                const std::filesystem::path& odom_path, PoseMetricParams metric) {
  LocalizationMap map = load_map(map_prefix, metric);
  QueryTraverse q;
  q.sensors.embeddings = read_embeddings(query_prefix.string() + ".emb");
  q.ground_truth = read_poses(query_prefix.string() + ".poses");
  auto [odom, frame] = read_odometry(odom_path);
  const std::size_t t = q.sensors.size();
  if (q.ground_truth.size() != t) {
    throw Error(ErrorCode::kCountMismatch, query_prefix.string() + ": " + std::to_string(t) +
                                               " embeddings vs " +
                                               std::to_string(q.ground_truth.size()) +
                                               " ground-truth poses");
  }
  if (t == 0 || odom.size() != t - 1) {
    throw Error(ErrorCode::kCountMismatch, odom_path.string() + ": expected " +
                                               std::to_string(t == 0 ? 0 : t - 1) +
                                               " increments for " + std::to_string(t) +
                                               " queries, got " + std::to_string(odom.size()));
  }
  if (static_cast<std::size_t>(q.sensors.embeddings.cols()) != map.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "query embeddings have dimension " +
                                                   std::to_string(q.sensors.embeddings.cols()) +
                                                   ", map has " + std::to_string(map.dim()));
  }
  q.sensors.odometry = std::move(odom);
  q.sensors.frame = frame;
  return {std::move(map), std::move(q)};
}

}  // namespace bayesvpr
