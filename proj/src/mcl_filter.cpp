#include "bayesvpr/mcl_filter.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "bayesvpr/error.hpp"
#include "bayesvpr/rng.hpp"

namespace bayesvpr {

namespace {

constexpr std::uint64_t kInitStep = 0;
constexpr std::uint64_t kResampleStream = std::numeric_limits<std::uint64_t>::max();

Twist sample_twist(StreamRng& rng, const Vector6d& sigma) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector6d v;
  for (int j = 0; j < 6; ++j) v(j) = sigma(j) * normal(rng);
  return Twist::from_vector(v);
}

bool all_zero(const Vector6d& v) { return (v.array() == 0.0).all(); }

void normalize_weights(std::vector<double>& w) {
  double total = 0.0;
  for (double x : w) total += x;
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorCode::kZeroPosterior, "particle weights vanished");
  }
  for (double& x : w) x /= total;
}

// pose_distance(a, b) < radius, skipping the rotation term when translation
// alone already reaches the radius.
bool within_radius(const Pose& a, const Pose& b, const PoseMetricParams& metric, double radius) {
  if ((a.translation - b.translation).norm() >= radius) return false;
  return pose_distance(a, b, metric) < radius;
}

}  // namespace

void validate(const MclParams& p) {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::kInvalidArgument, what); };
  if (p.num_particles < 1) fail("num_particles must be >= 1");
  if ((p.sigma_init.array() < 0.0).any()) fail("sigma_init entries must be >= 0");
  if ((p.sigma_odom.array() < 0.0).any()) fail("sigma_odom entries must be >= 0");
  if (!(p.lambda2 >= 0.0)) fail("lambda2 must be >= 0");
  if (p.k_neighbors < 1) fail("k_neighbors must be >= 1");
  if (!(p.alpha > 0.0)) fail("alpha must be > 0");
  if (!(p.radius > 0.0)) fail("radius must be > 0");
  if (!(p.ess_threshold > 0.0 && p.ess_threshold < 1.0)) fail("ess_threshold must be in (0, 1)");
  if (!(p.tau_threshold > 0.0)) fail("tau_threshold must be > 0");
}

ParticleSet mcl_init(std::span<const float> first_query, const LocalizationMap& map,
                     const MeasurementParams& mp, const MclParams& params, std::uint64_t seed) {
  const Eigen::VectorXd d = embedding_distances(first_query, map);
  const double d_min = d.minCoeff();
  std::vector<double> cumulative(map.size());
  double acc = 0.0;
  for (std::size_t s = 0; s < map.size(); ++s) {
    acc += std::exp(-mp.lambda1 * (d(static_cast<Eigen::Index>(s)) - d_min));
    cumulative[s] = acc;
  }

  const std::size_t m = params.num_particles;
  ParticleSet ps;
  ps.poses.resize(m);
  ps.weights.assign(m, 1.0 / static_cast<double>(m));
  ps.t = 1;
  ps.seed = seed;
  const bool noiseless = all_zero(params.sigma_init);
  for (std::size_t i = 0; i < m; ++i) {
    StreamRng rng = StreamRng::for_key(seed, kInitStep, i);
    const double u = rng.uniform() * acc;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const std::size_t n = std::min<std::size_t>(it - cumulative.begin(), map.size() - 1);
    const Pose& ref = map.poses()[n];
    ps.poses[i] = noiseless ? ref : compose(ref, sample_twist(rng, params.sigma_init));
  }
  return ps;
}

void mcl_motion_update(ParticleSet& ps, const Pose& odom, const MclParams& params,
                       OdometryFrame frame) {
  const bool noiseless = all_zero(params.sigma_odom);
  for (std::size_t i = 0; i < ps.poses.size(); ++i) {
    const Pose moved = frame == OdometryFrame::kWorld ? odom * ps.poses[i] : ps.poses[i] * odom;
    if (noiseless) {
      ps.poses[i] = moved;
    } else {
      StreamRng rng = StreamRng::for_key(ps.seed, ps.t, i);
      ps.poses[i] = compose(moved, sample_twist(rng, params.sigma_odom));
    }
  }
}

double measurement_log_likelihood(const Pose& pose, const Eigen::VectorXd& emb_dist,
                                  const LocalizationMap& map, const MeasurementParams& mp,
                                  const MclParams& params) {
  const std::size_t k = std::min(params.k_neighbors, map.size());
  const std::vector<Neighbor> nn = knn_by_pose(pose, map, k);
  double terms[64];
  std::vector<double> heap_terms;
  double* t = terms;
  if (nn.size() > 64) {
    heap_terms.resize(nn.size());
    t = heap_terms.data();
  }
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < nn.size(); ++j) {
    t[j] = -mp.lambda1 * emb_dist(static_cast<Eigen::Index>(nn[j].index)) -
           params.lambda2 * nn[j].distance;
    best = std::max(best, t[j]);
  }
  double sum = 0.0;
  for (std::size_t j = 0; j < nn.size(); ++j) sum += std::exp(t[j] - best);
  return best + std::log(sum);
}

void mcl_measurement_update(ParticleSet& ps, std::span<const float> query,
                            const LocalizationMap& map, const MeasurementParams& mp,
                            const MclParams& params) {
  Eigen::VectorXd dist = embedding_distances(query, map);
  dist.array() -= dist.minCoeff();  // common factor, cancels on normalization

  const std::size_t m = ps.poses.size();
  std::vector<double> log_w(m);
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < m; ++i) {
    log_w[i] = ps.weights[i] > 0.0
                   ? std::log(ps.weights[i]) +
                         measurement_log_likelihood(ps.poses[i], dist, map, mp, params)
                   : -std::numeric_limits<double>::infinity();
    best = std::max(best, log_w[i]);
  }
  if (!std::isfinite(best)) throw Error(ErrorCode::kZeroPosterior, "particle weights vanished");
  for (std::size_t i = 0; i < m; ++i) ps.weights[i] = std::exp(log_w[i] - best);
  normalize_weights(ps.weights);
  ++ps.t;
}

double effective_sample_size(const ParticleSet& ps) {
  // (sum r)^2 / sum r^2 with r = w / max w; exact for equal weights.
  const double top = *std::max_element(ps.weights.begin(), ps.weights.end());
  if (!(top > 0.0)) return 0.0;
  double sum = 0.0, sq = 0.0;
  for (double w : ps.weights) {
    const double r = w / top;
    sum += r;
    sq += r * r;
  }
  return sum * sum / sq;
}

std::vector<std::size_t> systematic_counts(std::span<const double> weights, double offset) {
  const std::size_t m = weights.size();
  std::vector<std::size_t> counts(m, 0);
  const double step = 1.0 / static_cast<double>(m);
  std::size_t j = 0;
  double cumulative = weights.empty() ? 0.0 : weights[0];
  for (std::size_t i = 0; i < m; ++i) {
    const double u = offset + static_cast<double>(i) * step;
    while (u >= cumulative && j + 1 < m) cumulative += weights[++j];
    ++counts[j];
  }
  return counts;
}

void systematic_resample(ParticleSet& ps, double offset) {
  const std::size_t m = ps.poses.size();
  const std::vector<std::size_t> counts = systematic_counts(ps.weights, offset);
  std::vector<Pose> next;
  next.reserve(m);
  for (std::size_t j = 0; j < m; ++j) next.insert(next.end(), counts[j], ps.poses[j]);
  ps.poses = std::move(next);
  ps.weights.assign(m, 1.0 / static_cast<double>(m));
}

void systematic_resample(ParticleSet& ps) {
  StreamRng rng = StreamRng::for_key(ps.seed, ps.t, kResampleStream);
  systematic_resample(ps, rng.uniform() / static_cast<double>(ps.poses.size()));
}

MclConvergence mcl_check_convergence(const ParticleSet& ps, const MclParams& params) {
  MclConvergence out;
  const auto best = std::max_element(ps.weights.begin(), ps.weights.end());
  out.map_particle = static_cast<std::size_t>(best - ps.weights.begin());
  const Pose& center = ps.poses[out.map_particle];
  const PoseMetricParams metric{params.alpha};
  double tau = 0.0;
  bool everything = true;
  for (std::size_t i = 0; i < ps.poses.size(); ++i) {
    if (within_radius(ps.poses[i], center, metric, params.radius)) {
      tau += ps.weights[i];
    } else {
      everything = false;
    }
  }
  // The weights sum to one by invariant; report that exactly when no particle
  // falls outside the neighborhood.
  out.tau = everything ? 1.0 : std::min(tau, 1.0);
  out.converged = out.tau > params.tau_threshold;
  return out;
}

Pose mcl_window_mean(const ParticleSet& ps, const MclParams& params, const MclConvergence& conv) {
  const Pose& center = ps.poses[conv.map_particle];
  const PoseMetricParams metric{params.alpha};
  std::vector<Eigen::Matrix3d> rotations;
  std::vector<double> weights;
  Eigen::Vector3d t_sum = Eigen::Vector3d::Zero();
  double mass = 0.0;
  for (std::size_t i = 0; i < ps.poses.size(); ++i) {
    if (within_radius(ps.poses[i], center, metric, params.radius)) {
      t_sum += ps.weights[i] * ps.poses[i].translation;
      mass += ps.weights[i];
      rotations.push_back(ps.poses[i].rotation);
      weights.push_back(ps.weights[i]);
    }
  }
  for (double& w : weights) w /= mass;
  return {rotation_chordal_mean(rotations, weights), t_sum / mass};
}

Pose mcl_pose_estimate(const ParticleSet& ps, const MclParams& params) {
  const MclConvergence conv = mcl_check_convergence(ps, params);
  if (!conv.converged) {
    throw Error(ErrorCode::kNotConverged,
                "tau = " + std::to_string(conv.tau) + " does not exceed threshold");
  }
  return mcl_window_mean(ps, params, conv);
}

}  // namespace bayesvpr
