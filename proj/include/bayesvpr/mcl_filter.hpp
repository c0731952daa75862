#pragma once

// 6DoF Monte Carlo localization against a reference traverse.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bayesvpr/geometry.hpp"
#include "bayesvpr/map_store.hpp"

namespace bayesvpr {

/// How an odometry increment U relates consecutive poses.
///  kWorld: T_t = U * T_{t-1}  (U expressed in the world frame, acting on the left)
///  kBody:  T_t = T_{t-1} * U  (U expressed in the previous body frame)
enum class OdometryFrame { kWorld, kBody };

struct MclParams {
  std::size_t num_particles = 6000;
  // Standard deviations, ordered (x, y, z, roll, pitch, yaw) in the body frame.
  Vector6d sigma_init = (Vector6d() << 2.0, 0.5, 0.5, 0.05, 0.05, 0.1).finished();
  Vector6d sigma_odom = (Vector6d() << 0.8, 0.3, 0.3, 0.04, 0.04, 0.08).finished();
  double lambda2 = 0.2;  // per unit of pose distance
  std::size_t k_neighbors = 3;
  double alpha = 15.0;   // meters per radian; the map's metric must match
  double radius = 10.0;  // convergence neighborhood, pose-distance units
  double ess_threshold = 0.3;  // resample when ESS < ess_threshold * M
  double tau_threshold = 0.9;
};

void validate(const MclParams& params);

struct ParticleSet {
  std::vector<Pose> poses;
  std::vector<double> weights;  // sums to 1
  std::size_t t = 0;            // steps absorbed; keys the random streams
  std::uint64_t seed = 0;
};

struct MclConvergence {
  double tau = 0.0;
  bool converged = false;
  std::size_t map_particle = 0;
};

/// Draws reference indices with probability proportional to exp(-lambda1 d) and
/// perturbs each by a Gaussian twist with std `sigma_init`. Uniform weights.
ParticleSet mcl_init(std::span<const float> first_query, const LocalizationMap& map,
                     const MeasurementParams& mp, const MclParams& params, std::uint64_t seed);

/// Each pose becomes U * T * exp(eps) (world frame) or T * U * exp(eps) (body
/// frame), eps ~ N(0, diag(sigma_odom^2)). Weights are untouched.
void mcl_motion_update(ParticleSet& ps, const Pose& odom, const MclParams& params,
                       OdometryFrame frame = OdometryFrame::kWorld);

/// log of sum_k exp(-lambda1 ||z - z_nk|| - lambda2 d(T, T_nk)) over the K
/// nearest references of `pose`. `emb_dist` holds ||z - z_s|| for every s.
double measurement_log_likelihood(const Pose& pose, const Eigen::VectorXd& emb_dist,
                                  const LocalizationMap& map, const MeasurementParams& mp,
                                  const MclParams& params);

void mcl_measurement_update(ParticleSet& ps, std::span<const float> query,
                            const LocalizationMap& map, const MeasurementParams& mp,
                            const MclParams& params);

double effective_sample_size(const ParticleSet& ps);

/// Low-variance resampling with one offset u ~ U[0, 1/M) drawn from the set's
/// stream for the current step.
void systematic_resample(ParticleSet& ps);

/// Same, with an explicit offset in [0, 1/M).
void systematic_resample(ParticleSet& ps, double offset);

/// Copy counts produced by systematic resampling of `weights` at `offset`.
std::vector<std::size_t> systematic_counts(std::span<const double> weights, double offset);

MclConvergence mcl_check_convergence(const ParticleSet& ps, const MclParams& params);

/// Weighted translation mean and chordal rotation mean over the convergence
/// neighborhood. Throws NotConverged or DegenerateMean.
Pose mcl_pose_estimate(const ParticleSet& ps, const MclParams& params);

/// Same as mcl_pose_estimate but without the convergence gate.
Pose mcl_window_mean(const ParticleSet& ps, const MclParams& params, const MclConvergence& conv);

}  // namespace bayesvpr
