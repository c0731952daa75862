#pragma once

// Discrete Bayes (HMM forward) localizer over reference indices.

#include <cstddef>
#include <span>

#include <Eigen/Core>

#include "bayesvpr/geometry.hpp"
#include "bayesvpr/map_store.hpp"

namespace bayesvpr {

struct BeliefVector {
  Eigen::VectorXd probs;  // sums to 1
  std::size_t t = 0;      // number of measurements absorbed
};

struct TopoParams {
  int w_lower = -2;  // smallest index offset per step
  int w_upper = 10;  // largest index offset per step
  int window = 6;    // half-width of the convergence window
  double tau_threshold = 0.9;
  bool loop_closure = false;  // circular indexing instead of clamping at the ends
};

struct TopoConvergence {
  double tau = 0.0;
  bool converged = false;
  std::size_t map_index = 0;
};

void validate(const TopoParams& params);

/// exp(-lambda1 * d_s), scaled by exp(lambda1 * min_s d_s) so the largest entry is 1.
Eigen::VectorXd appearance_likelihood(std::span<const float> query, const LocalizationMap& map,
                                      const MeasurementParams& mp);

BeliefVector topo_init(std::span<const float> first_query, const LocalizationMap& map,
                       const MeasurementParams& mp);

/// Banded prediction E^T p (each source row of E uniform over its clamped band).
Eigen::VectorXd topo_predict(const Eigen::VectorXd& probs, const TopoParams& tp);

BeliefVector topo_update(const BeliefVector& belief, std::span<const float> query,
                         const LocalizationMap& map, const TopoParams& tp,
                         const MeasurementParams& mp);

TopoConvergence topo_check_convergence(const BeliefVector& belief, const TopoParams& tp);

/// Floor of the window-renormalized mean index around the MAP state.
std::size_t topo_estimate_index(const BeliefVector& belief, const TopoParams& tp);

/// Throws NotConverged unless the belief passes the convergence test.
Pose topo_pose_estimate(const BeliefVector& belief, const LocalizationMap& map,
                        const TopoParams& tp);

}  // namespace bayesvpr
