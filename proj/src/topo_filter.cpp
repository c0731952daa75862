#include "bayesvpr/topo_filter.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "bayesvpr/error.hpp"

namespace bayesvpr {

namespace {

double normalize_in_place(Eigen::VectorXd& v) {
  const double total = v.sum();
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw Error(ErrorCode::kZeroPosterior, "belief has no mass left to normalize");
  }
  v /= total;
  return total;
}

long wrap(long i, long n) {
  const long m = i % n;
  return m < 0 ? m + n : m;
}

// Window [map - w, map + w], clamped or wrapped. Calls fn(offset, index).
template <typename Fn>
void for_window(std::size_t map_index, std::size_t n, const TopoParams& tp, Fn&& fn) {
  const long c = static_cast<long>(map_index);
  const long size = static_cast<long>(n);
  if (tp.loop_closure && 2 * tp.window + 1 < size) {
    for (long o = -tp.window; o <= tp.window; ++o) fn(o, static_cast<std::size_t>(wrap(c + o, size)));
    return;
  }
  const long lo = std::max(0L, c - tp.window);
  const long hi = std::min(size - 1, c + tp.window);
  for (long i = lo; i <= hi; ++i) fn(i - c, static_cast<std::size_t>(i));
}

}  // namespace

void validate(const TopoParams& params) {
  if (params.w_lower > params.w_upper) {
    throw Error(ErrorCode::kInvalidArgument, "w_lower must not exceed w_upper");
  }
  if (params.window < 0) throw Error(ErrorCode::kInvalidArgument, "window must be >= 0");
  if (!(params.tau_threshold > 0.0)) {
    throw Error(ErrorCode::kInvalidArgument, "tau_threshold must be > 0");
  }
}

Eigen::VectorXd appearance_likelihood(std::span<const float> query, const LocalizationMap& map,
                                      const MeasurementParams& mp) {
  const Eigen::VectorXd d = embedding_distances(query, map);
  return (-mp.lambda1 * (d.array() - d.minCoeff())).exp().matrix();
}

BeliefVector topo_init(std::span<const float> first_query, const LocalizationMap& map,
                       const MeasurementParams& mp) {
  BeliefVector belief{appearance_likelihood(first_query, map, mp), 1};
  normalize_in_place(belief.probs);
  return belief;
}

Eigen::VectorXd topo_predict(const Eigen::VectorXd& probs, const TopoParams& tp) {
  const long n = probs.size();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
  if (tp.loop_closure) {
    const double share = 1.0 / static_cast<double>(tp.w_upper - tp.w_lower + 1);
    for (long j = 0; j < n; ++j) {
      const double mass = probs(j) * share;
      if (mass == 0.0) continue;
      for (long o = tp.w_lower; o <= tp.w_upper; ++o) out(wrap(j + o, n)) += mass;
    }
    return out;
  }
  for (long j = 0; j < n; ++j) {
    if (probs(j) == 0.0) continue;
    const long lo = std::max(0L, j + tp.w_lower);
    const long hi = std::min(n - 1, j + tp.w_upper);
    if (lo > hi) continue;  // band lies entirely off the map; this mass is lost
    const double mass = probs(j) / static_cast<double>(hi - lo + 1);
    out.segment(lo, hi - lo + 1).array() += mass;
  }
  return out;
}

BeliefVector topo_update(const BeliefVector& belief, std::span<const float> query,
                         const LocalizationMap& map, const TopoParams& tp,
                         const MeasurementParams& mp) {
  if (static_cast<std::size_t>(belief.probs.size()) != map.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "belief length does not match map size");
  }
  BeliefVector next{topo_predict(belief.probs, tp), belief.t + 1};
  next.probs.array() *= appearance_likelihood(query, map, mp).array();
  normalize_in_place(next.probs);
  return next;
}

TopoConvergence topo_check_convergence(const BeliefVector& belief, const TopoParams& tp) {
  TopoConvergence out;
  Eigen::Index best = 0;
  belief.probs.maxCoeff(&best);  // first maximum on ties
  out.map_index = static_cast<std::size_t>(best);
  double tau = 0.0;
  for_window(out.map_index, static_cast<std::size_t>(belief.probs.size()), tp,
             [&](long, std::size_t i) { tau += belief.probs(static_cast<Eigen::Index>(i)); });
  out.tau = std::min(tau, 1.0);
  out.converged = out.tau > tp.tau_threshold;
  return out;
}

std::size_t topo_estimate_index(const BeliefVector& belief, const TopoParams& tp) {
  const TopoConvergence conv = topo_check_convergence(belief, tp);
  const std::size_t n = static_cast<std::size_t>(belief.probs.size());
  double mass = 0.0, moment = 0.0;
  for_window(conv.map_index, n, tp, [&](long offset, std::size_t i) {
    const double p = belief.probs(static_cast<Eigen::Index>(i));
    mass += p;
    moment += static_cast<double>(offset) * p;
  });
  // The MAP entry is the largest, so mass > 0 whenever the belief is normalized.
  const long shift = static_cast<long>(std::floor(moment / mass));
  const long idx = static_cast<long>(conv.map_index) + shift;
  if (tp.loop_closure) return static_cast<std::size_t>(wrap(idx, static_cast<long>(n)));
  return static_cast<std::size_t>(std::clamp(idx, 0L, static_cast<long>(n) - 1));
}

Pose topo_pose_estimate(const BeliefVector& belief, const LocalizationMap& map,
                        const TopoParams& tp) {
  const TopoConvergence conv = topo_check_convergence(belief, tp);
  if (!conv.converged) {
    throw Error(ErrorCode::kNotConverged,
                "tau = " + std::to_string(conv.tau) + " does not exceed threshold");
  }
  return map.poses()[topo_estimate_index(belief, tp)];
}

}  // namespace bayesvpr
