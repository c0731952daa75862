#pragma once

// Uniform step interface over the four localization methods, as driven by the
// evaluation harness. A localizer only ever sees sensor data.

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bayesvpr/baselines.hpp"
#include "bayesvpr/dataset.hpp"
#include "bayesvpr/map_store.hpp"
#include "bayesvpr/mcl_filter.hpp"
#include "bayesvpr/topo_filter.hpp"

namespace bayesvpr {

enum class Method { kTopological, kMcl, kSingle, kSeqMatch };

std::string method_name(Method m);
Method parse_method(const std::string& name);  // throws ConfigInvalid

/// Filters accept when the score rises above the threshold, baselines when it
/// falls below.
enum class ScoreDirection { kHigherIsBetter, kLowerIsBetter };

ScoreDirection score_direction(Method m);

/// One query frame. `odometry` is the increment from the previous frame and is
/// absent on the first frame.
struct StepInput {
  std::span<const float> embedding;
  const Pose* odometry = nullptr;
  OdometryFrame frame = OdometryFrame::kBody;
};

/// A decision point.
struct StepResult {
  double score = 0.0;      // tau for filters, match distance for baselines
  std::size_t map_index = 0;  // MAP reference index (or particle index for MCL)
  Pose map_pose;           // pose of the MAP state
  Pose estimate;           // pose reported if this step is accepted
  std::size_t truth_step = 0;  // frame whose ground truth the estimate is scored against
  bool final = false;          // no further decisions will follow
};

class Localizer {
 public:
  virtual ~Localizer() = default;
  /// Consumes one frame; returns a decision when the method has one.
  virtual std::optional<StepResult> step(const StepInput& input) = 0;
};

/// When `fixed_lambda1` is unset, lambda1 is calibrated from the first frame of
/// every trial.
struct LocalizerConfig {
  Method method = Method::kTopological;
  TopoParams topo;
  MclParams mcl;
  SequenceMatchParams seq;
  double delta = 5.0;
  std::optional<double> fixed_lambda1;
};

void validate(const LocalizerConfig& cfg);

/// `seed` drives the MCL particle streams; other methods ignore it.
std::unique_ptr<Localizer> make_localizer(const LocalizerConfig& cfg, const LocalizationMap& map,
                                          std::uint64_t seed);

/// Median reference-index advance per query frame, from odometry translation
/// lengths over consecutive reference spacings.
double nominal_index_slope(const SensorStream& sensors, const LocalizationMap& map);

}  // namespace bayesvpr
