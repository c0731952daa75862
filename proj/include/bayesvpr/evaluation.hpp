#pragma once

// Trial execution, acceptance sweeps and summary metrics.

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bayesvpr/dataset.hpp"
#include "bayesvpr/localizers.hpp"

namespace bayesvpr {

struct ErrorTolerance {
  double max_translation = 5.0;  // meters
  double max_rotation = 0.5235987755982988;  // radians (30 degrees)

  static ErrorTolerance tight();  // 3 m, 15 degrees
  static ErrorTolerance loose();  // 5 m, 30 degrees
  static ErrorTolerance parse(const std::string& name);  // "3m15deg" or "5m30deg"
  std::string name() const;
  bool accepts(double trans_err, double rot_err) const {
    return trans_err <= max_translation && rot_err <= max_rotation;
  }
};

struct TrialOutcome {
  std::size_t trial_id = 0;
  bool localized = false;
  std::size_t steps_used = 0;
  std::optional<Pose> estimate;
  double score = 0.0;
  std::optional<double> trans_err;
  std::optional<double> rot_err;
};

/// (translation error, rotation angle in [0, pi]).
std::pair<double, double> error_against_truth(const Pose& estimate, const Pose& truth);

/// The frames of one trial, as seen by a localizer.
struct TrialView {
  const SensorStream* sensors = nullptr;
  const std::vector<Pose>* ground_truth = nullptr;
  TrialSlice slice;
};

/// One decision of a recorded run, already scored against ground truth.
struct TraceStep {
  std::size_t steps_used = 0;
  double score = 0.0;
  Pose estimate;
  double trans_err = 0.0;
  double rot_err = 0.0;
};

struct TrialTrace {
  std::size_t trial_id = 0;
  std::vector<TraceStep> steps;
  std::size_t frames = 0;  // frames consumed
  bool failed = false;     // the localizer threw
};

using LocalizerFactory = std::function<std::unique_ptr<Localizer>(std::size_t trial_id)>;

/// Runs the localizer over the slice and records every decision. Filters stop
/// once the score reaches `stop_score` (no threshold can accept later steps
/// before that one).
TrialTrace record_trace(Localizer& localizer, const TrialView& trial, std::size_t trial_id,
                        std::optional<double> stop_score = std::nullopt);

/// First acceptance of a recorded run at `threshold`.
TrialOutcome outcome_at(const TrialTrace& trace, double threshold, ScoreDirection dir);

/// Steps the localizer until the first acceptance at `threshold`.
TrialOutcome run_trial(Localizer& localizer, const TrialView& trial, double threshold,
                       ScoreDirection dir, std::size_t trial_id = 0);

/// Records every trial on up to `jobs` worker threads (0 = hardware
/// concurrency). Results are ordered by trial id.
std::vector<TrialTrace> record_traces(const LocalizerFactory& factory, const SensorStream& sensors,
                                      const std::vector<Pose>& ground_truth,
                                      const std::vector<TrialSlice>& trials, ScoreDirection dir,
                                      std::size_t jobs, double* total_ms = nullptr,
                                      std::size_t* total_steps = nullptr);

struct PrPoint {
  double threshold = 0.0;
  double precision = 1.0;
  double recall = 0.0;
  std::size_t tp = 0, fp = 0, fn = 0;
  double mean_steps = 0.0;  // over accepted trials; NaN when none
};

using PrCurve = std::vector<PrPoint>;

PrPoint classify(const std::vector<TrialOutcome>& outcomes, double threshold,
                 const ErrorTolerance& tol);

/// Points sorted by threshold.
PrCurve precision_recall_sweep(const std::function<std::vector<TrialOutcome>(double)>& outcomes_fn,
                               const ErrorTolerance& tol, std::vector<double> thresholds);

/// Sweep over recorded traces.
PrCurve precision_recall_sweep(const std::vector<TrialTrace>& traces, ScoreDirection dir,
                               const ErrorTolerance& tol, std::vector<double> thresholds);

/// 50 log-spaced values over the observed score range, every score at which
/// some trial's first acceptance changes (with its neighbor on the accepting
/// side), and values accepting nothing and everything.
std::vector<double> sweep_thresholds(const std::vector<TrialTrace>& traces, ScoreDirection dir);

struct SummaryMetrics {
  double recall_at_99 = 0.0;
  double auc = 0.0;
  double mean_steps = 0.0;  // NaN when no point reaches 99% precision with recall > 0
};

SummaryMetrics summary_metrics(const PrCurve& curve);

/// Median over repetitions of the mean wall-clock milliseconds per step on a
/// full pass over the trial.
struct BenchResult {
  double ms_per_step = 0.0;
  std::size_t steps = 0;
};

BenchResult benchmark_iteration(const std::function<std::unique_ptr<Localizer>()>& factory,
                                const TrialView& trial, std::size_t repetitions);

void write_pr_curve(std::ostream& out, const PrCurve& curve);

struct SummaryRow {
  std::string method;
  std::string embedding;
  std::string tolerance;
  SummaryMetrics metrics;
  double ms_per_iter = 0.0;
};

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);

/// Shortest round-trip text for a double ("nan" for NaN).
std::string format_double(double v);

}  // namespace bayesvpr
