#include "bayesvpr/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <thread>

#include "bayesvpr/error.hpp"

namespace bayesvpr {

namespace {

constexpr double kDegree = std::numbers::pi / 180.0;

bool accepted(double score, double threshold, ScoreDirection dir) {
  return dir == ScoreDirection::kHigherIsBetter ? score > threshold : score < threshold;
}

bool better(double a, double b, ScoreDirection dir) {
  return dir == ScoreDirection::kHigherIsBetter ? a > b : a < b;
}

StepInput input_for(const TrialView& trial, std::size_t t) {
  const SensorStream& s = *trial.sensors;
  const std::size_t frame = trial.slice.offset + t;
  StepInput in;
  in.embedding = s.embedding(frame);
  in.odometry = t > 0 ? &s.odometry[frame - 1] : nullptr;
  in.frame = s.frame;
  return in;
}

void check_slice(const TrialView& trial) {
  const std::size_t end = trial.slice.offset + trial.slice.length;
  if (trial.sensors == nullptr || trial.ground_truth == nullptr || end > trial.sensors->size() ||
      end > trial.ground_truth->size() || trial.sensors->odometry.size() + 1 < end) {
    throw Error(ErrorCode::kIndexOutOfRange, "trial slice exceeds the traverse");
  }
}

}  // namespace

ErrorTolerance ErrorTolerance::tight() { return {3.0, 15.0 * kDegree}; }
ErrorTolerance ErrorTolerance::loose() { return {5.0, 30.0 * kDegree}; }

ErrorTolerance ErrorTolerance::parse(const std::string& name) {
  if (name == "3m15deg") return tight();
  if (name == "5m30deg") return loose();
  throw Error(ErrorCode::kConfigInvalid, "tolerance: expected 3m15deg or 5m30deg, got '" + name + "'");
}

std::string ErrorTolerance::name() const {
  return std::to_string(static_cast<long>(std::lround(max_translation))) + "m" +
         std::to_string(static_cast<long>(std::lround(max_rotation / kDegree))) + "deg";
}

std::pair<double, double> error_against_truth(const Pose& estimate, const Pose& truth) {
  return {(estimate.translation - truth.translation).norm(),
          rotation_angle_between(estimate.rotation, truth.rotation)};
}

TrialTrace record_trace(Localizer& localizer, const TrialView& trial, std::size_t trial_id,
                        std::optional<double> stop_score) {
  check_slice(trial);
  TrialTrace trace;
  trace.trial_id = trial_id;
  try {
    for (std::size_t t = 0; t < trial.slice.length; ++t) {
      const std::optional<StepResult> r = localizer.step(input_for(trial, t));
      trace.frames = t + 1;
      if (!r) continue;
      const Pose& truth = (*trial.ground_truth)[trial.slice.offset + r->truth_step];
      const auto [te, re] = error_against_truth(r->estimate, truth);
      trace.steps.push_back({t + 1, r->score, r->estimate, te, re});
      if (r->final) break;
      if (stop_score && r->score >= *stop_score) break;
    }
  } catch (const Error&) {
    trace.failed = true;
  }
  return trace;
}

TrialOutcome outcome_at(const TrialTrace& trace, double threshold, ScoreDirection dir) {
  TrialOutcome out;
  out.trial_id = trace.trial_id;
  for (const TraceStep& s : trace.steps) {
    if (accepted(s.score, threshold, dir)) {
      out.localized = true;
      out.steps_used = s.steps_used;
      out.estimate = s.estimate;
      out.score = s.score;
      out.trans_err = s.trans_err;
      out.rot_err = s.rot_err;
      return out;
    }
  }
  out.steps_used = trace.frames;
  if (!trace.steps.empty()) out.score = trace.steps.back().score;
  return out;
}

TrialOutcome run_trial(Localizer& localizer, const TrialView& trial, double threshold,
                       ScoreDirection dir, std::size_t trial_id) {
  check_slice(trial);
  TrialOutcome out;
  out.trial_id = trial_id;
  try {
    for (std::size_t t = 0; t < trial.slice.length; ++t) {
      const std::optional<StepResult> r = localizer.step(input_for(trial, t));
      out.steps_used = t + 1;
      if (!r) continue;
      out.score = r->score;
      if (accepted(r->score, threshold, dir)) {
        const auto [te, re] =
            error_against_truth(r->estimate, (*trial.ground_truth)[trial.slice.offset + r->truth_step]);
        out.localized = true;
        out.estimate = r->estimate;
        out.trans_err = te;
        out.rot_err = re;
        return out;
      }
      if (r->final) break;
    }
  } catch (const Error&) {
    out.localized = false;
  }
  return out;
}

std::vector<TrialTrace> record_traces(const LocalizerFactory& factory, const SensorStream& sensors,
                                      const std::vector<Pose>& ground_truth,
                                      const std::vector<TrialSlice>& trials, ScoreDirection dir,
                                      std::size_t jobs, double* total_ms,
                                      std::size_t* total_steps) {
  std::vector<TrialTrace> traces(trials.size());
  std::vector<double> ms(trials.size(), 0.0);
  const std::optional<double> stop =
      dir == ScoreDirection::kHigherIsBetter ? std::optional<double>(1.0) : std::nullopt;
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < trials.size(); i = next++) {
      const TrialView view{&sensors, &ground_truth, trials[i]};
      const auto start = std::chrono::steady_clock::now();
      std::unique_ptr<Localizer> loc = factory(trials[i].id);
      traces[i] = record_trace(*loc, view, trials[i].id, stop);
      ms[i] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                  .count();
    }
  };
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, std::max<std::size_t>(trials.size(), 1));
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t j = 0; j < jobs; ++j) pool.emplace_back(worker);
  }
  std::sort(traces.begin(), traces.end(),
            [](const TrialTrace& a, const TrialTrace& b) { return a.trial_id < b.trial_id; });
  if (total_ms) {
    *total_ms = 0.0;
    for (double m : ms) *total_ms += m;
  }
  if (total_steps) {
    *total_steps = 0;
    for (const TrialTrace& t : traces) *total_steps += t.frames;
  }
  return traces;
}

PrPoint classify(const std::vector<TrialOutcome>& outcomes, double threshold,
                 const ErrorTolerance& tol) {
  PrPoint p;
  p.threshold = threshold;
  double steps = 0.0;
  for (const TrialOutcome& o : outcomes) {
    if (!o.localized) {
      ++p.fn;
      continue;
    }
    steps += static_cast<double>(o.steps_used);
    if (tol.accepts(*o.trans_err, *o.rot_err)) {
      ++p.tp;
    } else {
      ++p.fp;
    }
  }
  const std::size_t accepted_count = p.tp + p.fp;
  p.precision = accepted_count == 0 ? 1.0
                                    : static_cast<double>(p.tp) / static_cast<double>(accepted_count);
  p.recall = outcomes.empty() ? 0.0
                              : static_cast<double>(p.tp) / static_cast<double>(outcomes.size());
  p.mean_steps = accepted_count == 0 ? std::numeric_limits<double>::quiet_NaN()
                                     : steps / static_cast<double>(accepted_count);
  return p;
}

PrCurve precision_recall_sweep(const std::function<std::vector<TrialOutcome>(double)>& outcomes_fn,
                               const ErrorTolerance& tol, std::vector<double> thresholds) {
  if (thresholds.empty()) throw Error(ErrorCode::kInvalidArgument, "empty threshold list");
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());
  PrCurve curve;
  curve.reserve(thresholds.size());
  for (double thr : thresholds) curve.push_back(classify(outcomes_fn(thr), thr, tol));
  return curve;
}

PrCurve precision_recall_sweep(const std::vector<TrialTrace>& traces, ScoreDirection dir,
                               const ErrorTolerance& tol, std::vector<double> thresholds) {
  std::vector<TrialOutcome> buffer(traces.size());
  return precision_recall_sweep(
      [&](double thr) {
        for (std::size_t i = 0; i < traces.size(); ++i) buffer[i] = outcome_at(traces[i], thr, dir);
        return buffer;
      },
      tol, std::move(thresholds));
}

std::vector<double> sweep_thresholds(const std::vector<TrialTrace>& traces, ScoreDirection dir) {
  const double toward_accepting = dir == ScoreDirection::kHigherIsBetter
                                      ? -std::numeric_limits<double>::infinity()
                                      : std::numeric_limits<double>::infinity();
  std::vector<double> out;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  double lo_positive = std::numeric_limits<double>::infinity();
  for (const TrialTrace& trace : traces) {
    bool have_best = false;
    double best = 0.0;
    for (const TraceStep& s : trace.steps) {
      if (!std::isfinite(s.score)) continue;
      lo = std::min(lo, s.score);
      hi = std::max(hi, s.score);
      if (s.score > 0.0) lo_positive = std::min(lo_positive, s.score);
      if (!have_best || better(s.score, best, dir)) {
        have_best = true;
        best = s.score;
        out.push_back(s.score);
        out.push_back(std::nextafter(s.score, toward_accepting));
      }
    }
  }
  if (out.empty()) return {0.0};
  out.push_back(std::nextafter(lo, -std::numeric_limits<double>::infinity()));
  out.push_back(std::nextafter(hi, std::numeric_limits<double>::infinity()));
  if (std::isfinite(lo_positive) && hi > lo_positive) {
    constexpr int kLogSteps = 50;
    const double ratio = std::log(hi / lo_positive);
    for (int i = 0; i < kLogSteps; ++i) {
      out.push_back(lo_positive * std::exp(ratio * i / (kLogSteps - 1)));
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

SummaryMetrics summary_metrics(const PrCurve& curve) {
  SummaryMetrics m;
  m.mean_steps = std::numeric_limits<double>::quiet_NaN();
  for (const PrPoint& p : curve) {
    if (p.precision >= 0.99) m.recall_at_99 = std::max(m.recall_at_99, p.recall);
  }
  if (m.recall_at_99 > 0.0) {
    for (const PrPoint& p : curve) {
      if (p.precision >= 0.99 && p.recall == m.recall_at_99) {
        m.mean_steps = p.mean_steps;
        break;
      }
    }
  }

  std::vector<std::pair<double, double>> pts{{0.0, 1.0}};
  for (const PrPoint& p : curve) pts.emplace_back(p.recall, p.precision);
  std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  });
  for (std::size_t i = 1; i < pts.size(); ++i) {
    m.auc += (pts[i].first - pts[i - 1].first) * 0.5 * (pts[i].second + pts[i - 1].second);
  }
  return m;
}

BenchResult benchmark_iteration(const std::function<std::unique_ptr<Localizer>()>& factory,
                                const TrialView& trial, std::size_t repetitions) {
  if (repetitions < 1) throw Error(ErrorCode::kInvalidArgument, "repetitions must be >= 1");
  check_slice(trial);
  std::vector<double> per_step;
  BenchResult out;
  out.steps = trial.slice.length;
  for (std::size_t r = 0; r < repetitions; ++r) {
    std::unique_ptr<Localizer> loc = factory();
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t t = 0; t < trial.slice.length; ++t) loc->step(input_for(trial, t));
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    per_step.push_back(ms / static_cast<double>(trial.slice.length));
  }
  std::sort(per_step.begin(), per_step.end());
  const std::size_t n = per_step.size();
  out.ms_per_step = n % 2 == 1 ? per_step[n / 2] : 0.5 * (per_step[n / 2 - 1] + per_step[n / 2]);
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_pr_curve(std::ostream& out, const PrCurve& curve) {
  out << "threshold,precision,recall,tp,fp,fn\n";
  for (const PrPoint& p : curve) {
    out << format_double(p.threshold) << ',' << format_double(p.precision) << ','
        << format_double(p.recall) << ',' << p.tp << ',' << p.fp << ',' << p.fn << '\n';
  }
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << "method,embedding,tolerance,recall_at_99,auc,mean_steps,ms_per_iter\n";
  for (const SummaryRow& r : rows) {
    out << r.method << ',' << r.embedding << ',' << r.tolerance << ','
        << format_double(r.metrics.recall_at_99) << ',' << format_double(r.metrics.auc) << ','
        << format_double(r.metrics.mean_steps) << ',' << format_double(r.ms_per_iter) << '\n';
  }
}

}  // namespace bayesvpr
