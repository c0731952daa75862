#include "bayesvpr/app.hpp"

#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>

#include "bayesvpr/error.hpp"
#include "bayesvpr/rng.hpp"

namespace bayesvpr {

namespace {

constexpr std::uint64_t kParticleSeedStream = 0x6D636C;

template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUnexpected;
  }
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  return out;
}

std::filesystem::path ensure_output_dir(const RunConfig& cfg) {
  const std::filesystem::path dir = output_dir(cfg);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::kIoError, "cannot create " + dir.string() + ": " + ec.message());
  return dir;
}

double acceptance_threshold(const RunConfig& cfg, Method m) {
  switch (m) {
    case Method::kTopological: return cfg.localizer.topo.tau_threshold;
    case Method::kMcl: return cfg.localizer.mcl.tau_threshold;
    default: return cfg.baseline_threshold;
  }
}

}  // namespace

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigInvalid:
    case ErrorCode::kInvalidArgument:
      return kExitConfig;
    default:
      return kExitData;
  }
}

RunConfig resolve_config(const std::filesystem::path& path, const CliOverrides& o) {
  RunConfig cfg;
  if (!path.empty()) cfg = load_config(path);
  if (o.method) cfg.method = parse_method(*o.method);
  if (o.seed) cfg.seed = *o.seed;
  if (o.trials) cfg.num_trials = *o.trials;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.out) cfg.out_dir = *o.out;
  if (o.tolerance) cfg.tolerance = *o.tolerance;
  validate(cfg);
  return cfg;
}

std::filesystem::path output_dir(const RunConfig& cfg) {
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv("BAYESVPR_OUT"); env != nullptr && *env != '\0') return env;
  return ".";
}

std::uint64_t trial_seed(std::uint64_t run_seed, std::size_t trial_id) {
  return StreamRng::for_key(run_seed, kParticleSeedStream, trial_id)();
}

PreparedRun prepare_run(const RunConfig& cfg) {
  const PoseMetricParams metric{cfg.localizer.mcl.alpha};
  auto load = [&]() -> LoadedDataset {
    if (!cfg.synthetic) {
      return load_real_dataset(cfg.map_prefix, cfg.query_prefix, cfg.odom_path, metric);
    }
    SyntheticWorld world = generate_world(cfg.world, metric);
    return {std::move(world.map), std::move(world.queries[cfg.traverse])};
  };
  LoadedDataset data = load();
  PreparedRun run{std::move(data.map), std::move(data.query), {}, cfg.localizer};
  if (cfg.odometry == OdometrySource::kGroundTruth) run.query.sensors = ground_truth_odometry(run.query);

  if (!cfg.trials_path.empty()) {
    const std::vector<std::size_t> offsets = read_trials(cfg.trials_path);
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      if (offsets[i] + cfg.query_len > run.query.size()) {
        throw Error(ErrorCode::kIndexOutOfRange, cfg.trials_path.string() + ": offset " +
                                                     std::to_string(offsets[i]) +
                                                     " runs past the traverse");
      }
      run.trials.push_back({i, offsets[i], cfg.query_len});
    }
  } else {
    run.trials = sample_trials(run.query, cfg.num_trials, cfg.query_len, cfg.seed);
  }

  run.localizer.method = cfg.method;
  const double nominal = cfg.nominal_slope ? *cfg.nominal_slope
                                           : nominal_index_slope(run.query.sensors, run.map);
  run.localizer.seq.v_min = cfg.seq_v_min * nominal;
  run.localizer.seq.v_max = cfg.seq_v_max * nominal;
  if (run.localizer.seq.seq_length > cfg.query_len && cfg.method == Method::kSeqMatch) {
    throw Error(ErrorCode::kConfigInvalid, "seqmatch.seq_length: exceeds run.query_len");
  }
  return run;
}

EvaluationResult evaluate(const RunConfig& cfg, const PreparedRun& run) {
  const ScoreDirection dir = score_direction(run.localizer.method);
  const LocalizerFactory factory = [&](std::size_t id) {
    return make_localizer(run.localizer, run.map, trial_seed(cfg.seed, id));
  };
  EvaluationResult res;
  double total_ms = 0.0;
  std::size_t total_steps = 0;
  res.traces = record_traces(factory, run.query.sensors, run.query.ground_truth, run.trials, dir,
                             cfg.jobs, &total_ms, &total_steps);
  const ErrorTolerance tol = ErrorTolerance::parse(cfg.tolerance);
  res.curve = precision_recall_sweep(res.traces, dir, tol, sweep_thresholds(res.traces, dir));
  res.summary.method = method_name(run.localizer.method);
  res.summary.embedding = cfg.embedding;
  res.summary.tolerance = cfg.tolerance;
  res.summary.metrics = summary_metrics(res.curve);
  res.summary.ms_per_iter = total_steps ? total_ms / static_cast<double>(total_steps) : 0.0;
  return res;
}

int cmd_generate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    if (!cfg.synthetic) {
      throw Error(ErrorCode::kConfigInvalid, "data.source: generate needs a synthetic world");
    }
    const std::filesystem::path dir = ensure_output_dir(cfg);
    const SyntheticWorld world = generate_world(cfg.world, PoseMetricParams{cfg.localizer.mcl.alpha});
    save_map(dir / "map", world.map);
    for (std::size_t k = 0; k < world.queries.size(); ++k) {
      save_traverse(dir / ("query" + std::to_string(k)), world.queries[k]);
    }
    const QueryTraverse& q = world.queries[cfg.traverse];
    const std::vector<TrialSlice> trials = sample_trials(q, cfg.num_trials, cfg.query_len, cfg.seed);
    write_trials(dir / "trials.trials", trials);
    out << "N=" << world.map.size() << " T=" << q.size() << " D=" << world.map.dim() << '\n';
    return static_cast<int>(kExitOk);
  });
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const std::filesystem::path dir = ensure_output_dir(cfg);
    const PreparedRun run = prepare_run(cfg);
    const EvaluationResult res = evaluate(cfg, run);
    {
      std::ofstream f = open_output(dir / "pr_curve.csv");
      write_pr_curve(f, res.curve);
    }
    {
      std::ofstream f = open_output(dir / "summary.csv");
      write_summary(f, {res.summary});
    }
    write_summary(out, {res.summary});
    return static_cast<int>(kExitOk);
  });
}

int cmd_localize(const RunConfig& cfg, std::size_t trial_index, std::ostream& out,
                 std::ostream& err) {
  return guarded(err, [&]() {
    const std::filesystem::path dir = ensure_output_dir(cfg);
    const PreparedRun run = prepare_run(cfg);
    if (trial_index >= run.trials.size()) {
      throw Error(ErrorCode::kIndexOutOfRange, "trial " + std::to_string(trial_index) + " of " +
                                                   std::to_string(run.trials.size()));
    }
    const TrialSlice& slice = run.trials[trial_index];
    const ScoreDirection dir_score = score_direction(run.localizer.method);
    const double threshold = acceptance_threshold(cfg, run.localizer.method);
    std::unique_ptr<Localizer> loc =
        make_localizer(run.localizer, run.map, trial_seed(cfg.seed, slice.id));

    std::ostringstream csv;
    csv << "step,tau,map_index,map_x,map_y,map_z,converged,x,y,z,qw,qx,qy,qz\n";
    bool converged = false;
    const SensorStream& s = run.query.sensors;
    for (std::size_t t = 0; t < slice.length && !converged; ++t) {
      const std::size_t frame = slice.offset + t;
      StepInput in{s.embedding(frame), t > 0 ? &s.odometry[frame - 1] : nullptr, s.frame};
      const std::optional<StepResult> r = loc->step(in);
      if (!r) continue;
      converged = dir_score == ScoreDirection::kHigherIsBetter ? r->score > threshold
                                                               : r->score < threshold;
      const Eigen::Vector3d& m = r->map_pose.translation;
      csv << t + 1 << ',' << format_double(r->score) << ',' << r->map_index << ','
          << format_double(m.x()) << ',' << format_double(m.y()) << ',' << format_double(m.z())
          << ',' << (converged ? "true" : "false");
      if (converged) {
        const Eigen::Quaterniond q = r->estimate.quaternion();
        const Eigen::Vector3d& p = r->estimate.translation;
        csv << ',' << format_double(p.x()) << ',' << format_double(p.y()) << ','
            << format_double(p.z()) << ',' << format_double(q.w()) << ',' << format_double(q.x())
            << ',' << format_double(q.y()) << ',' << format_double(q.z());
      } else {
        csv << ",,,,,,,";
      }
      csv << '\n';
      if (r->final) break;
    }
    {
      std::ofstream f = open_output(dir / ("trace_" + std::to_string(trial_index) + ".csv"));
      f << csv.str();
    }
    out << csv.str();
    if (!converged) {
      err << "trial " << trial_index << " did not localize\n";
      return static_cast<int>(kExitNotLocalized);
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_bench(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  return guarded(err, [&]() {
    const std::filesystem::path dir = ensure_output_dir(cfg);
    const PreparedRun run = prepare_run(cfg);
    std::ostringstream csv;
    csv << "method,ms_per_iter,steps,trials,repetitions,num_refs,num_particles\n";
    const std::size_t n_trials = std::min(cfg.bench_trials, run.trials.size());
    for (Method m : cfg.bench_methods) {
      LocalizerConfig lc = run.localizer;
      lc.method = m;
      double total = 0.0;
      std::size_t steps = 0;
      for (std::size_t i = 0; i < n_trials; ++i) {
        const TrialView view{&run.query.sensors, &run.query.ground_truth, run.trials[i]};
        const BenchResult b = benchmark_iteration(
            [&]() { return make_localizer(lc, run.map, trial_seed(cfg.seed, run.trials[i].id)); },
            view, cfg.bench_repetitions);
        total += b.ms_per_step;
        steps += b.steps;
      }
      csv << method_name(m) << ',' << format_double(total / static_cast<double>(n_trials)) << ','
          << steps << ',' << n_trials << ',' << cfg.bench_repetitions << ',' << run.map.size()
          << ',' << (m == Method::kMcl ? lc.mcl.num_particles : 0) << '\n';
    }
    {
      std::ofstream f = open_output(dir / "bench.csv");
      f << csv.str();
    }
    out << csv.str();
    return static_cast<int>(kExitOk);
  });
}

}  // namespace bayesvpr
