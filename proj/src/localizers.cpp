#include "bayesvpr/localizers.hpp"

#include <algorithm>

#include "bayesvpr/error.hpp"

namespace bayesvpr {

std::string method_name(Method m) {
  switch (m) {
    case Method::kTopological: return "topological";
    case Method::kMcl: return "mcl";
    case Method::kSingle: return "single";
    case Method::kSeqMatch: return "seqmatch";
  }
  return "unknown";
}

Method parse_method(const std::string& name) {
  for (Method m : {Method::kTopological, Method::kMcl, Method::kSingle, Method::kSeqMatch}) {
    if (method_name(m) == name) return m;
  }
  throw Error(ErrorCode::kConfigInvalid,
              "method: unknown '" + name + "' (topological, mcl, single, seqmatch)");
}

ScoreDirection score_direction(Method m) {
  return m == Method::kTopological || m == Method::kMcl ? ScoreDirection::kHigherIsBetter
                                                        : ScoreDirection::kLowerIsBetter;
}

void validate(const LocalizerConfig& cfg) {
  if (!(cfg.delta > 1.0)) throw Error(ErrorCode::kConfigInvalid, "delta: must be > 1");
  if (cfg.fixed_lambda1 && !(*cfg.fixed_lambda1 >= 0.0)) {
    throw Error(ErrorCode::kConfigInvalid, "lambda1: must be >= 0");
  }
  try {
    switch (cfg.method) {
      case Method::kTopological: validate(cfg.topo); break;
      case Method::kMcl: validate(cfg.mcl); break;
      case Method::kSeqMatch: validate(cfg.seq); break;
      case Method::kSingle: break;
    }
  } catch (const Error& e) {
    throw Error(ErrorCode::kConfigInvalid, "[" + method_name(cfg.method) + "] " + e.detail());
  }
}

namespace {

MeasurementParams measurement_for(const LocalizerConfig& cfg, std::span<const float> first,
                                  const LocalizationMap& map) {
  if (cfg.fixed_lambda1) return {*cfg.fixed_lambda1, cfg.delta};
  return calibrate_lambda1(first, map, cfg.delta);
}

class TopoLocalizer final : public Localizer {
 public:
  TopoLocalizer(const LocalizerConfig& cfg, const LocalizationMap& map) : cfg_(cfg), map_(map) {}

  std::optional<StepResult> step(const StepInput& in) override {
    if (belief_.t == 0) {
      mp_ = measurement_for(cfg_, in.embedding, map_);
      belief_ = topo_init(in.embedding, map_, mp_);
    } else {
      belief_ = topo_update(belief_, in.embedding, map_, cfg_.topo, mp_);
    }
    const TopoConvergence conv = topo_check_convergence(belief_, cfg_.topo);
    StepResult r;
    r.score = conv.tau;
    r.map_index = conv.map_index;
    r.map_pose = map_.poses()[conv.map_index];
    r.estimate = map_.poses()[topo_estimate_index(belief_, cfg_.topo)];
    r.truth_step = step_++;
    return r;
  }

 private:
  LocalizerConfig cfg_;
  const LocalizationMap& map_;
  MeasurementParams mp_;
  BeliefVector belief_;
  std::size_t step_ = 0;
};

class MclLocalizer final : public Localizer {
 public:
  MclLocalizer(const LocalizerConfig& cfg, const LocalizationMap& map, std::uint64_t seed)
      : cfg_(cfg), map_(map), seed_(seed) {
    if (map.metric().alpha != cfg.mcl.alpha) {
      throw Error(ErrorCode::kInvalidArgument, "map metric alpha differs from the MCL alpha");
    }
  }

  std::optional<StepResult> step(const StepInput& in) override {
    if (ps_.poses.empty()) {
      // The first frame seeds the particles from its appearance likelihood;
      // weighting them by the same frame again would count it twice.
      mp_ = measurement_for(cfg_, in.embedding, map_);
      ps_ = mcl_init(in.embedding, map_, mp_, cfg_.mcl, seed_);
    } else {
      if (in.odometry == nullptr) {
        throw Error(ErrorCode::kInvalidArgument, "MCL step without odometry");
      }
      mcl_motion_update(ps_, *in.odometry, cfg_.mcl, in.frame);
      mcl_measurement_update(ps_, in.embedding, map_, mp_, cfg_.mcl);
    }
    const MclConvergence conv = mcl_check_convergence(ps_, cfg_.mcl);
    StepResult r;
    r.score = conv.tau;
    r.map_index = conv.map_particle;
    r.map_pose = ps_.poses[conv.map_particle];
    r.estimate = mcl_window_mean(ps_, cfg_.mcl, conv);
    r.truth_step = step_++;
    if (effective_sample_size(ps_) <
        cfg_.mcl.ess_threshold * static_cast<double>(ps_.poses.size())) {
      systematic_resample(ps_);
    }
    return r;
  }

 private:
  LocalizerConfig cfg_;
  const LocalizationMap& map_;
  std::uint64_t seed_;
  MeasurementParams mp_;
  ParticleSet ps_;
  std::size_t step_ = 0;
};

class SingleLocalizer final : public Localizer {
 public:
  explicit SingleLocalizer(const LocalizationMap& map) : map_(map) {}

  std::optional<StepResult> step(const StepInput& in) override {
    if (done_) return std::nullopt;
    done_ = true;
    const MatchResult m = single_image_match(in.embedding, map_);
    StepResult r;
    r.score = m.score;
    r.map_index = m.index;
    r.map_pose = r.estimate = map_.poses()[m.index];
    r.final = true;
    return r;
  }

 private:
  const LocalizationMap& map_;
  bool done_ = false;
};

class SeqMatchLocalizer final : public Localizer {
 public:
  SeqMatchLocalizer(const LocalizerConfig& cfg, const LocalizationMap& map)
      : cfg_(cfg), map_(map),
        dist_(static_cast<Eigen::Index>(cfg.seq.seq_length), static_cast<Eigen::Index>(map.size())) {}

  std::optional<StepResult> step(const StepInput& in) override {
    const std::size_t len = cfg_.seq.seq_length;
    if (rows_ >= len) return std::nullopt;
    dist_.row(static_cast<Eigen::Index>(rows_++)) = embedding_distances(in.embedding, map_).transpose();
    if (rows_ < len) return std::nullopt;
    const MatchResult m = sequence_match_distances(dist_, cfg_.seq);
    StepResult r;
    r.score = m.score;
    r.map_index = m.index;
    // Scored on the first image pair of the sequence.
    r.map_pose = r.estimate = map_.poses()[m.index];
    r.truth_step = 0;
    r.final = true;
    return r;
  }

 private:
  LocalizerConfig cfg_;
  const LocalizationMap& map_;
  Eigen::MatrixXd dist_;
  std::size_t rows_ = 0;
};

}  // namespace

std::unique_ptr<Localizer> make_localizer(const LocalizerConfig& cfg, const LocalizationMap& map,
                                          std::uint64_t seed) {
  validate(cfg);
  switch (cfg.method) {
    case Method::kTopological: return std::make_unique<TopoLocalizer>(cfg, map);
    case Method::kMcl: return std::make_unique<MclLocalizer>(cfg, map, seed);
    case Method::kSingle: return std::make_unique<SingleLocalizer>(map);
    case Method::kSeqMatch: return std::make_unique<SeqMatchLocalizer>(cfg, map);
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown method");
}

double nominal_index_slope(const SensorStream& sensors, const LocalizationMap& map) {
  auto median = [](std::vector<double> v) {
    std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  if (sensors.odometry.empty() || map.size() < 2) {
    throw Error(ErrorCode::kInvalidArgument, "nominal slope needs odometry and two references");
  }
  std::vector<double> steps, spacing;
  for (const Pose& u : sensors.odometry) steps.push_back(u.translation.norm());
  for (std::size_t i = 0; i + 1 < map.size(); ++i) {
    spacing.push_back((map.poses()[i + 1].translation - map.poses()[i].translation).norm());
  }
  const double ref = median(spacing);
  if (!(ref > 0.0)) throw Error(ErrorCode::kInvalidArgument, "reference poses do not advance");
  return median(steps) / ref;
}

}  // namespace bayesvpr
