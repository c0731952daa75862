#include <cmath>
#include <fstream>
#include <type_traits>

#include <doctest.h>

#include "bayesvpr/dataset.hpp"
#include "bayesvpr/error.hpp"
#include "bayesvpr/localizers.hpp"
#include "support.hpp"

using namespace bayesvpr;
using bayesvpr::test::scratch_dir;

namespace {

template <typename T>
concept HasGroundTruth = requires(T t) { t.ground_truth; };

// Localizers receive SensorStream data through StepInput; neither can carry truth.
static_assert(!HasGroundTruth<SensorStream>);
static_assert(!HasGroundTruth<StepInput>);
static_assert(HasGroundTruth<QueryTraverse>);
static_assert(std::is_same_v<decltype(StepInput::embedding), std::span<const float>>);
static_assert(std::is_same_v<decltype(StepInput::odometry), const Pose*>);

SyntheticWorldConfig small_config() {
  SyntheticWorldConfig cfg;
  cfg.route_length = 400.0;
  cfg.embed_dim = 32;
  cfg.rng_seed = 7;
  return cfg;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvalidArgument;
}

}  // namespace

TEST_CASE("generated world has consistent sizes") {
  const SyntheticWorld w = generate_world(small_config());
  CHECK(w.map.size() == w.ref_arclength.size());
  CHECK(w.map.size() >= 790);
  CHECK(w.map.dim() == 32);
  REQUIRE(w.queries.size() == 1);
  const QueryTraverse& q = w.queries[0];
  CHECK(q.ground_truth.size() == q.size());
  CHECK(q.sensors.odometry.size() + 1 == q.size());
  CHECK(q.size() >= 120);
  for (std::size_t i = 0; i < w.map.size(); ++i) {
    CHECK(w.map.poses()[i].is_valid());
    const Eigen::VectorXf row = w.map.embeddings().row(i);
    CHECK(row.norm() == doctest::Approx(1.0).epsilon(1e-5));
  }
}

TEST_CASE("reference spacing along the route") {
  const SyntheticWorld w = generate_world(small_config());
  for (std::size_t i = 1; i < w.map.size(); ++i) {
    const double step = (w.map.poses()[i].translation - w.map.poses()[i - 1].translation).norm();
    CHECK(step <= 0.51);  // arc length is horizontal; elevation adds a little
    CHECK(step >= 0.49);  // chords of gentle arcs
  }
}

TEST_CASE("noiseless world is identifiable by appearance") {
  const SyntheticWorld w = generate_world(small_config());
  const QueryTraverse& q = w.queries[0];
  for (std::size_t t = 0; t < q.size(); ++t) {
    const Eigen::VectorXd d = embedding_distances(q.sensors.embedding(t), w.map);
    Eigen::Index by_appearance = 0;
    d.minCoeff(&by_appearance);
    const std::size_t by_pose = knn_by_pose_linear(q.ground_truth[t], w.map, 1)[0].index;
    CAPTURE(t);
    CHECK(static_cast<std::size_t>(by_appearance) == by_pose);
  }
}

TEST_CASE("noiseless odometry telescopes to ground truth") {
  const SyntheticWorld w = generate_world(small_config());
  const QueryTraverse& q = w.queries[0];
  Pose p = q.ground_truth[0];
  for (std::size_t t = 1; t < q.size(); ++t) {
    p = p * q.sensors.odometry[t - 1];
    CHECK((p.matrix() - q.ground_truth[t].matrix()).norm() < 1e-9);
  }
  const SensorStream gt = ground_truth_odometry(q);
  for (std::size_t t = 0; t < gt.odometry.size(); ++t) {
    CHECK((gt.odometry[t].matrix() - q.sensors.odometry[t].matrix()).norm() < 1e-12);
  }
}

TEST_CASE("odometry noise perturbs increments") {
  SyntheticWorldConfig cfg = small_config();
  cfg.odom_noise_sigma << 0.2, 0.1, 0.05, 0.01, 0.01, 0.02;
  const SyntheticWorld w = generate_world(cfg);
  const QueryTraverse& q = w.queries[0];
  const SensorStream gt = ground_truth_odometry(q);
  double total = 0.0;
  for (std::size_t t = 0; t < gt.odometry.size(); ++t) {
    total += log_map(gt.odometry[t].inverse() * q.sensors.odometry[t]).vector().norm();
  }
  CHECK(total / double(gt.odometry.size()) > 0.05);
  // Ground truth and appearance do not depend on odometry noise.
  const SyntheticWorld clean = generate_world(small_config());
  CHECK(clean.queries[0].sensors.embeddings == q.sensors.embeddings);
  CHECK((clean.queries[0].ground_truth.back().matrix() - q.ground_truth.back().matrix()).norm() == 0.0);
}

TEST_CASE("aliased segments copy appearance exactly") {
  SyntheticWorldConfig cfg = small_config();
  cfg.aliasing_segments = {{50.0, 80.0, 250.0}};
  const SyntheticWorld w = generate_world(cfg);
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < w.map.size(); ++i) {
    const double s = w.ref_arclength[i];
    if (s < 250.0 || s >= 280.0) continue;
    for (std::size_t j = 0; j < w.map.size(); ++j) {
      if (w.ref_arclength[j] != s - 200.0) continue;
      ++pairs;
      CHECK((w.map.embeddings().row(i) - w.map.embeddings().row(j)).norm() == 0.0f);
      CHECK(pose_distance(w.map.poses()[i], w.map.poses()[j], w.map.metric()) > 50.0);
    }
  }
  CHECK(pairs == 60);
}

TEST_CASE("random alias pairs are recorded") {
  SyntheticWorldConfig cfg = small_config();
  cfg.random_alias_pairs = 3;
  cfg.random_alias_length = 20.0;
  const SyntheticWorld w = generate_world(cfg);
  REQUIRE(w.aliasing.size() == 3);
  for (const AliasSegment& a : w.aliasing) {
    CHECK(a.length() == doctest::Approx(20.0));
    CHECK(a.src_start >= 0.0);
    CHECK(a.dst_start + a.length() <= cfg.route_length + 1e-9);
  }
}

TEST_CASE("generation is deterministic per seed") {
  SyntheticWorldConfig cfg = small_config();
  cfg.appearance_noise_sigma = 0.05;
  cfg.odom_noise_sigma << 0.1, 0.1, 0.1, 0.01, 0.01, 0.01;
  const SyntheticWorld a = generate_world(cfg), b = generate_world(cfg);
  CHECK(a.map.embeddings() == b.map.embeddings());
  CHECK(a.queries[0].sensors.embeddings == b.queries[0].sensors.embeddings);
  for (std::size_t t = 0; t < a.queries[0].sensors.odometry.size(); ++t) {
    CHECK(a.queries[0].sensors.odometry[t].matrix() == b.queries[0].sensors.odometry[t].matrix());
  }
  cfg.rng_seed = 8;
  const SyntheticWorld c = generate_world(cfg);
  CHECK(c.map.embeddings() != a.map.embeddings());
}

TEST_CASE("invalid configs are rejected") {
  auto reject = [](auto edit) {
    SyntheticWorldConfig cfg;
    edit(cfg);
    CHECK(code_of([&] { validate(cfg); }) == ErrorCode::kConfigInvalid);
  };
  reject([](SyntheticWorldConfig& c) { c.route_length = 0.0; });
  reject([](SyntheticWorldConfig& c) { c.ref_spacing = 0.0; });
  reject([](SyntheticWorldConfig& c) { c.query_spacing = -1.0; });
  reject([](SyntheticWorldConfig& c) { c.embed_dim = 1; });
  reject([](SyntheticWorldConfig& c) { c.aliasing_segments = {{900.0, 1100.0, 0.0}}; });
  reject([](SyntheticWorldConfig& c) { c.query_spacing_jitter = 3.0; });
  reject([](SyntheticWorldConfig& c) { c.appearance_noise_sigma = -0.1; });
  CHECK(code_of([] {
          SyntheticWorldConfig c;
          c.route_length = 0.0;
          generate_world(c);
        }) == ErrorCode::kConfigInvalid);
}

TEST_CASE("trial sampling") {
  QueryTraverse q;
  q.sensors.embeddings = EmbeddingMatrix::Zero(30, 2);
  const auto forced = sample_trials(q, 1, 30, 3);
  REQUIRE(forced.size() == 1);
  CHECK(forced[0].offset == 0);
  CHECK(forced[0].length == 30);
  CHECK(code_of([&] { sample_trials(q, 1, 31, 3); }) == ErrorCode::kTraverseTooShort);

  q.sensors.embeddings = EmbeddingMatrix::Zero(229, 2);  // 200 start offsets
  const auto a = sample_trials(q, 500, 30, 11), b = sample_trials(q, 500, 30, 11);
  std::vector<double> bins(10, 0.0);
  for (std::size_t i = 0; i < 500; ++i) {
    CHECK(a[i].offset == b[i].offset);
    CHECK(a[i].id == i);
    CHECK(a[i].offset + 30 <= 229);
    bins[a[i].offset / 20] += 1.0;
  }
  double chi2 = 0.0;
  for (double c : bins) chi2 += (c - 50.0) * (c - 50.0) / 50.0;
  CHECK(chi2 < 21.666);  // 0.99 quantile, 9 degrees of freedom
  const auto c = sample_trials(q, 500, 30, 12);
  std::size_t same = 0;
  for (std::size_t i = 0; i < 500; ++i) same += a[i].offset == c[i].offset;
  CHECK(same < 50);
}

TEST_CASE("traverse files round trip") {
  const auto dir = scratch_dir("dataset_roundtrip");
  SyntheticWorldConfig cfg = small_config();
  cfg.appearance_noise_sigma = 0.02;
  cfg.odom_noise_sigma << 0.1, 0.1, 0.1, 0.01, 0.01, 0.01;
  const SyntheticWorld w = generate_world(cfg);
  save_map(dir / "map", w.map);
  save_traverse(dir / "query", w.queries[0]);
  const LoadedDataset d = load_real_dataset(dir / "map", dir / "query", dir / "query.odom");
  CHECK(d.map.embeddings() == w.map.embeddings());
  CHECK(d.query.sensors.embeddings == w.queries[0].sensors.embeddings);
  CHECK(d.query.sensors.frame == OdometryFrame::kBody);
  for (std::size_t i = 0; i < w.map.size(); ++i) {
    CHECK((d.map.poses()[i].matrix() - w.map.poses()[i].matrix()).norm() < 1e-12);
  }
  for (std::size_t t = 0; t < d.query.sensors.odometry.size(); ++t) {
    CHECK((d.query.sensors.odometry[t].matrix() - w.queries[0].sensors.odometry[t].matrix()).norm() < 1e-12);
    CHECK((d.query.ground_truth[t].matrix() - w.queries[0].ground_truth[t].matrix()).norm() < 1e-12);
  }

  const std::vector<TrialSlice> trials{{0, 4, 30}, {1, 0, 30}, {2, 17, 30}};
  write_trials(dir / "t.trials", trials);
  CHECK(read_trials(dir / "t.trials") == std::vector<std::size_t>{4, 0, 17});
}

TEST_CASE("dataset file errors") {
  const auto dir = scratch_dir("dataset_errors");
  const SyntheticWorld w = generate_world(small_config());
  const QueryTraverse& q = w.queries[0];
  save_map(dir / "map", w.map);
  save_traverse(dir / "query", q);

  // T rows of odometry for T queries.
  std::vector<Pose> too_many = q.sensors.odometry;
  too_many.push_back(Pose::identity());
  write_odometry(dir / "long.odom", too_many, OdometryFrame::kBody);
  CHECK(code_of([&] { load_real_dataset(dir / "map", dir / "query", dir / "long.odom"); }) ==
        ErrorCode::kCountMismatch);

  // Truncated query embeddings.
  {
    std::ifstream in(dir / "query.emb", std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream(dir / "cut.emb", std::ios::binary) << bytes.substr(0, bytes.size() - 10);
  }
  std::filesystem::copy_file(dir / "query.poses", dir / "cut.poses");
  CHECK(code_of([&] { load_real_dataset(dir / "map", dir / "cut", dir / "query.odom"); }) ==
        ErrorCode::kParseError);

  std::ofstream(dir / "hdr.odom") << "frame=sideways\n0 0 0 1 0 0 0\n";
  CHECK(code_of([&] { read_odometry(dir / "hdr.odom"); }) == ErrorCode::kParseError);
  std::ofstream(dir / "row.odom") << "frame=world\n0 0 0 1 0 0 0\n0 0 0 1 0 0\n";
  try {
    read_odometry(dir / "row.odom");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
    CHECK(std::string(e.what()).find("line 3") != std::string::npos);
  }
  std::ofstream(dir / "ok.odom") << "frame=world\n0 0 0 1 0 0 0\n";
  CHECK(read_odometry(dir / "ok.odom").second == OdometryFrame::kWorld);

  std::ofstream(dir / "bad.trials") << "3\n-1\n";
  CHECK(code_of([&] { read_trials(dir / "bad.trials"); }) == ErrorCode::kParseError);
}
