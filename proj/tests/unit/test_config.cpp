#include <sstream>

#include <doctest.h>

#include "bayesvpr/config.hpp"
#include "bayesvpr/error.hpp"

using namespace bayesvpr;

namespace {

RunConfig parse(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfigInvalid);
    return e.what();
  }
  FAIL("expected ConfigInvalid");
  return {};
}

std::string dump(const RunConfig& cfg) {
  std::ostringstream out;
  dump_config(out, cfg);
  return out.str();
}

}  // namespace

TEST_CASE("empty config gives the defaults") {
  const RunConfig cfg = parse("");
  CHECK(cfg.method == Method::kTopological);
  CHECK(cfg.num_trials == 500);
  CHECK(cfg.query_len == 30);
  CHECK(cfg.world.ref_spacing == 0.5);
  CHECK(cfg.world.query_spacing == 3.0);
  CHECK(cfg.localizer.delta == 5.0);
  CHECK(cfg.localizer.topo.w_lower == -2);
  CHECK(cfg.localizer.topo.w_upper == 10);
  CHECK(cfg.localizer.topo.window == 6);
  CHECK(cfg.localizer.mcl.num_particles == 6000);
  CHECK(cfg.localizer.mcl.alpha == 15.0);
  CHECK(cfg.localizer.mcl.k_neighbors == 3);
  CHECK(cfg.localizer.seq.seq_length == 10);
  CHECK_FALSE(cfg.localizer.fixed_lambda1.has_value());
}

TEST_CASE("values are read from their sections") {
  const RunConfig cfg = parse(R"(
[run]
method = mcl
trials = 42
seed = 9
odometry = ground_truth
tolerance = 3m15deg

[world]
route_length = 750
aliasing_segments = 10:40:300; 500:520:700
odom_noise_sigma = 0.1, 0.2, 0.3, 0.01, 0.02, 0.03

[measurement]
lambda1 = 2.5

[mcl]
num_particles = 1500
sigma_init = 1,1,1,0.1,0.1,0.1

[topological]
loop_closure = true
)");
  CHECK(cfg.method == Method::kMcl);
  CHECK(cfg.num_trials == 42);
  CHECK(cfg.seed == 9);
  CHECK(cfg.odometry == OdometrySource::kGroundTruth);
  CHECK(cfg.tolerance == "3m15deg");
  CHECK(cfg.world.route_length == 750.0);
  REQUIRE(cfg.world.aliasing_segments.size() == 2);
  CHECK(cfg.world.aliasing_segments[1].src_start == 500.0);
  CHECK(cfg.world.aliasing_segments[1].dst_start == 700.0);
  CHECK(cfg.world.odom_noise_sigma(5) == 0.03);
  CHECK(*cfg.localizer.fixed_lambda1 == 2.5);
  CHECK(cfg.localizer.mcl.num_particles == 1500);
  CHECK(cfg.localizer.mcl.sigma_init(3) == 0.1);
  CHECK(cfg.localizer.topo.loop_closure);
  CHECK(cfg.world.query_len == 30);
}

TEST_CASE("dump round trips") {
  RunConfig cfg = parse(R"(
[run]
method = seqmatch
[world]
appearance_noise_sigma = 0.123456789
random_alias_pairs = 4
aliasing_segments = 1:2:3
[measurement]
lambda1 = 0.3
[seqmatch]
nominal_slope = 5.5
[bench]
methods = mcl, single
)");
  const std::string first = dump(cfg);
  const RunConfig again = parse(first);
  CHECK(dump(again) == first);
  CHECK(again.world.appearance_noise_sigma == 0.123456789);
  CHECK(*again.nominal_slope == 5.5);
  CHECK(again.bench_methods == std::vector<Method>{Method::kMcl, Method::kSingle});
  CHECK(dump(parse(dump(RunConfig{}))) == dump(RunConfig{}));
}

TEST_CASE("unknown and malformed keys are rejected") {
  CHECK(error_of("[run]\nmethdo = mcl\n").find("run.methdo") != std::string::npos);
  CHECK(error_of("[nowhere]\nx = 1\n").find("nowhere.x") != std::string::npos);
  CHECK(error_of("[run]\ntrials = many\n").find("run.trials") != std::string::npos);
  CHECK(error_of("[run]\nmethod = graph\n").find("method") != std::string::npos);
  CHECK(error_of("[world]\nodom_noise_sigma = 1,2,3\n").find("odom_noise_sigma") != std::string::npos);
  CHECK(error_of("[world]\naliasing_segments = 1:2\n").find("aliasing_segments") != std::string::npos);
  CHECK(error_of("stray = 1\n").find("stray") != std::string::npos);
}

TEST_CASE("semantic validation names the key") {
  CHECK(error_of("[world]\nroute_length = 0\n").find("route_length") != std::string::npos);
  CHECK(error_of("[run]\ntolerance = 1m2deg\n").find("tolerance") != std::string::npos);
  CHECK(error_of("[mcl]\nnum_particles = 0\n").find("num_particles") != std::string::npos);
  CHECK(error_of("[topological]\nw_lower = 3\nw_upper = 1\n").find("w_lower") != std::string::npos);
  error_of("[seqmatch]\nv_min = 2\nv_max = 1\n");
  error_of("[run]\ntrials = 0\n");
}

TEST_CASE("missing file is a parse error") {
  try {
    load_config("/nonexistent/bayesvpr.ini");
    FAIL("expected ParseError");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kParseError);
  }
}
