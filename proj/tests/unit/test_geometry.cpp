#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <doctest.h>

#include "bayesvpr/error.hpp"
#include "bayesvpr/geometry.hpp"
#include "support.hpp"

using namespace bayesvpr;
using bayesvpr::test::random_pose;
using bayesvpr::test::random_rotation;
using bayesvpr::test::random_twist;
using bayesvpr::test::series_exp;

namespace {

Eigen::Matrix4d twist_matrix(const Twist& xi) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Zero();
  m.topLeftCorner<3, 3>() = skew(xi.phi);
  m.topRightCorner<3, 1>() = xi.rho;
  return m;
}

Eigen::Matrix3d rot_z(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

}  // namespace

TEST_CASE("exp of zero twist is the identity") {
  const Pose p = exp_map(Twist{});
  CHECK((p.rotation - Eigen::Matrix3d::Identity()).norm() == 0.0);
  CHECK(p.translation.norm() == 0.0);
}

TEST_CASE("exp of a quarter yaw") {
  const Pose p = exp_map(Twist({0, 0, 0}, {0, 0, std::numbers::pi / 2}));
  CHECK((p.rotation - rot_z(std::numbers::pi / 2)).norm() < 1e-15);
  CHECK(p.translation.norm() == 0.0);
}

TEST_CASE("exp matches the matrix power series") {
  std::mt19937_64 rng(7);
  for (int i = 0; i < 200; ++i) {
    const Twist xi = random_twist(rng, 3.0, 3.0);
    const Eigen::Matrix4d oracle = series_exp(twist_matrix(xi));
    CHECK((exp_map(xi).matrix() - oracle).norm() < 1e-12);
  }
  // Small angles exercise the Taylor branches.
  for (double a : {1e-3, 1e-5, 1e-9, 1e-12, 0.0}) {
    const Twist xi({1.0, -2.0, 0.5}, Eigen::Vector3d(0.3, -0.4, 0.5).normalized() * a);
    CHECK((exp_map(xi).matrix() - series_exp(twist_matrix(xi))).norm() < 1e-14);
  }
}

TEST_CASE("log inverts exp away from pi") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi - 1e-6);
  double worst = 0.0;
  for (int i = 0; i < 2000; ++i) {
    Twist xi = random_twist(rng, 10.0, 1.0);
    xi.phi = xi.phi.normalized() * angle(rng);
    const Twist back = log_map(exp_map(xi));
    worst = std::max(worst, (back.vector() - xi.vector()).norm());
  }
  CHECK(worst <= 1e-9);
}

TEST_CASE("log of identity and half turn") {
  CHECK(log_map(Pose::identity()).vector().norm() == 0.0);
  const Twist t = log_map(Pose(rot_z(std::numbers::pi), Eigen::Vector3d::Zero()));
  CHECK((t.phi - Eigen::Vector3d(0, 0, std::numbers::pi)).norm() < 1e-12);
  // Deterministic sign: largest-magnitude axis component positive.
  const Eigen::Matrix3d r = so3_exp(Eigen::Vector3d(-3.0, 1.0, 0.5).normalized() * std::numbers::pi);
  const Eigen::Vector3d phi = so3_log(r);
  CHECK(std::abs(phi.norm() - std::numbers::pi) < 1e-9);
  CHECK(phi.x() > 0.0);
  CHECK((so3_exp(phi) - r).norm() < 1e-9);
}

TEST_CASE("exp of log reproduces random poses") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 500; ++i) {
    const Pose p = random_pose(rng, 50.0);
    CHECK((exp_map(log_map(p)).matrix() - p.matrix()).norm() < 1e-9);
  }
}

TEST_CASE("so3 log near pi stays accurate") {
  for (double eps : {1e-3, 1e-6, 1e-9}) {
    const Eigen::Vector3d axis = Eigen::Vector3d(0.2, -0.7, 0.4).normalized();
    const Eigen::Vector3d phi = axis * (std::numbers::pi - eps);
    CHECK((so3_log(so3_exp(phi)) - phi).norm() < 1e-7);
  }
}

TEST_CASE("compose") {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 200; ++i) {
    const Pose t = random_pose(rng, 20.0);
    const Twist xi = random_twist(rng, 2.0, 1.0);
    CHECK((compose(t, Twist{}).matrix() - t.matrix()).norm() < 1e-12);
    CHECK((compose(Pose::identity(), xi).matrix() - exp_map(xi).matrix()).norm() < 1e-12);
    // T exp(xi) exp(-xi) recovers T; oracle is plain 4x4 products.
    const Eigen::Matrix4d oracle = t.matrix() * series_exp(twist_matrix(xi));
    const Pose c = compose(t, xi);
    CHECK((c.matrix() - oracle).norm() < 1e-9);
    CHECK((compose(c, -xi).matrix() - t.matrix()).norm() < 1e-9);
    CHECK(c.is_valid());
  }
}

TEST_CASE("compose re-orthonormalizes drifted rotations") {
  Pose t = Pose::identity();
  t.rotation(0, 1) = 1e-6;
  CHECK_FALSE(t.is_valid());
  CHECK(compose(t, Twist{}).is_valid());
}

TEST_CASE("pose products are associative") {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 200; ++i) {
    const Pose a = random_pose(rng, 10.0), b = random_pose(rng, 10.0), c = random_pose(rng, 10.0);
    CHECK((((a * b) * c).matrix() - (a * (b * c)).matrix()).norm() < 1e-9);
  }
}

TEST_CASE("pose_distance examples") {
  const PoseMetricParams m{15.0};
  std::mt19937_64 rng(23);
  const Pose p = random_pose(rng, 10.0);
  CHECK(pose_distance(p, p, m) == 0.0);
  Pose q = p;
  q.translation += Eigen::Vector3d(0, 3, 0);
  CHECK(pose_distance(p, q, m) == doctest::Approx(3.0).epsilon(1e-14));
  const Pose r(p.rotation * rot_z(std::numbers::pi / 2), p.translation);
  CHECK(pose_distance(p, r, m) == doctest::Approx(15.0 * std::numbers::pi / 2).epsilon(1e-12));
  CHECK(pose_distance(p, r, m) == doctest::Approx(23.5619).epsilon(1e-5));
}

TEST_CASE("pose_distance is a metric on random triples") {
  const PoseMetricParams m{15.0};
  std::mt19937_64 rng(29);
  for (int i = 0; i < 1000; ++i) {
    const Pose a = random_pose(rng, 5.0), b = random_pose(rng, 5.0), c = random_pose(rng, 5.0);
    const double ab = pose_distance(a, b, m), ba = pose_distance(b, a, m);
    CHECK(ab >= 0.0);
    CHECK(std::abs(ab - ba) <= 1e-12);
    CHECK(pose_distance(a, c, m) <= ab + pose_distance(b, c, m) + 1e-12);
  }
}

TEST_CASE("rotation angle is accurate at both ends") {
  for (double a : {1e-12, 1e-8, 1e-4, 1.0, std::numbers::pi - 1e-4, std::numbers::pi - 1e-8}) {
    const Eigen::Matrix3d r = so3_exp(Eigen::Vector3d(0.6, 0.0, 0.8) * a);
    CHECK(rotation_angle_between(Eigen::Matrix3d::Identity(), r) == doctest::Approx(a).epsilon(1e-7));
  }
  CHECK(rotation_angle_between(Eigen::Matrix3d::Identity(), rot_z(std::numbers::pi)) ==
        doctest::Approx(std::numbers::pi).epsilon(1e-14));
}

TEST_CASE("chordal mean examples") {
  const Eigen::Matrix3d r = rot_z(0.7);
  const std::vector<Eigen::Matrix3d> one{r};
  const std::vector<double> w1{1.0};
  CHECK((rotation_chordal_mean(one, w1) - r).norm() < 1e-12);

  const std::vector<Eigen::Matrix3d> sym{rot_z(0.4), rot_z(-0.4)};
  const std::vector<double> half{0.5, 0.5};
  CHECK((rotation_chordal_mean(sym, half) - Eigen::Matrix3d::Identity()).norm() < 1e-12);

  // 0 and 60 degrees: brute-force grid over yaw for the Frobenius objective.
  const std::vector<Eigen::Matrix3d> pair{rot_z(0.0), rot_z(std::numbers::pi / 3)};
  const Eigen::Matrix3d mean = rotation_chordal_mean(pair, half);
  double best_yaw = 0.0, best = 1e300;
  for (int i = 0; i <= 600000; ++i) {
    const double yaw = -std::numbers::pi + 2.0 * std::numbers::pi * i / 600000.0;
    const Eigen::Matrix3d c = rot_z(yaw);
    const double obj = (c - pair[0]).squaredNorm() + (c - pair[1]).squaredNorm();
    if (obj < best) best = obj, best_yaw = yaw;
  }
  CHECK(std::abs(best_yaw - std::numbers::pi / 6) < 2e-5);
  CHECK((mean - rot_z(std::numbers::pi / 6)).norm() < 1e-9);
}

TEST_CASE("chordal mean beats random candidates") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uw(0.05, 1.0);
  for (int set = 0; set < 20; ++set) {
    std::vector<Eigen::Matrix3d> rs;
    std::vector<double> ws;
    for (int i = 0; i < 5; ++i) {
      rs.push_back(random_rotation(rng));
      ws.push_back(uw(rng));
    }
    auto objective = [&](const Eigen::Matrix3d& c) {
      double s = 0.0;
      for (int i = 0; i < 5; ++i) s += ws[i] * (c - rs[i]).squaredNorm();
      return s;
    };
    const double mine = objective(rotation_chordal_mean(rs, ws));
    for (int k = 0; k < 2000; ++k) CHECK(mine <= objective(random_rotation(rng)) + 1e-12);
  }
}

TEST_CASE("chordal mean errors") {
  const std::vector<Eigen::Matrix3d> opposite{Eigen::Matrix3d::Identity(),
                                              Eigen::AngleAxisd(std::numbers::pi, Eigen::Vector3d::UnitX()).toRotationMatrix()};
  const std::vector<double> half{0.5, 0.5};
  CHECK_THROWS_WITH_AS(rotation_chordal_mean(opposite, half), doctest::Contains("DegenerateMean"), Error);
  const std::vector<double> zeros{0.0, 0.0};
  CHECK_THROWS_AS(rotation_chordal_mean(opposite, zeros), Error);
  CHECK_THROWS_AS(rotation_chordal_mean({}, {}), Error);
}

TEST_CASE("pose rows round trip") {
  std::mt19937_64 rng(37);
  for (int i = 0; i < 100; ++i) {
    const Pose p = random_pose(rng, 1000.0);
    const Pose q = parse_pose_row(format_pose_row(p));
    CHECK((q.translation - p.translation).norm() == 0.0);
    CHECK((q.rotation - p.rotation).norm() < 1e-12);
    CHECK(p.quaternion().w() >= 0.0);
  }
}

TEST_CASE("pose row parse errors") {
  for (const char* bad : {"1 2 3 1 0 0", "1 2 3 1 0 0 0 9", "1 2 x 1 0 0 0", "1 2 3 2 0 0 0",
                          "1 2 inf 1 0 0 0", ""}) {
    CAPTURE(bad);
    try {
      parse_pose_row(bad);
      FAIL("expected ParseError");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kParseError);
    }
  }
  CHECK_NOTHROW(parse_pose_row("  1\t2 3 1 0 0 0  "));
}
