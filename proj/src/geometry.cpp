#include "bayesvpr/geometry.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <numbers>
#include <ostream>

#include <Eigen/SVD>

#include "bayesvpr/error.hpp"

namespace bayesvpr {

namespace {

// Below these angles the closed-form coefficients lose precision to
// cancellation and are replaced by truncated Taylor series.
constexpr double kSmallAngle = 1e-8;
constexpr double kSeriesAngle = 1e-2;
constexpr double kOrthonormalTol = 1e-9;

// sin(x)/x
double coeff_a(double x) {
  if (x < kSmallAngle) return 1.0 - x * x / 6.0;
  return std::sin(x) / x;
}

// (1 - cos x)/x^2, written with the half-angle identity to stay accurate.
double coeff_b(double x) {
  if (x < kSmallAngle) return 0.5 - x * x / 24.0;
  const double s = std::sin(0.5 * x) / (0.5 * x);
  return 0.5 * s * s;
}

// (x - sin x)/x^3
double coeff_c(double x) {
  if (x < kSeriesAngle) {
    const double x2 = x * x;
    return 1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0 - x2 * x2 * x2 / 362880.0;
  }
  return (x - std::sin(x)) / (x * x * x);
}

// (1 - x sin x / (2 (1 - cos x))) / x^2, the K^2 coefficient of V^{-1}.
double coeff_vinv(double x) {
  if (x < kSeriesAngle) {
    const double x2 = x * x;
    return 1.0 / 12.0 + x2 / 720.0 + x2 * x2 / 30240.0 + x2 * x2 * x2 / 1209600.0;
  }
  const double half = 0.5 * x;
  return (1.0 - half * std::cos(half) / std::sin(half)) / (x * x);
}

}  // namespace

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Eigen::Vector3d vee(const Eigen::Matrix3d& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& phi) {
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  return Eigen::Matrix3d::Identity() + coeff_a(theta) * k + coeff_b(theta) * k * k;
}

Eigen::Vector3d so3_log(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d axis_sin2 = vee(r - r.transpose());  // 2 sin(theta) a
  const double s = 0.5 * axis_sin2.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  const double theta = std::atan2(s, c);

  if (theta < std::numbers::pi - kSeriesAngle) {
    if (s == 0.0) return Eigen::Vector3d::Zero();
    return axis_sin2 * (0.5 * theta / s);
  }

  // Near pi the antisymmetric part vanishes; recover the axis from the
  // symmetric part (1 - cos) a a^T instead.
  const Eigen::Matrix3d sym = 0.5 * (r + r.transpose()) - c * Eigen::Matrix3d::Identity();
  Eigen::Index col = 0;
  sym.diagonal().maxCoeff(&col);
  Eigen::Vector3d axis = sym.col(col).normalized();

  if (s > 1e-12) {
    if (axis.dot(axis_sin2) < 0.0) axis = -axis;
  } else {
    Eigen::Index big = 0;
    axis.cwiseAbs().maxCoeff(&big);
    if (axis(big) < 0.0) axis = -axis;
  }
  return theta * axis;
}

double rotation_angle_between(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2) {
  // With R = r1^T r2: sin(theta) from the antisymmetric part, cos(theta) from
  // the trace. Both stay well conditioned next to 0 and pi.
  const Eigen::Matrix3d r = r1.transpose() * r2;
  const Eigen::Vector3d a(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  return std::atan2(0.5 * a.norm(), 0.5 * (r.trace() - 1.0));
}

Pose exp_map(const Twist& xi) {
  const double theta = xi.phi.norm();
  const Eigen::Matrix3d k = skew(xi.phi);
  const Eigen::Matrix3d k2 = k * k;
  const double b = coeff_b(theta);
  const Eigen::Matrix3d r = Eigen::Matrix3d::Identity() + coeff_a(theta) * k + b * k2;
  const Eigen::Matrix3d v = Eigen::Matrix3d::Identity() + b * k + coeff_c(theta) * k2;
  return {r, v * xi.rho};
}

Twist log_map(const Pose& pose) {
  const Eigen::Vector3d phi = so3_log(pose.rotation);
  const double theta = phi.norm();
  const Eigen::Matrix3d k = skew(phi);
  const Eigen::Matrix3d v_inv =
      Eigen::Matrix3d::Identity() - 0.5 * k + coeff_vinv(theta) * k * k;
  return {v_inv * pose.translation, phi};
}

Pose compose(const Pose& pose, const Twist& xi) {
  Pose out = pose * exp_map(xi);
  const double drift =
      (out.rotation.transpose() * out.rotation - Eigen::Matrix3d::Identity()).norm();
  if (drift > kOrthonormalTol) out.rotation = project_to_so3(out.rotation);
  return out;
}

double pose_distance(const Pose& a, const Pose& b, const PoseMetricParams& params) {
  return (a.translation - b.translation).norm() +
         params.alpha * rotation_angle_between(a.rotation, b.rotation);
}

Eigen::Matrix3d project_to_so3(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  const double d = (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0;
  return u * Eigen::Vector3d(1.0, 1.0, d).asDiagonal() * v.transpose();
}

Eigen::Matrix3d rotation_chordal_mean(std::span<const Eigen::Matrix3d> rotations,
                                      std::span<const double> weights) {
  if (rotations.empty() || rotations.size() != weights.size()) {
    throw Error(ErrorCode::kInvalidArgument,
                "chordal mean needs one weight per rotation and at least one rotation");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw Error(ErrorCode::kInvalidArgument, "chordal mean weights must be finite and >= 0");
    }
    total += w;
  }
  if (!(total > 0.0)) throw Error(ErrorCode::kInvalidArgument, "chordal mean weights sum to 0");

  Eigen::Matrix3d sum = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < rotations.size(); ++i) sum += (weights[i] / total) * rotations[i];

  Eigen::JacobiSVD<Eigen::Matrix3d> svd(sum, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d& sv = svd.singularValues();
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();
  const bool flip = (u * v.transpose()).determinant() < 0.0;
  if (sv(1) < 1e-12 || (flip && sv(1) - sv(2) < 1e-12)) {
    throw Error(ErrorCode::kDegenerateMean, "weighted rotation sum has no unique projection");
  }
  return u * Eigen::Vector3d(1.0, 1.0, flip ? -1.0 : 1.0).asDiagonal() * v.transpose();
}

Pose Pose::from_quaternion(const Eigen::Vector3d& t, const Eigen::Quaterniond& q) {
  return {q.normalized().toRotationMatrix(), t};
}

Eigen::Matrix4d Pose::matrix() const {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = rotation;
  m.topRightCorner<3, 1>() = translation;
  return m;
}

Eigen::Quaterniond Pose::quaternion() const {
  Eigen::Quaterniond q(rotation);
  q.normalize();
  if (q.w() < 0.0 || (q.w() == 0.0 && (q.x() < 0.0 || (q.x() == 0.0 && (q.y() < 0.0 ||
                                                                        (q.y() == 0.0 && q.z() < 0.0)))))) {
    q.coeffs() = -q.coeffs();
  }
  return q;
}

bool Pose::is_valid(double tol) const {
  if (!rotation.allFinite() || !translation.allFinite()) return false;
  const double ortho = (rotation.transpose() * rotation - Eigen::Matrix3d::Identity()).norm();
  return ortho <= tol && std::abs(rotation.determinant() - 1.0) <= tol;
}

namespace {

void append_double(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  out.append(buf, res.ptr);
}

}  // namespace

std::string format_pose_row(const Pose& pose) {
  const Eigen::Quaterniond q = pose.quaternion();
  const double values[7] = {pose.translation.x(), pose.translation.y(), pose.translation.z(),
                            q.w(), q.x(), q.y(), q.z()};
  std::string out;
  for (int i = 0; i < 7; ++i) {
    if (i) out.push_back(' ');
    append_double(out, values[i]);
  }
  return out;
}

Pose parse_pose_row(const std::string& line) {
  double values[7];
  int count = 0;
  const char* p = line.data();
  const char* end = line.data() + line.size();
  while (true) {
    while (p < end && std::isspace(static_cast<unsigned char>(*p))) ++p;
    if (p == end) break;
    if (count == 7) throw Error(ErrorCode::kParseError, "pose row has more than 7 fields");
    const auto res = std::from_chars(p, end, values[count]);
    if (res.ec != std::errc() ||
        (res.ptr != end && !std::isspace(static_cast<unsigned char>(*res.ptr)))) {
      throw Error(ErrorCode::kParseError, "bad number in pose row at column " +
                                              std::to_string(p - line.data() + 1));
    }
    ++count;
    p = res.ptr;
  }
  if (count != 7) {
    throw Error(ErrorCode::kParseError,
                "pose row needs 7 fields (x y z qw qx qy qz), got " + std::to_string(count));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::kParseError, "non-finite value in pose row");
  }
  const Eigen::Quaterniond q(values[3], values[4], values[5], values[6]);
  if (std::abs(q.norm() - 1.0) > 1e-6) {
    throw Error(ErrorCode::kParseError, "pose row quaternion is not unit length");
  }
  return Pose::from_quaternion({values[0], values[1], values[2]}, q);
}

void write_pose_rows(std::ostream& out, std::span<const Pose> poses) {
  for (const Pose& pose : poses) out << format_pose_row(pose) << '\n';
}

}  // namespace bayesvpr
