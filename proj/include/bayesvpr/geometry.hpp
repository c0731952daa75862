#pragma once

// SE(3) / se(3) primitives used by both localizers.
//
// Conventions:
//  - A Pose maps body coordinates into the world frame: p_w = R p_b + t.
//  - Twists are ordered (rho, phi): translational part first, rotational second.
//  - compose(T, xi) = T * exp(xi^), i.e. the increment is applied in the body frame.
//  - Angles are radians everywhere inside the library.

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace bayesvpr {

using Vector6d = Eigen::Matrix<double, 6, 1>;

struct Twist {
  Eigen::Vector3d rho = Eigen::Vector3d::Zero();  // meters
  Eigen::Vector3d phi = Eigen::Vector3d::Zero();  // radians

  Twist() = default;
  Twist(const Eigen::Vector3d& rho_in, const Eigen::Vector3d& phi_in) : rho(rho_in), phi(phi_in) {}

  static Twist from_vector(const Vector6d& v) { return {v.head<3>(), v.tail<3>()}; }
  Vector6d vector() const {
    Vector6d v;
    v << rho, phi;
    return v;
  }
  Twist operator-() const { return {-rho, -phi}; }
};

struct Pose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Pose() = default;
  Pose(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) : rotation(r), translation(t) {}

  static Pose identity() { return {}; }
  static Pose from_quaternion(const Eigen::Vector3d& t, const Eigen::Quaterniond& q);

  Pose inverse() const {
    const Eigen::Matrix3d rt = rotation.transpose();
    return {rt, -rt * translation};
  }

  Pose operator*(const Pose& other) const {
    return {rotation * other.rotation, rotation * other.translation + translation};
  }

  Eigen::Vector3d operator*(const Eigen::Vector3d& p) const { return rotation * p + translation; }

  Eigen::Matrix4d matrix() const;

  /// Canonical unit quaternion (qw >= 0).
  Eigen::Quaterniond quaternion() const;

  /// Orthonormality and determinant within `tol` (Frobenius).
  bool is_valid(double tol = 1e-9) const;
};

struct PoseMetricParams {
  double alpha = 15.0;  // meters per radian
};

Eigen::Matrix3d skew(const Eigen::Vector3d& v);
Eigen::Vector3d vee(const Eigen::Matrix3d& m);

Eigen::Matrix3d so3_exp(const Eigen::Vector3d& phi);

/// Rotation vector with norm in [0, pi]. Exactly at pi the axis is signed so its
/// largest-magnitude component is positive.
Eigen::Vector3d so3_log(const Eigen::Matrix3d& r);

/// Minimum rotation angle between two rotations, i.e. ||log(r1^T r2)||, accurate
/// near both 0 and pi.
double rotation_angle_between(const Eigen::Matrix3d& r1, const Eigen::Matrix3d& r2);

Pose exp_map(const Twist& xi);
Twist log_map(const Pose& pose);

/// T * exp(xi^), re-projected onto SO(3) if the rotation drifts beyond 1e-9.
Pose compose(const Pose& pose, const Twist& xi);

/// d(T1, T2) = ||t1 - t2|| + alpha * angle(R1, R2).
double pose_distance(const Pose& a, const Pose& b, const PoseMetricParams& params);

/// Nearest rotation (Frobenius) to the given matrix, det = +1.
Eigen::Matrix3d project_to_so3(const Eigen::Matrix3d& m);

/// Weighted chordal L2 mean: the SO(3) projection of sum_i w_i R_i.
/// Throws DegenerateMean when the weighted sum is too close to rank one for the
/// projection to be unique, and InvalidArgument on bad inputs.
Eigen::Matrix3d rotation_chordal_mean(std::span<const Eigen::Matrix3d> rotations,
                                      std::span<const double> weights);

// Text row format "x y z qw qx qy qz".
std::string format_pose_row(const Pose& pose);
Pose parse_pose_row(const std::string& line);  // throws ParseError
void write_pose_rows(std::ostream& out, std::span<const Pose> poses);

}  // namespace bayesvpr
