#pragma once

// Shared helpers for the unit tests.

#include <filesystem>
#include <random>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "bayesvpr/geometry.hpp"

namespace bayesvpr::test {

inline Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q.toRotationMatrix();
}

inline Pose random_pose(std::mt19937_64& rng, double extent) {
  std::uniform_real_distribution<double> u(-extent, extent);
  return {random_rotation(rng), Eigen::Vector3d(u(rng), u(rng), u(rng))};
}

inline Twist random_twist(std::mt19937_64& rng, double rho_scale, double phi_scale) {
  std::normal_distribution<double> n(0.0, 1.0);
  return {Eigen::Vector3d(n(rng), n(rng), n(rng)) * rho_scale,
          Eigen::Vector3d(n(rng), n(rng), n(rng)) * phi_scale};
}

/// Matrix exponential by scaling and squaring of a 30-term power series.
template <typename M>
M series_exp(const M& a) {
  int squarings = 0;
  double norm = a.norm();
  while (norm > 0.5) {
    norm *= 0.5;
    ++squarings;
  }
  const M scaled = a / std::ldexp(1.0, squarings);
  M term = M::Identity(a.rows(), a.cols());
  M sum = term;
  for (int k = 1; k <= 30; ++k) {
    term = term * scaled / static_cast<double>(k);
    sum += term;
  }
  for (int i = 0; i < squarings; ++i) sum = sum * sum;
  return sum;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const std::filesystem::path dir = std::filesystem::temp_directory_path() / ("bayesvpr_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace bayesvpr::test
