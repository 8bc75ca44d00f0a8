#pragma once

#include <Eigen/Dense>

#include "mpr/vehicle.hpp"

namespace mpr {

/// Uniform output time grid tau_i = i * step_s, i = 0..n_points-1.
struct TimeGrid {
  double horizon_s = 3.0;
  double step_s = 0.1;
  int n_points = 31;

  double time_at(int i) const { return step_s * static_cast<double>(i); }
  int n_intervals() const { return n_points - 1; }

  /// Throws std::invalid_argument unless (n_points-1)*step == horizon.
  void validate() const;
};

/// Boundary-condition query in the vehicle-centered frame: initial speed and
/// steering angle, final position and yaw.
struct Query {
  double v0_m_s = 0.0;
  double delta0_rad = 0.0;
  double xf_m = 0.0;
  double yf_m = 0.0;
  double thetaf_rad = 0.0;

  Vec5 vec() const;
  static Query from_vec(const Vec5& v);
};

/// A trajectory is an (n_points x 5) matrix with channel columns
/// (x, y, v, steer, yaw). flatten() stacks the five channel blocks into one
/// vector of length 5*n_points; Eigen's column-major storage makes this a
/// plain reshape.
using Trajectory = Eigen::MatrixXd;

inline Eigen::VectorXd flatten(const Trajectory& traj) {
  return Eigen::Map<const Eigen::VectorXd>(traj.data(), traj.size());
}

inline Trajectory unflatten(const Eigen::VectorXd& v, int n_points) {
  return Eigen::Map<const Trajectory>(v.data(), n_points, 5);
}

}  // namespace mpr
