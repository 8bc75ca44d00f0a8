#pragma once

#include <Eigen/Dense>

namespace mpr {

using Vec2 = Eigen::Vector2d;
using Vec5 = Eigen::Matrix<double, 5, 1>;
using Vec6 = Eigen::Matrix<double, 6, 1>;

/// Parameters of the kinematic single-track model.
struct VehicleParams {
  double wheelbase_m = 2.6;
  double max_steer_rad = 1.0;
  double max_steer_rate_rad_s = 0.4;
  double max_speed_m_s = 28.0;
  double min_speed_m_s = 0.0;
  double max_long_accel_m_s2 = 11.5;
  double max_lat_accel_m_s2 = 4.9;
  double switching_speed_m_s = 7.4;

  /// Throws std::invalid_argument on a non-positive bound or
  /// switching_speed >= max_speed.
  void validate() const;
};

/// Default profile: medium-sized sedan, rear-axle reference point.
VehicleParams bmw_320i();

/// Vehicle state. Derivative vectors returned by dynamics() use this same
/// component order: [x, y, steer, speed, accel, yaw].
struct State {
  double x_m = 0.0;
  double y_m = 0.0;
  double steer_rad = 0.0;
  double speed_m_s = 0.0;
  double accel_m_s2 = 0.0;
  double yaw_rad = 0.0;

  Vec6 vec() const;
  static State from_vec(const Vec6& v);
};

struct Control {
  double long_jerk_m_s3 = 0.0;
  double steer_rate_rad_s = 0.0;
};

/// Time derivative of the state under zero-order-hold controls.
/// Throws std::invalid_argument on non-finite input or |steer| >= pi/2.
Vec6 dynamics(const State& state, const Control& control, const VehicleParams& params);

/// Velocity-dependent longitudinal acceleration bound. The high-speed branch
/// (v > switching speed) takes precedence over the sign branch.
double accel_bound(double accel_m_s2, double speed_m_s, const VehicleParams& params);

/// Constraint vector [|d|-d_max, v-v_max, -v-v_min, |vd|-vd_max, gg-1];
/// the state/control pair is feasible iff every component is <= 0. The last
/// component is the elliptic g-g coupling of longitudinal and lateral
/// acceleration.
Vec5 constraint_values(const State& state, const Control& control, const VehicleParams& params);

/// d/dt of the lateral acceleration (yaw rate times speed).
/// Throws std::invalid_argument when |steer| >= pi/2.
double lateral_jerk(const State& state, const Control& control, const VehicleParams& params);

/// One fixed-step RK4 integration step with zero-order-hold controls.
State integrate_step(const State& state, const Control& control, const VehicleParams& params,
                     double dt);

/// Vector-Jacobian products of the dynamics right-hand side: wx += (df/dx)^T w,
/// wu += (df/du)^T w. Used by adjoint sweeps; inputs are not validated.
void dynamics_vjp(const Vec6& state, const Control& control, const VehicleParams& params,
                  const Vec6& w, Vec6& wx, Vec2& wu);

}  // namespace mpr
