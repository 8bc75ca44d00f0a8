#include "mpr/vehicle.hpp"

#include <cmath>
#include <stdexcept>

namespace mpr {

namespace {

bool all_finite(const State& s, const Control& u) {
  return std::isfinite(s.x_m) && std::isfinite(s.y_m) && std::isfinite(s.steer_rad) &&
         std::isfinite(s.speed_m_s) && std::isfinite(s.accel_m_s2) && std::isfinite(s.yaw_rad) &&
         std::isfinite(u.long_jerk_m_s3) && std::isfinite(u.steer_rate_rad_s);
}

// Unchecked right-hand side on raw vectors; hot path for integrators.
inline Vec6 rhs(const Vec6& x, const Control& u, const VehicleParams& p) {
  const double v = x[3];
  const double theta = x[5];
  Vec6 dx;
  dx[0] = v * std::cos(theta);
  dx[1] = v * std::sin(theta);
  dx[2] = u.steer_rate_rad_s;
  dx[3] = x[4];
  dx[4] = u.long_jerk_m_s3;
  dx[5] = v / p.wheelbase_m * std::tan(x[2]);
  return dx;
}

}  // namespace

void VehicleParams::validate() const {
  const bool positive = wheelbase_m > 0 && max_steer_rad > 0 && max_steer_rate_rad_s > 0 &&
                        max_speed_m_s > 0 && max_long_accel_m_s2 > 0 && max_lat_accel_m_s2 > 0 &&
                        switching_speed_m_s > 0;
  if (!positive || min_speed_m_s < 0)
    throw std::invalid_argument("VehicleParams: bounds must be positive (min speed >= 0)");
  if (switching_speed_m_s >= max_speed_m_s)
    throw std::invalid_argument("VehicleParams: switching speed must be below max speed");
}

VehicleParams bmw_320i() { return VehicleParams{}; }

Vec6 State::vec() const {
  Vec6 v;
  v << x_m, y_m, steer_rad, speed_m_s, accel_m_s2, yaw_rad;
  return v;
}

State State::from_vec(const Vec6& v) { return State{v[0], v[1], v[2], v[3], v[4], v[5]}; }

Vec6 dynamics(const State& state, const Control& control, const VehicleParams& params) {
  if (!all_finite(state, control)) throw std::invalid_argument("dynamics: non-finite input");
  if (std::abs(state.steer_rad) >= M_PI / 2)
    throw std::invalid_argument("dynamics: |steer| must be below pi/2");
  return rhs(state.vec(), control, params);
}

double accel_bound(double accel_m_s2, double speed_m_s, const VehicleParams& params) {
  if (speed_m_s > params.switching_speed_m_s)
    return params.max_long_accel_m_s2 * params.switching_speed_m_s / speed_m_s;
  if (accel_m_s2 < 0) return -params.max_long_accel_m_s2;
  return params.max_long_accel_m_s2;
}

Vec5 constraint_values(const State& state, const Control& control, const VehicleParams& params) {
  if (!all_finite(state, control))
    throw std::invalid_argument("constraint_values: non-finite input");
  const double v = state.speed_m_s;
  const double a = state.accel_m_s2;
  const double yaw_rate = v / params.wheelbase_m * std::tan(state.steer_rad);
  const double a_long = accel_bound(a, v, params);
  Vec5 c;
  c[0] = std::abs(state.steer_rad) - params.max_steer_rad;
  c[1] = v - params.max_speed_m_s;
  c[2] = -v - params.min_speed_m_s;
  c[3] = std::abs(control.steer_rate_rad_s) - params.max_steer_rate_rad_s;
  const double lat = yaw_rate * v / params.max_lat_accel_m_s2;
  c[4] = (a / a_long) * (a / a_long) + lat * lat - 1.0;
  return c;
}

double lateral_jerk(const State& state, const Control& control, const VehicleParams& params) {
  if (std::abs(state.steer_rad) >= M_PI / 2)
    throw std::invalid_argument("lateral_jerk: |steer| must be below pi/2");
  const double v = state.speed_m_s;
  const double cos_d = std::cos(state.steer_rad);
  return 2.0 * v * state.accel_m_s2 / params.wheelbase_m * std::tan(state.steer_rad) +
         v * v / (params.wheelbase_m * cos_d * cos_d) * control.steer_rate_rad_s;
}

State integrate_step(const State& state, const Control& control, const VehicleParams& params,
                     double dt) {
  const Vec6 x = state.vec();
  const Vec6 k1 = rhs(x, control, params);
  const Vec6 k2 = rhs(x + 0.5 * dt * k1, control, params);
  const Vec6 k3 = rhs(x + 0.5 * dt * k2, control, params);
  const Vec6 k4 = rhs(x + dt * k3, control, params);
  return State::from_vec(x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
}

void dynamics_vjp(const Vec6& state, const Control& /*control*/, const VehicleParams& params,
                  const Vec6& w, Vec6& wx, Vec2& wu) {
  const double steer = state[2];
  const double v = state[3];
  const double theta = state[5];
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double cos_d = std::cos(steer);
  // wx[j] += sum_i w[i] * d f_i / d x_j; only the nonzero partials appear.
  wx[2] += w[5] * v / (params.wheelbase_m * cos_d * cos_d);
  wx[3] += w[0] * cos_t + w[1] * sin_t + w[5] * std::tan(steer) / params.wheelbase_m;
  wx[4] += w[3];
  wx[5] += -w[0] * v * sin_t + w[1] * v * cos_t;
  wu[0] += w[4];
  wu[1] += w[2];
}

}  // namespace mpr
