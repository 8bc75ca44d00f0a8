#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "mpr/trajectory.hpp"
#include "mpr/vehicle.hpp"

namespace mpr {

using Vec10 = Eigen::Matrix<double, 10, 1>;

/// Solver configuration for the jerk-minimal boundary-value problem.
struct OcpConfig {
  // Weights normalize the squared jerks by their maximal allowed values,
  // taking j_max = a_max per second in each direction.
  double jerk_weight_long = 1.0 / (11.5 * 11.5);
  double jerk_weight_lat = 1.0 / (4.9 * 4.9);
  double smoothing_eps = 0.0;  // reserved for the g-g term; 0 = exact

  // Augmented-Lagrangian schedule and tolerances.
  double penalty_initial = 10.0;
  double penalty_growth = 5.0;
  double penalty_max = 1e8;
  double inner_tol = 1e-6;
  int inner_max_iters = 300;
  int max_outer_iters = 25;
  double feasibility_tol = 1e-4;

  // Declare hopeless once the violation stalls this far from feasible.
  double stall_violation_factor = 50.0;

  void validate() const;
  uint64_t hash() const;

  static OcpConfig defaults_for(const VehicleParams& params);
};

struct OcpSolution {
  std::vector<State> states;      // n_points entries
  std::vector<Control> controls;  // n_points-1 entries; the last one is zero
  double objective = 0.0;
  double max_constraint_violation = 0.0;
  bool converged = false;
  int outer_iters = 0;
  std::vector<double> violation_history;  // max violation after each outer iteration

  /// Node states as an (n_points x 5) matrix with columns (x, y, v, steer, yaw).
  Trajectory trajectory() const;
};

/// Trapezoidal quadrature of w1*j_long^2 + w2*j_lat^2 over the grid. Nodes
/// take the control of their left interval; the final node holds the last
/// interval's control.
double objective(const std::vector<State>& states, const std::vector<Control>& controls,
                 const TimeGrid& grid, const OcpConfig& config, const VehicleParams& params);

/// Ten boundary residuals: [x(0), y(0), d(0)-d0, v(0)-v0, theta(0)] followed by
/// [x(T)-xf, y(T)-yf, d(T), a(T), theta(T)-thetaf].
Vec10 boundary_residual(const OcpSolution& solution, const Query& query, const TimeGrid& grid);

/// Solve the jerk-minimal boundary-value problem by direct single shooting
/// over the interval controls plus a free initial acceleration. Returns
/// converged=false when the outer loop exhausts without reaching feasibility;
/// such queries are dropped during dataset generation.
OcpSolution solve(const Query& query, const VehicleParams& params, const TimeGrid& grid,
                  const OcpConfig& config);

// --- internals, exposed for tests and diagnostics ---------------------------

/// Augmented-Lagrangian merit function over the scaled decision vector
/// [a0, (j, vd) per free interval]; the last control interval is pinned to
/// zero. value_and_grad runs a reverse (adjoint) sweep through the RK4
/// rollout. Instances are not safe to share across threads.
class AugLagProblem {
 public:
  AugLagProblem(const Query& query, const VehicleParams& params, const TimeGrid& grid,
                const OcpConfig& config);

  int dim() const { return 1 + 2 * n_free_; }
  int n_eq() const { return 5; }
  int n_ineq() const { return 5 * grid_.n_points + 2 * grid_.n_intervals(); }

  /// Interp-branch initialization converted to controls (zero jerk, constant
  /// steer rate returning the wheel to center).
  Eigen::VectorXd initial_point() const;

  double value(const Eigen::VectorXd& d) const;
  double value_and_grad(const Eigen::VectorXd& d, Eigen::VectorXd& grad) const;

  void constraints(const Eigen::VectorXd& d, Eigen::VectorXd& eq, Eigen::VectorXd& ineq) const;
  void rollout(const Eigen::VectorXd& d, std::vector<State>& states,
               std::vector<Control>& controls) const;

  Eigen::VectorXd eq_multipliers;
  Eigen::VectorXd ineq_multipliers;
  double penalty;

 private:
  double eval(const Eigen::VectorXd& d, Eigen::VectorXd* grad) const;

  Query query_;
  VehicleParams params_;
  TimeGrid grid_;
  OcpConfig config_;
  int n_free_;          // decision-carrying control intervals
  double scale_a_, scale_j_, scale_d_;
  friend OcpSolution solve(const Query&, const VehicleParams&, const TimeGrid&,
                           const OcpConfig&);
};

}  // namespace mpr
