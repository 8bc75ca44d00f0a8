#pragma once

#include <filesystem>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "mpr/dataset.hpp"
#include "mpr/models.hpp"

namespace mpr {

/// Obstacle with constant-velocity motion along its heading; (x, y) is the
/// footprint centre.
struct ObstacleSpec {
  double x_m = 0.0;
  double y_m = 0.0;
  double yaw_rad = 0.0;
  double speed_m_s = 0.0;
  double length_m = 4.5;
  double width_m = 2.0;
};

/// Candidate lattice: terminal lateral offsets (absolute lane coordinates),
/// longitudinal advances along the straight reference, and terminal headings.
struct SamplingSpec {
  std::vector<double> lateral_offsets_m{0.0};
  std::vector<double> advances_m{30.0, 45.0, 60.0};
  std::vector<double> headings_rad{0.0};
};

/// Straight-lane world: reference line y = 0, desired speed held constant.
struct Scenario {
  double lane_width_m = 3.5;
  int n_lanes = 2;
  double desired_speed_m_s = 20.0;
  State ego_start;
  double ego_length_m = 4.5;
  double ego_width_m = 2.0;
  std::vector<ObstacleSpec> obstacles;
  SamplingSpec sampling;
};

struct CostWeights {
  double velocity = 0.1;
  double offset = 0.2;
  double collision = 10.0;
  double safety_distance_m = 2.0;
  double footprint_margin_m = 0.2;  // inflation applied to each footprint
  double constraint_tol = 1e-3;     // feasibility slack for candidate checks
};

/// Oriented rectangle (centre, yaw, half extents).
struct Footprint {
  double cx = 0, cy = 0, yaw = 0, half_len = 0, half_wid = 0;
};

/// Separating-axis clearance between two oriented rectangles: the largest
/// gap over the four face axes. Positive values lower-bound the true
/// distance; <= 0 means overlap.
double rect_clearance(const Footprint& a, const Footprint& b);

/// Batch trajectory source: local-frame queries in, local trajectories out.
using TrajectoryGenerator = std::function<std::vector<Trajectory>(const std::vector<Query>&)>;

TrajectoryGenerator generator_from_model(const AnyModel& model);
/// Exact boundary interpolation; mirror-equivariant, useful for tests.
TrajectoryGenerator interp_generator(const TimeGrid& grid);
TrajectoryGenerator analytic_generator(const VehicleParams& params, const TimeGrid& grid);
TrajectoryGenerator ocp_generator(const VehicleParams& params, const TimeGrid& grid,
                                  const OcpConfig& config);

/// Terminal-condition lattice transformed into the ego frame and filtered to
/// the reachable band. Throws std::runtime_error when no candidate survives.
std::vector<Query> sample_endpoints(const State& ego, const Scenario& scenario,
                                    const VehicleParams& params, const TimeGrid& grid);

/// Rigid transform of a local trajectory by the ego pose; speed and steer
/// channels are frame-invariant.
Trajectory to_world(const Trajectory& local, const State& ego_pose);

/// Constant-velocity prediction; result[i] holds all obstacles at node i.
std::vector<std::vector<ObstacleSpec>> predict_obstacles(const std::vector<ObstacleSpec>& now,
                                                         const TimeGrid& grid);

struct CostResult {
  bool rejected = false;
  double cost = 0.0;
  double min_clearance = std::numeric_limits<double>::infinity();
};

/// Velocity/offset/collision cost of a world-frame candidate; rejected on
/// footprint overlap or a constraint violation beyond the tolerance.
CostResult evaluate_cost(const Trajectory& world, const Scenario& scenario,
                         const std::vector<std::vector<ObstacleSpec>>& predicted,
                         const CostWeights& weights, const VehicleParams& params,
                         const TimeGrid& grid);

struct StepResult {
  Trajectory chosen_world;
  int chosen_index = -1;      // -1 = emergency fallback
  std::vector<double> costs;  // NaN where rejected
  double min_clearance = std::numeric_limits<double>::infinity();
  bool emergency = false;
};

/// Samples, generates, scores and picks the cheapest candidate; ties go to
/// the earlier enumeration index. With every candidate rejected, falls back
/// to a max-deceleration straight-line trajectory and sets the emergency
/// flag.
StepResult plan_step(const State& ego, const Scenario& scenario,
                     const TrajectoryGenerator& generator, const CostWeights& weights,
                     const VehicleParams& params, const TimeGrid& grid);

struct StepLog {
  double t = 0.0;
  State ego;
  std::vector<ObstacleSpec> obstacles;
  int chosen_index = -1;
  std::vector<double> costs;
  double min_clearance = std::numeric_limits<double>::infinity();
  bool emergency = false;
};

struct PlanLog {
  std::vector<StepLog> steps;
  double min_clearance() const;
  bool any_emergency() const;
};

/// Receding-horizon loop: plan, execute the first interval of the chosen
/// trajectory, advance the obstacles, repeat.
PlanLog run_receding_horizon(const Scenario& scenario, const TrajectoryGenerator& generator,
                             const CostWeights& weights, const VehicleParams& params,
                             const TimeGrid& grid, int n_steps, double dt = 0.1);

/// One row per step per candidate (plus the ego row), stable column order.
void write_plan_csv(const PlanLog& log, const std::filesystem::path& path);
void write_plan_svg(const PlanLog& log, const Scenario& scenario,
                    const std::filesystem::path& path);

Scenario load_scenario(const std::filesystem::path& path);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

}  // namespace mpr
