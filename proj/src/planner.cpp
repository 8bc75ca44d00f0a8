#include "mpr/planner.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <json.hpp>

#include "mpr/svg.hpp"

namespace mpr {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

struct Axes {
  double cx, cy, ux, uy;  // centre and heading unit vector
};

Axes axes_of(const Footprint& f) { return {f.cx, f.cy, std::cos(f.yaw), std::sin(f.yaw)}; }
}  // namespace

double rect_clearance(const Footprint& a, const Footprint& b) {
  const Axes aa = axes_of(a), bb = axes_of(b);
  const double dx = bb.cx - aa.cx, dy = bb.cy - aa.cy;
  // Face normals of both rectangles: (ux,uy) and (-uy,ux) each.
  const double axes[4][2] = {{aa.ux, aa.uy}, {-aa.uy, aa.ux}, {bb.ux, bb.uy}, {-bb.uy, bb.ux}};
  double best = -kInf;
  for (const auto& ax : axes) {
    const double centre_dist = std::abs(dx * ax[0] + dy * ax[1]);
    const double ext_a = a.half_len * std::abs(aa.ux * ax[0] + aa.uy * ax[1]) +
                         a.half_wid * std::abs(-aa.uy * ax[0] + aa.ux * ax[1]);
    const double ext_b = b.half_len * std::abs(bb.ux * ax[0] + bb.uy * ax[1]) +
                         b.half_wid * std::abs(-bb.uy * ax[0] + bb.ux * ax[1]);
    best = std::max(best, centre_dist - ext_a - ext_b);
  }
  return best;
}

TrajectoryGenerator generator_from_model(const AnyModel& model) {
  const int M = model.time_grid().n_points;
  return [model, M](const std::vector<Query>& queries) {
    Eigen::MatrixXd q(5, static_cast<Eigen::Index>(queries.size()));
    for (size_t i = 0; i < queries.size(); ++i)
      q.col(static_cast<Eigen::Index>(i)) = queries[i].vec();
    const Eigen::MatrixXd out = model.forward(q);
    std::vector<Trajectory> trajs(queries.size());
    for (size_t i = 0; i < queries.size(); ++i)
      trajs[i] = unflatten(out.col(static_cast<Eigen::Index>(i)), M);
    return trajs;
  };
}

TrajectoryGenerator interp_generator(const TimeGrid& grid) {
  return [grid](const std::vector<Query>& queries) {
    std::vector<Trajectory> trajs(queries.size());
    for (size_t i = 0; i < queries.size(); ++i) trajs[i] = interp_branch(queries[i], grid);
    return trajs;
  };
}

TrajectoryGenerator analytic_generator(const VehicleParams& params, const TimeGrid& grid) {
  return [params, grid](const std::vector<Query>& queries) {
    std::vector<Trajectory> trajs(queries.size());
    for (size_t i = 0; i < queries.size(); ++i)
      trajs[i] = analytic_mp(queries[i], params, grid).first;
    return trajs;
  };
}

TrajectoryGenerator ocp_generator(const VehicleParams& params, const TimeGrid& grid,
                                  const OcpConfig& config) {
  return [params, grid, config](const std::vector<Query>& queries) {
    std::vector<Trajectory> trajs(queries.size());
    for (size_t i = 0; i < queries.size(); ++i)
      trajs[i] = solve(queries[i], params, grid, config).trajectory();
    return trajs;
  };
}

std::vector<Query> sample_endpoints(const State& ego, const Scenario& scenario,
                                    const VehicleParams& params, const TimeGrid& grid) {
  const double v0 = std::clamp(ego.speed_m_s, 0.0, params.max_speed_m_s);
  const double d0 = std::clamp(ego.steer_rad, -params.max_steer_rad, params.max_steer_rad);
  const auto [r_min, r_max] = reachable_range(v0, params, grid.horizon_s);
  const double cos_t = std::cos(ego.yaw_rad), sin_t = std::sin(ego.yaw_rad);
  std::vector<Query> out;
  for (double advance : scenario.sampling.advances_m) {
    for (double offset : scenario.sampling.lateral_offsets_m) {
      for (double heading : scenario.sampling.headings_rad) {
        const double wx = advance;           // relative to the ego x, along the reference
        const double wy = offset - ego.y_m;  // absolute lane offset target
        const double xf = cos_t * wx + sin_t * wy;
        const double yf = -sin_t * wx + cos_t * wy;
        const double r = std::hypot(xf, yf);
        if (r < r_min - 1e-9 || r > r_max + 1e-9) continue;
        out.push_back(Query{v0, d0, xf, yf, heading - ego.yaw_rad});
      }
    }
  }
  if (out.empty()) throw std::runtime_error("sample_endpoints: empty candidate set");
  return out;
}

Trajectory to_world(const Trajectory& local, const State& ego_pose) {
  const double c = std::cos(ego_pose.yaw_rad), s = std::sin(ego_pose.yaw_rad);
  Trajectory world = local;
  for (Eigen::Index i = 0; i < local.rows(); ++i) {
    world(i, 0) = ego_pose.x_m + c * local(i, 0) - s * local(i, 1);
    world(i, 1) = ego_pose.y_m + s * local(i, 0) + c * local(i, 1);
    world(i, 4) = local(i, 4) + ego_pose.yaw_rad;
  }
  return world;
}

std::vector<std::vector<ObstacleSpec>> predict_obstacles(const std::vector<ObstacleSpec>& now,
                                                         const TimeGrid& grid) {
  std::vector<std::vector<ObstacleSpec>> pred(grid.n_points, now);
  for (int i = 0; i < grid.n_points; ++i) {
    const double t = grid.time_at(i);
    for (auto& o : pred[i]) {
      o.x_m += o.speed_m_s * t * std::cos(o.yaw_rad);
      o.y_m += o.speed_m_s * t * std::sin(o.yaw_rad);
    }
  }
  return pred;
}

namespace {

Footprint ego_footprint(double x, double y, double yaw, const Scenario& sc,
                        const VehicleParams& params, double margin) {
  // Node poses are rear-axle referenced; the body centre sits half a
  // wheelbase ahead.
  const double off = 0.5 * params.wheelbase_m;
  return Footprint{x + off * std::cos(yaw), y + off * std::sin(yaw), yaw,
                   0.5 * sc.ego_length_m + margin, 0.5 * sc.ego_width_m + margin};
}

Footprint obstacle_footprint(const ObstacleSpec& o, double margin) {
  return Footprint{o.x_m, o.y_m, o.yaw_rad, 0.5 * o.length_m + margin, 0.5 * o.width_m + margin};
}

bool nodes_feasible(const Trajectory& traj, const VehicleParams& params, const TimeGrid& grid,
                    double tol) {
  const int M = static_cast<int>(traj.rows());
  for (int i = 0; i < M; ++i) {
    const int j = std::min(i, M - 2);
    const double accel = (traj(j + 1, 2) - traj(j, 2)) / grid.step_s;
    const double steer_rate = (traj(j + 1, 3) - traj(j, 3)) / grid.step_s;
    const State s{traj(i, 0), traj(i, 1), traj(i, 3), traj(i, 2), accel, traj(i, 4)};
    if (std::abs(s.steer_rad) >= M_PI / 2) return false;
    if (constraint_values(s, Control{0.0, steer_rate}, params).maxCoeff() > tol) return false;
  }
  return true;
}

}  // namespace

CostResult evaluate_cost(const Trajectory& world, const Scenario& scenario,
                         const std::vector<std::vector<ObstacleSpec>>& predicted,
                         const CostWeights& weights, const VehicleParams& params,
                         const TimeGrid& grid) {
  CostResult res;
  if (!nodes_feasible(world, params, grid, weights.constraint_tol)) {
    res.rejected = true;
    return res;
  }
  double vel_cost = 0.0, off_cost = 0.0, col_cost = 0.0;
  for (Eigen::Index i = 0; i < world.rows(); ++i) {
    const double dv = world(i, 2) - scenario.desired_speed_m_s;
    vel_cost += dv * dv;
    off_cost += world(i, 1) * world(i, 1);
    if (!predicted.empty()) {
      const Footprint ego = ego_footprint(world(i, 0), world(i, 1), world(i, 4), scenario, params,
                                          weights.footprint_margin_m);
      double clearance = kInf;
      for (const auto& o : predicted[static_cast<size_t>(i)])
        clearance = std::min(clearance,
                             rect_clearance(ego, obstacle_footprint(o, weights.footprint_margin_m)));
      res.min_clearance = std::min(res.min_clearance, clearance);
      if (clearance <= 0.0) {
        res.rejected = true;
        return res;
      }
      col_cost += std::exp(-clearance / weights.safety_distance_m);
    }
  }
  res.cost = weights.velocity * vel_cost + weights.offset * off_cost + weights.collision * col_cost;
  return res;
}

namespace {

Trajectory emergency_trajectory(const State& ego, const VehicleParams& params,
                                const TimeGrid& grid) {
  Trajectory t = Trajectory::Zero(grid.n_points, 5);
  const double a = params.max_long_accel_m_s2;
  const double v0 = std::max(0.0, ego.speed_m_s);
  const double t_stop = v0 / a;
  for (int i = 0; i < grid.n_points; ++i) {
    const double tau = std::min(grid.time_at(i), t_stop);
    t(i, 0) = v0 * tau - 0.5 * a * tau * tau;
    t(i, 2) = std::max(0.0, v0 - a * grid.time_at(i));
  }
  return t;
}

}  // namespace

StepResult plan_step(const State& ego, const Scenario& scenario,
                     const TrajectoryGenerator& generator, const CostWeights& weights,
                     const VehicleParams& params, const TimeGrid& grid) {
  const std::vector<Query> queries = sample_endpoints(ego, scenario, params, grid);
  const std::vector<Trajectory> locals = generator(queries);
  const auto predicted = predict_obstacles(scenario.obstacles, grid);

  StepResult step;
  step.costs.assign(locals.size(), kNaN);
  double best_cost = kInf;
  for (size_t i = 0; i < locals.size(); ++i) {
    const Trajectory world = to_world(locals[i], ego);
    const CostResult c = evaluate_cost(world, scenario, predicted, weights, params, grid);
    if (c.rejected) continue;
    step.costs[i] = c.cost;
    if (c.cost < best_cost) {
      best_cost = c.cost;
      step.chosen_index = static_cast<int>(i);
      step.chosen_world = world;
      step.min_clearance = c.min_clearance;
    }
  }
  if (step.chosen_index < 0) {
    step.emergency = true;
    const Trajectory world = to_world(emergency_trajectory(ego, params, grid), ego);
    step.chosen_world = world;
    double clearance = kInf;
    for (Eigen::Index i = 0; i < world.rows(); ++i) {
      const Footprint fp = ego_footprint(world(i, 0), world(i, 1), world(i, 4), scenario, params, 0.0);
      for (const auto& o : predicted[static_cast<size_t>(i)])
        clearance = std::min(clearance, rect_clearance(fp, obstacle_footprint(o, 0.0)));
    }
    step.min_clearance = clearance;
  }
  return step;
}

double PlanLog::min_clearance() const {
  double m = kInf;
  for (const auto& s : steps) m = std::min(m, s.min_clearance);
  return m;
}

bool PlanLog::any_emergency() const {
  for (const auto& s : steps)
    if (s.emergency) return true;
  return false;
}

PlanLog run_receding_horizon(const Scenario& scenario, const TrajectoryGenerator& generator,
                             const CostWeights& weights, const VehicleParams& params,
                             const TimeGrid& grid, int n_steps, double dt) {
  if (n_steps < 1) throw std::invalid_argument("run_receding_horizon: n_steps must be >= 1");
  if (std::abs(dt - grid.step_s) > 1e-12)
    throw std::invalid_argument("run_receding_horizon: dt must match the trajectory grid step");

  Scenario sc = scenario;
  State ego = scenario.ego_start;
  PlanLog log;
  for (int k = 0; k < n_steps; ++k) {
    const StepResult step = plan_step(ego, sc, generator, weights, params, grid);

    StepLog entry;
    entry.t = k * dt;
    entry.ego = ego;
    entry.obstacles = sc.obstacles;
    entry.chosen_index = step.chosen_index;
    entry.costs = step.costs;
    entry.min_clearance = step.min_clearance;
    entry.emergency = step.emergency;
    log.steps.push_back(std::move(entry));

    // Execute the first interval of the chosen trajectory.
    const Trajectory& w = step.chosen_world;
    const double v_prev = ego.speed_m_s;
    ego.x_m = w(1, 0);
    ego.y_m = w(1, 1);
    ego.speed_m_s = w(1, 2);
    ego.steer_rad = w(1, 3);
    ego.yaw_rad = w(1, 4);
    ego.accel_m_s2 = (ego.speed_m_s - v_prev) / dt;
    for (auto& o : sc.obstacles) {
      o.x_m += o.speed_m_s * dt * std::cos(o.yaw_rad);
      o.y_m += o.speed_m_s * dt * std::sin(o.yaw_rad);
    }
  }
  return log;
}

void write_plan_csv(const PlanLog& log, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << "step,t,candidate,cost,chosen,emergency,ego_x,ego_y,ego_yaw,ego_speed,min_clearance\n";
  f.precision(12);
  for (size_t k = 0; k < log.steps.size(); ++k) {
    const StepLog& s = log.steps[k];
    for (size_t c = 0; c < s.costs.size(); ++c) {
      f << k << ',' << s.t << ',' << c << ',';
      if (std::isnan(s.costs[c]))
        f << "rejected";
      else
        f << s.costs[c];
      f << ',' << (static_cast<int>(c) == s.chosen_index ? 1 : 0) << ',' << (s.emergency ? 1 : 0)
        << ',' << s.ego.x_m << ',' << s.ego.y_m << ',' << s.ego.yaw_rad << ',' << s.ego.speed_m_s
        << ',' << s.min_clearance << '\n';
    }
  }
}

void write_plan_svg(const PlanLog& log, const Scenario& scenario,
                    const std::filesystem::path& path) {
  if (log.steps.empty()) return;
  double x_min = kInf, x_max = -kInf;
  for (const auto& s : log.steps) {
    x_min = std::min({x_min, s.ego.x_m});
    x_max = std::max({x_max, s.ego.x_m});
    for (const auto& o : s.obstacles) {
      x_min = std::min(x_min, o.x_m);
      x_max = std::max(x_max, o.x_m);
    }
  }
  x_min -= 10;
  x_max += 10;
  const double road_half = scenario.lane_width_m * scenario.n_lanes / 2.0;
  const double y_lo = -scenario.lane_width_m, y_hi = 2 * road_half;
  const double W = 900, H = 260, m = 30;
  auto px = [&](double x) { return m + (x - x_min) / (x_max - x_min) * (W - 2 * m); };
  auto py = [&](double y) { return H - m - (y - y_lo) / (y_hi - y_lo) * (H - 2 * m); };

  svg::Document doc(W, H);
  // Lane boundaries: the reference lane is centred on y = 0.
  for (int l = 0; l <= scenario.n_lanes; ++l) {
    const double y = -scenario.lane_width_m / 2.0 + l * scenario.lane_width_m;
    doc.line(px(x_min), py(y), px(x_max), py(y), l == 0 || l == scenario.n_lanes ? "#444" : "#aaa",
             1.0, l == 0 || l == scenario.n_lanes ? "" : "6,6");
  }
  std::vector<std::pair<double, double>> ego_pts, obs_pts;
  for (const auto& s : log.steps) {
    ego_pts.emplace_back(px(s.ego.x_m), py(s.ego.y_m));
    if (!s.obstacles.empty()) obs_pts.emplace_back(px(s.obstacles[0].x_m), py(s.obstacles[0].y_m));
  }
  doc.polyline(ego_pts, "#1f77b4", 2.0);
  if (!obs_pts.empty()) doc.polyline(obs_pts, "#d62728", 2.0);
  for (size_t k = 0; k < log.steps.size(); k += 5) {  // markers every 0.5 s
    const auto& s = log.steps[k];
    doc.circle(px(s.ego.x_m), py(s.ego.y_m), 3, "#1f77b4");
    for (const auto& o : s.obstacles) doc.circle(px(o.x_m), py(o.y_m), 3, "#d62728");
  }
  doc.text(m, 16, "ego (blue) / obstacle (red), markers every 0.5 s", 11);
  doc.write(path);
}

namespace {
int line_of_offset(const std::string& text, size_t byte) {
  int line = 1;
  for (size_t i = 0; i < byte && i < text.size(); ++i)
    if (text[i] == '\n') ++line;
  return line;
}
}  // namespace

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open scenario: " + path.string());
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::runtime_error("scenario parse error at line " +
                             std::to_string(line_of_offset(text, e.byte)) + ": " + e.what());
  }
  Scenario sc;
  sc.lane_width_m = j.value("lane_width_m", sc.lane_width_m);
  sc.n_lanes = j.value("n_lanes", sc.n_lanes);
  sc.desired_speed_m_s = j.value("desired_speed_m_s", sc.desired_speed_m_s);
  if (j.contains("ego")) {
    const auto& e = j["ego"];
    sc.ego_start.x_m = e.value("x", 0.0);
    sc.ego_start.y_m = e.value("y", 0.0);
    sc.ego_start.yaw_rad = e.value("yaw", 0.0);
    sc.ego_start.speed_m_s = e.value("speed", 0.0);
    sc.ego_start.steer_rad = e.value("steer", 0.0);
    sc.ego_start.accel_m_s2 = e.value("accel", 0.0);
    sc.ego_length_m = e.value("length", sc.ego_length_m);
    sc.ego_width_m = e.value("width", sc.ego_width_m);
  }
  for (const auto& o : j.value("obstacles", nlohmann::json::array())) {
    ObstacleSpec obs;
    obs.x_m = o.value("x", 0.0);
    obs.y_m = o.value("y", 0.0);
    obs.yaw_rad = o.value("yaw", 0.0);
    obs.speed_m_s = o.value("speed", 0.0);
    obs.length_m = o.value("length", obs.length_m);
    obs.width_m = o.value("width", obs.width_m);
    sc.obstacles.push_back(obs);
  }
  if (j.contains("sampling")) {
    const auto& s = j["sampling"];
    if (s.contains("lateral_offsets"))
      sc.sampling.lateral_offsets_m = s["lateral_offsets"].get<std::vector<double>>();
    if (s.contains("advances")) sc.sampling.advances_m = s["advances"].get<std::vector<double>>();
    if (s.contains("headings")) sc.sampling.headings_rad = s["headings"].get<std::vector<double>>();
  }
  return sc;
}

void save_scenario(const Scenario& sc, const std::filesystem::path& path) {
  nlohmann::json j;
  j["lane_width_m"] = sc.lane_width_m;
  j["n_lanes"] = sc.n_lanes;
  j["desired_speed_m_s"] = sc.desired_speed_m_s;
  j["ego"] = {{"x", sc.ego_start.x_m},         {"y", sc.ego_start.y_m},
              {"yaw", sc.ego_start.yaw_rad},   {"speed", sc.ego_start.speed_m_s},
              {"steer", sc.ego_start.steer_rad}, {"accel", sc.ego_start.accel_m_s2},
              {"length", sc.ego_length_m},     {"width", sc.ego_width_m}};
  j["obstacles"] = nlohmann::json::array();
  for (const auto& o : sc.obstacles)
    j["obstacles"].push_back({{"x", o.x_m},
                              {"y", o.y_m},
                              {"yaw", o.yaw_rad},
                              {"speed", o.speed_m_s},
                              {"length", o.length_m},
                              {"width", o.width_m}});
  j["sampling"] = {{"lateral_offsets", sc.sampling.lateral_offsets_m},
                   {"advances", sc.sampling.advances_m},
                   {"headings", sc.sampling.headings_rad}};
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << j.dump(2) << '\n';
}

}  // namespace mpr
