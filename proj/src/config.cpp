#include "mpr/config.hpp"

#include <fstream>

#include <json.hpp>

namespace mpr {

using nlohmann::json;

namespace {

void read_axis(const json& j, AxisSpec& a) {
  a.min = j.value("min", a.min);
  a.max = j.value("max", a.max);
  a.step = j.value("step", a.step);
  a.stride = j.value("stride", a.stride);
}

json axis_json(const AxisSpec& a) {
  return {{"min", a.min}, {"max", a.max}, {"step", a.step}, {"stride", a.stride}};
}

}  // namespace

Config load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path.string());
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw std::runtime_error("config parse error: " + std::string(e.what()));
  }

  Config c;
  if (j.contains("vehicle")) {
    const auto& v = j["vehicle"];
    const std::string profile = v.value("profile", "bmw_320i");
    if (profile != "bmw_320i") throw std::runtime_error("unknown vehicle profile: " + profile);
    c.vehicle = bmw_320i();
    c.vehicle.wheelbase_m = v.value("wheelbase_m", c.vehicle.wheelbase_m);
    c.vehicle.max_steer_rad = v.value("max_steer_rad", c.vehicle.max_steer_rad);
    c.vehicle.max_steer_rate_rad_s = v.value("max_steer_rate_rad_s", c.vehicle.max_steer_rate_rad_s);
    c.vehicle.max_speed_m_s = v.value("max_speed_m_s", c.vehicle.max_speed_m_s);
    c.vehicle.min_speed_m_s = v.value("min_speed_m_s", c.vehicle.min_speed_m_s);
    c.vehicle.max_long_accel_m_s2 = v.value("max_long_accel_m_s2", c.vehicle.max_long_accel_m_s2);
    c.vehicle.max_lat_accel_m_s2 = v.value("max_lat_accel_m_s2", c.vehicle.max_lat_accel_m_s2);
    c.vehicle.switching_speed_m_s = v.value("switching_speed_m_s", c.vehicle.switching_speed_m_s);
    c.vehicle.validate();
  }
  c.ocp = OcpConfig::defaults_for(c.vehicle);
  if (j.contains("grid")) {
    const auto& g = j["grid"];
    if (g.contains("v0")) read_axis(g["v0"], c.grid.v0);
    if (g.contains("delta0")) read_axis(g["delta0"], c.grid.delta0);
    if (g.contains("thetaf")) read_axis(g["thetaf"], c.grid.thetaf);
    c.grid.x_step = g.value("x_step", c.grid.x_step);
    c.grid.x_stride = g.value("x_stride", c.grid.x_stride);
    c.grid.y_step = g.value("y_step", c.grid.y_step);
    c.grid.y_stride = g.value("y_stride", c.grid.y_stride);
    c.grid.x_min = g.value("x_min", c.grid.x_min);
    c.grid.y_abs_max = g.value("y_abs_max", c.grid.y_abs_max);
  }
  if (j.contains("time_grid")) {
    const auto& t = j["time_grid"];
    TimeGrid tg;
    tg.horizon_s = t.value("horizon_s", tg.horizon_s);
    tg.step_s = t.value("step_s", tg.step_s);
    tg.n_points = t.value("n_points", tg.n_points);
    tg.validate();
    c.grid.time_grid = tg;
  }
  if (j.contains("ocp")) {
    const auto& o = j["ocp"];
    c.ocp.jerk_weight_long = o.value("jerk_weight_long", c.ocp.jerk_weight_long);
    c.ocp.jerk_weight_lat = o.value("jerk_weight_lat", c.ocp.jerk_weight_lat);
    c.ocp.smoothing_eps = o.value("smoothing_eps", c.ocp.smoothing_eps);
    c.ocp.penalty_initial = o.value("penalty_initial", c.ocp.penalty_initial);
    c.ocp.penalty_growth = o.value("penalty_growth", c.ocp.penalty_growth);
    c.ocp.penalty_max = o.value("penalty_max", c.ocp.penalty_max);
    c.ocp.inner_tol = o.value("inner_tol", c.ocp.inner_tol);
    c.ocp.inner_max_iters = o.value("inner_max_iters", c.ocp.inner_max_iters);
    c.ocp.max_outer_iters = o.value("max_outer_iters", c.ocp.max_outer_iters);
    c.ocp.feasibility_tol = o.value("feasibility_tol", c.ocp.feasibility_tol);
    c.ocp.stall_violation_factor = o.value("stall_violation_factor", c.ocp.stall_violation_factor);
  }
  if (j.contains("train")) {
    const auto& t = j["train"];
    c.train.learning_rate = t.value("learning_rate", c.train.learning_rate);
    c.train.beta1 = t.value("beta1", c.train.beta1);
    c.train.beta2 = t.value("beta2", c.train.beta2);
    c.train.epsilon_hat = t.value("epsilon_hat", c.train.epsilon_hat);
    c.train.epochs = t.value("epochs", c.train.epochs);
    c.train.batch_size = t.value("batch_size", c.train.batch_size);
    c.train.loss_weights.include_steering =
        t.value("include_steering_loss", c.train.loss_weights.include_steering);
    c.model.latent = t.value("latent", c.model.latent);
    if (t.contains("kernel")) c.model.kernel = net::kernel_from_string(t["kernel"]);
  }
  if (j.contains("planner")) {
    const auto& p = j["planner"];
    c.planner_weights.velocity = p.value("w_velocity", c.planner_weights.velocity);
    c.planner_weights.offset = p.value("w_offset", c.planner_weights.offset);
    c.planner_weights.collision = p.value("w_collision", c.planner_weights.collision);
    c.planner_weights.safety_distance_m =
        p.value("safety_distance_m", c.planner_weights.safety_distance_m);
    c.planner_weights.footprint_margin_m =
        p.value("footprint_margin_m", c.planner_weights.footprint_margin_m);
    c.planner_weights.constraint_tol = p.value("constraint_tol", c.planner_weights.constraint_tol);
  }
  c.out = j.value("out", c.out.string());
  c.seed = j.value("seed", c.seed);
  c.jobs = j.value("jobs", c.jobs);
  c.train_fraction = j.value("train_fraction", c.train_fraction);
  return c;
}

void save_config(const Config& c, const std::filesystem::path& path) {
  json j;
  j["vehicle"] = {{"profile", "bmw_320i"},
                  {"wheelbase_m", c.vehicle.wheelbase_m},
                  {"max_steer_rad", c.vehicle.max_steer_rad},
                  {"max_steer_rate_rad_s", c.vehicle.max_steer_rate_rad_s},
                  {"max_speed_m_s", c.vehicle.max_speed_m_s},
                  {"min_speed_m_s", c.vehicle.min_speed_m_s},
                  {"max_long_accel_m_s2", c.vehicle.max_long_accel_m_s2},
                  {"max_lat_accel_m_s2", c.vehicle.max_lat_accel_m_s2},
                  {"switching_speed_m_s", c.vehicle.switching_speed_m_s}};
  j["grid"] = {{"v0", axis_json(c.grid.v0)},     {"delta0", axis_json(c.grid.delta0)},
               {"thetaf", axis_json(c.grid.thetaf)}, {"x_step", c.grid.x_step},
               {"x_stride", c.grid.x_stride},    {"y_step", c.grid.y_step},
               {"y_stride", c.grid.y_stride},    {"x_min", c.grid.x_min},
               {"y_abs_max", c.grid.y_abs_max}};
  j["time_grid"] = {{"horizon_s", c.grid.time_grid.horizon_s},
                    {"step_s", c.grid.time_grid.step_s},
                    {"n_points", c.grid.time_grid.n_points}};
  j["ocp"] = {{"jerk_weight_long", c.ocp.jerk_weight_long},
              {"jerk_weight_lat", c.ocp.jerk_weight_lat},
              {"smoothing_eps", c.ocp.smoothing_eps},
              {"penalty_initial", c.ocp.penalty_initial},
              {"penalty_growth", c.ocp.penalty_growth},
              {"penalty_max", c.ocp.penalty_max},
              {"inner_tol", c.ocp.inner_tol},
              {"inner_max_iters", c.ocp.inner_max_iters},
              {"max_outer_iters", c.ocp.max_outer_iters},
              {"feasibility_tol", c.ocp.feasibility_tol},
              {"stall_violation_factor", c.ocp.stall_violation_factor}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"epsilon_hat", c.train.epsilon_hat},
                {"epochs", c.train.epochs},
                {"batch_size", c.train.batch_size},
                {"include_steering_loss", c.train.loss_weights.include_steering},
                {"latent", c.model.latent},
                {"kernel", net::to_string(c.model.kernel)}};
  j["planner"] = {{"w_velocity", c.planner_weights.velocity},
                  {"w_offset", c.planner_weights.offset},
                  {"w_collision", c.planner_weights.collision},
                  {"safety_distance_m", c.planner_weights.safety_distance_m},
                  {"footprint_margin_m", c.planner_weights.footprint_margin_m},
                  {"constraint_tol", c.planner_weights.constraint_tol}};
  j["out"] = c.out.string();
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["train_fraction"] = c.train_fraction;
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path.string());
  f << j.dump(2) << '\n';
}

}  // namespace mpr
