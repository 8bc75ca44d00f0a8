#include "mpr/ocp.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace mpr {

namespace {

// FNV-1a over raw bytes; used for config fingerprints in dataset metadata.
uint64_t fnv1a(const void* data, size_t n, uint64_t h = 1469598103934665603ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

inline Vec6 rhs(const Vec6& x, double jerk, double steer_rate, double wheelbase) {
  const double v = x[3];
  Vec6 dx;
  dx[0] = v * std::cos(x[5]);
  dx[1] = v * std::sin(x[5]);
  dx[2] = steer_rate;
  dx[3] = x[4];
  dx[4] = jerk;
  dx[5] = v / wheelbase * std::tan(x[2]);
  return dx;
}

struct Rk4Stages {
  Vec6 s1, s2, s3, s4;  // stage states; s1 is the step's start state
};

inline Vec6 rk4_step(const Vec6& x, double jerk, double steer_rate, double wheelbase, double h,
                     Rk4Stages* stages) {
  const Vec6 k1 = rhs(x, jerk, steer_rate, wheelbase);
  const Vec6 s2 = x + 0.5 * h * k1;
  const Vec6 k2 = rhs(s2, jerk, steer_rate, wheelbase);
  const Vec6 s3 = x + 0.5 * h * k2;
  const Vec6 k3 = rhs(s3, jerk, steer_rate, wheelbase);
  const Vec6 s4 = x + h * k3;
  const Vec6 k4 = rhs(s4, jerk, steer_rate, wheelbase);
  if (stages) *stages = Rk4Stages{x, s2, s3, s4};
  return x + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

// Accumulates (d step / d x)^T w into wx and (d step / d u)^T w into wu.
inline void rk4_vjp(const Rk4Stages& st, const Control& u, const VehicleParams& p, double h,
                    const Vec6& w, Vec6& wx, Vec2& wu) {
  Vec6 gs4 = Vec6::Zero(), gs3 = Vec6::Zero(), gs2 = Vec6::Zero(), gs1 = Vec6::Zero();
  const Vec6 gk4 = (h / 6.0) * w;
  dynamics_vjp(st.s4, u, p, gk4, gs4, wu);
  const Vec6 gk3 = (h / 3.0) * w + h * gs4;
  dynamics_vjp(st.s3, u, p, gk3, gs3, wu);
  const Vec6 gk2 = (h / 3.0) * w + 0.5 * h * gs3;
  dynamics_vjp(st.s2, u, p, gk2, gs2, wu);
  const Vec6 gk1 = (h / 6.0) * w + 0.5 * h * gs2;
  dynamics_vjp(st.s1, u, p, gk1, gs1, wu);
  wx += w + gs1 + gs2 + gs3 + gs4;
}

inline double sq(double x) { return x * x; }

// Node integrand of the objective and its partials w.r.t. (steer, v, a) and
// the interval control (jerk, steer rate).
struct JerkTerm {
  double value;
  double d_steer, d_v, d_a, d_jerk, d_rate;
};

JerkTerm jerk_term(const Vec6& x, double jerk, double rate, const OcpConfig& cfg,
                   const VehicleParams& p) {
  const double v = x[3], a = x[4];
  const double cos_d = std::cos(x[2]);
  const double tan_d = std::tan(x[2]);
  const double sec2 = 1.0 / (cos_d * cos_d);
  const double l = p.wheelbase_m;
  const double jlat = 2.0 * v * a / l * tan_d + v * v / l * sec2 * rate;
  JerkTerm t;
  t.value = cfg.jerk_weight_long * jerk * jerk + cfg.jerk_weight_lat * jlat * jlat;
  const double c = 2.0 * cfg.jerk_weight_lat * jlat;
  t.d_steer = c * (2.0 * v * a / l * sec2 + v * v / l * 2.0 * sec2 * tan_d * rate);
  t.d_v = c * (2.0 * a / l * tan_d + 2.0 * v / l * sec2 * rate);
  t.d_a = c * (2.0 * v / l * tan_d);
  t.d_rate = c * (v * v / l * sec2);
  t.d_jerk = 2.0 * cfg.jerk_weight_long * jerk;
  return t;
}

// The g-g constraint value (a/abar)^2 + (thetadot*v/alat)^2 - 1 and its
// partials. The squared ratio removes the sign branch of accel_bound, so the
// only kink left is at v = switching speed.
struct GgTerm {
  double value;
  double d_steer, d_v, d_a;
};

GgTerm gg_term(const Vec6& x, const VehicleParams& p) {
  const double v = x[3], a = x[4];
  const double tan_d = std::tan(x[2]);
  const double sec2 = 1.0 + tan_d * tan_d;
  const double lat = v * v * tan_d / (p.wheelbase_m * p.max_lat_accel_m_s2);
  GgTerm t;
  t.d_steer = 2.0 * lat * v * v * sec2 / (p.wheelbase_m * p.max_lat_accel_m_s2);
  t.d_v = 2.0 * lat * 2.0 * v * tan_d / (p.wheelbase_m * p.max_lat_accel_m_s2);
  if (v > p.switching_speed_m_s) {
    const double k = p.max_long_accel_m_s2 * p.switching_speed_m_s;
    t.value = sq(a * v / k) + lat * lat - 1.0;
    t.d_a = 2.0 * a * v * v / (k * k);
    t.d_v += 2.0 * a * a * v / (k * k);
  } else {
    t.value = sq(a / p.max_long_accel_m_s2) + lat * lat - 1.0;
    t.d_a = 2.0 * a / sq(p.max_long_accel_m_s2);
  }
  return t;
}

// Compact L-BFGS with Armijo backtracking. Returns the achieved gradient
// infinity norm; x and fx hold the final iterate.
struct LbfgsResult {
  double gnorm = 0.0;
  int iters = 0;
};

template <typename F>
LbfgsResult lbfgs_minimize(F&& eval, Eigen::VectorXd& x, double& fx, double gtol, int max_iters) {
  constexpr int kMemory = 8;
  const int n = static_cast<int>(x.size());
  Eigen::VectorXd g(n), x_new(n), g_new(n);
  fx = eval(x, g);
  std::vector<Eigen::VectorXd> s_hist, y_hist;
  std::vector<double> rho_hist;
  LbfgsResult res;
  for (int it = 0; it < max_iters; ++it) {
    res.gnorm = g.lpNorm<Eigen::Infinity>();
    res.iters = it;
    if (res.gnorm <= gtol) return res;

    // Two-loop recursion.
    Eigen::VectorXd q = -g;
    const int m = static_cast<int>(s_hist.size());
    std::vector<double> alpha(m);
    for (int i = m - 1; i >= 0; --i) {
      alpha[i] = rho_hist[i] * s_hist[i].dot(q);
      q -= alpha[i] * y_hist[i];
    }
    if (m > 0) {
      const double gamma = s_hist[m - 1].dot(y_hist[m - 1]) / y_hist[m - 1].squaredNorm();
      q *= gamma;
    } else {
      q *= 1.0 / std::max(1.0, res.gnorm);
    }
    for (int i = 0; i < m; ++i) {
      const double beta = rho_hist[i] * y_hist[i].dot(q);
      q += (alpha[i] - beta) * s_hist[i];
    }
    double dir_deriv = g.dot(q);
    if (!(dir_deriv < 0.0)) {  // not a descent direction; restart on steepest descent
      q = -g / std::max(1.0, res.gnorm);
      dir_deriv = g.dot(q);
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
    }

    double step = 1.0;
    bool accepted = false;
    double f_new = fx;
    for (int ls = 0; ls < 40; ++ls) {
      x_new = x + step * q;
      f_new = eval(x_new, g_new);
      if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * dir_deriv) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // One restart on plain steepest descent before giving up.
      if (s_hist.empty()) return res;
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      continue;
    }

    const Eigen::VectorXd s = x_new - x;
    const Eigen::VectorXd y = g_new - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (static_cast<int>(s_hist.size()) == kMemory) {
        s_hist.erase(s_hist.begin());
        y_hist.erase(y_hist.begin());
        rho_hist.erase(rho_hist.begin());
      }
      s_hist.push_back(s);
      y_hist.push_back(y);
      rho_hist.push_back(1.0 / sy);
    }
    x.swap(x_new);
    g.swap(g_new);
    fx = f_new;
  }
  res.gnorm = g.lpNorm<Eigen::Infinity>();
  res.iters = max_iters;
  return res;
}

}  // namespace

void OcpConfig::validate() const {
  if (jerk_weight_long <= 0 || jerk_weight_lat <= 0)
    throw std::invalid_argument("OcpConfig: jerk weights must be positive");
  if (feasibility_tol <= 0 || inner_tol <= 0 || penalty_initial <= 0 || penalty_growth <= 1)
    throw std::invalid_argument("OcpConfig: tolerances and penalty schedule must be positive");
}

uint64_t OcpConfig::hash() const {
  const double vals[] = {jerk_weight_long, jerk_weight_lat,  smoothing_eps,
                         penalty_initial,  penalty_growth,   penalty_max,
                         inner_tol,        double(inner_max_iters),
                         double(max_outer_iters), feasibility_tol, stall_violation_factor};
  return fnv1a(vals, sizeof(vals));
}

OcpConfig OcpConfig::defaults_for(const VehicleParams& params) {
  OcpConfig cfg;
  cfg.jerk_weight_long = 1.0 / sq(params.max_long_accel_m_s2);
  cfg.jerk_weight_lat = 1.0 / sq(params.max_lat_accel_m_s2);
  return cfg;
}

void TimeGrid::validate() const {
  if (n_points < 2 || step_s <= 0)
    throw std::invalid_argument("TimeGrid: need n_points >= 2 and step > 0");
  if (std::abs((n_points - 1) * step_s - horizon_s) > 1e-9)
    throw std::invalid_argument("TimeGrid: (n_points-1)*step must equal horizon");
}

Vec5 Query::vec() const {
  Vec5 v;
  v << v0_m_s, delta0_rad, xf_m, yf_m, thetaf_rad;
  return v;
}

Query Query::from_vec(const Vec5& v) { return Query{v[0], v[1], v[2], v[3], v[4]}; }

Trajectory OcpSolution::trajectory() const {
  Trajectory t(static_cast<int>(states.size()), 5);
  for (size_t i = 0; i < states.size(); ++i) {
    t(static_cast<int>(i), 0) = states[i].x_m;
    t(static_cast<int>(i), 1) = states[i].y_m;
    t(static_cast<int>(i), 2) = states[i].speed_m_s;
    t(static_cast<int>(i), 3) = states[i].steer_rad;
    t(static_cast<int>(i), 4) = states[i].yaw_rad;
  }
  return t;
}

double objective(const std::vector<State>& states, const std::vector<Control>& controls,
                 const TimeGrid& grid, const OcpConfig& config, const VehicleParams& params) {
  if (static_cast<int>(states.size()) != grid.n_points ||
      static_cast<int>(controls.size()) != grid.n_intervals())
    throw std::invalid_argument("objective: trajectory shape does not match grid");
  double total = 0.0;
  for (int i = 0; i < grid.n_points; ++i) {
    const Control& u = controls[std::min(i, grid.n_intervals() - 1)];
    const double jlat = lateral_jerk(states[i], u, params);
    const double f = config.jerk_weight_long * sq(u.long_jerk_m_s3) + config.jerk_weight_lat * sq(jlat);
    const double w = (i == 0 || i == grid.n_points - 1) ? 0.5 * grid.step_s : grid.step_s;
    total += w * f;
  }
  return total;
}

Vec10 boundary_residual(const OcpSolution& solution, const Query& query, const TimeGrid& grid) {
  const State& s0 = solution.states.front();
  const State& sT = solution.states.at(grid.n_points - 1);
  Vec10 r;
  r << s0.x_m, s0.y_m, s0.steer_rad - query.delta0_rad, s0.speed_m_s - query.v0_m_s, s0.yaw_rad,
      sT.x_m - query.xf_m, sT.y_m - query.yf_m, sT.steer_rad, sT.accel_m_s2,
      sT.yaw_rad - query.thetaf_rad;
  return r;
}

AugLagProblem::AugLagProblem(const Query& query, const VehicleParams& params, const TimeGrid& grid,
                             const OcpConfig& config)
    : penalty(config.penalty_initial),
      query_(query),
      params_(params),
      grid_(grid),
      config_(config),
      n_free_(grid.n_intervals() - 1),
      scale_a_(0.5 * params.max_long_accel_m_s2),
      scale_j_(params.max_long_accel_m_s2),
      scale_d_(params.max_steer_rate_rad_s) {
  grid.validate();
  params.validate();
  config.validate();
  eq_multipliers = Eigen::VectorXd::Zero(n_eq());
  ineq_multipliers = Eigen::VectorXd::Zero(n_ineq());
}

Eigen::VectorXd AugLagProblem::initial_point() const {
  Eigen::VectorXd d = Eigen::VectorXd::Zero(dim());
  const double rate = -query_.delta0_rad / grid_.horizon_s;
  for (int i = 0; i < n_free_; ++i) d[2 + 2 * i] = rate / scale_d_;
  return d;
}

void AugLagProblem::rollout(const Eigen::VectorXd& d, std::vector<State>& states,
                            std::vector<Control>& controls) const {
  states.resize(grid_.n_points);
  controls.assign(grid_.n_intervals(), Control{});
  for (int i = 0; i < n_free_; ++i)
    controls[i] = Control{d[1 + 2 * i] * scale_j_, d[2 + 2 * i] * scale_d_};
  Vec6 x;
  x << 0, 0, query_.delta0_rad, query_.v0_m_s, d[0] * scale_a_, 0;
  states[0] = State::from_vec(x);
  for (int i = 0; i < grid_.n_intervals(); ++i) {
    x = rk4_step(x, controls[i].long_jerk_m_s3, controls[i].steer_rate_rad_s, params_.wheelbase_m,
                 grid_.step_s, nullptr);
    states[i + 1] = State::from_vec(x);
  }
}

void AugLagProblem::constraints(const Eigen::VectorXd& d, Eigen::VectorXd& eq,
                                Eigen::VectorXd& ineq) const {
  std::vector<State> states;
  std::vector<Control> controls;
  rollout(d, states, controls);
  eq.resize(n_eq());
  ineq.resize(n_ineq());
  const State& sT = states.back();
  eq << sT.x_m - query_.xf_m, sT.y_m - query_.yf_m, sT.steer_rad, sT.accel_m_s2,
      sT.yaw_rad - query_.thetaf_rad;
  int k = 0;
  for (int i = 0; i < grid_.n_points; ++i) {
    const Vec6 x = states[i].vec();
    ineq[k++] = x[2] - params_.max_steer_rad;
    ineq[k++] = -x[2] - params_.max_steer_rad;
    ineq[k++] = x[3] - params_.max_speed_m_s;
    ineq[k++] = -x[3] - params_.min_speed_m_s;
    ineq[k++] = gg_term(x, params_).value;
  }
  for (int i = 0; i < grid_.n_intervals(); ++i) {
    ineq[k++] = controls[i].steer_rate_rad_s - params_.max_steer_rate_rad_s;
    ineq[k++] = -controls[i].steer_rate_rad_s - params_.max_steer_rate_rad_s;
  }
}

double AugLagProblem::value(const Eigen::VectorXd& d) const { return eval(d, nullptr); }

double AugLagProblem::value_and_grad(const Eigen::VectorXd& d, Eigen::VectorXd& grad) const {
  grad.setZero(dim());
  return eval(d, &grad);
}

double AugLagProblem::eval(const Eigen::VectorXd& d, Eigen::VectorXd* grad) const {
  const int M = grid_.n_points;
  const int n_int = grid_.n_intervals();
  const double h = grid_.step_s;
  const double mu = penalty;

  // Forward rollout with cached RK4 stages.
  std::vector<Vec6> x(M);
  std::vector<Rk4Stages> stages(n_int);
  std::vector<Control> u(n_int, Control{});
  for (int i = 0; i < n_free_; ++i) u[i] = Control{d[1 + 2 * i] * scale_j_, d[2 + 2 * i] * scale_d_};
  x[0] << 0, 0, query_.delta0_rad, query_.v0_m_s, d[0] * scale_a_, 0;
  for (int i = 0; i < n_int; ++i)
    x[i + 1] = rk4_step(x[i], u[i].long_jerk_m_s3, u[i].steer_rate_rad_s, params_.wheelbase_m, h,
                        grad ? &stages[i] : nullptr);
  if (!x[M - 1].allFinite()) return std::numeric_limits<double>::infinity();

  std::vector<Vec6> dir_x;
  std::vector<Vec2> dir_u;
  if (grad) {
    dir_x.assign(M, Vec6::Zero());
    dir_u.assign(n_int, Vec2::Zero());
  }

  double total = 0.0;

  // Objective: trapezoidal quadrature of the weighted squared jerks.
  for (int i = 0; i < M; ++i) {
    const int ci = std::min(i, n_int - 1);
    const JerkTerm t = jerk_term(x[i], u[ci].long_jerk_m_s3, u[ci].steer_rate_rad_s, config_, params_);
    const double w = (i == 0 || i == M - 1) ? 0.5 * h : h;
    total += w * t.value;
    if (grad) {
      dir_x[i][2] += w * t.d_steer;
      dir_x[i][3] += w * t.d_v;
      dir_x[i][4] += w * t.d_a;
      dir_u[ci][0] += w * t.d_jerk;
      dir_u[ci][1] += w * t.d_rate;
    }
  }

  // Path inequalities via the Rockafellar augmented term
  //   mu/2 * (max(0, lam/mu + g)^2 - (lam/mu)^2),
  // whose derivative w.r.t. g is max(0, lam + mu*g).
  int k = 0;
  auto add_ineq = [&](double g, double dgd_steer, double dgd_v, double dgd_a, int node) {
    const double lam = ineq_multipliers[k++];
    const double t = lam / mu + g;
    if (t > 0.0) {
      total += 0.5 * mu * (t * t - sq(lam / mu));
      if (grad) {
        const double sigma = mu * t;
        dir_x[node][2] += sigma * dgd_steer;
        dir_x[node][3] += sigma * dgd_v;
        dir_x[node][4] += sigma * dgd_a;
      }
    } else {
      total -= 0.5 * sq(lam) / mu;
    }
  };
  for (int i = 0; i < M; ++i) {
    add_ineq(x[i][2] - params_.max_steer_rad, 1.0, 0.0, 0.0, i);
    add_ineq(-x[i][2] - params_.max_steer_rad, -1.0, 0.0, 0.0, i);
    add_ineq(x[i][3] - params_.max_speed_m_s, 0.0, 1.0, 0.0, i);
    add_ineq(-x[i][3] - params_.min_speed_m_s, 0.0, -1.0, 0.0, i);
    const GgTerm gg = gg_term(x[i], params_);
    add_ineq(gg.value, gg.d_steer, gg.d_v, gg.d_a, i);
  }
  for (int i = 0; i < n_int; ++i) {
    for (double sign : {1.0, -1.0}) {
      const double g = sign * u[i].steer_rate_rad_s - params_.max_steer_rate_rad_s;
      const double lam = ineq_multipliers[k++];
      const double t = lam / mu + g;
      if (t > 0.0) {
        total += 0.5 * mu * (t * t - sq(lam / mu));
        if (grad) dir_u[i][1] += mu * t * sign;
      } else {
        total -= 0.5 * sq(lam) / mu;
      }
    }
  }

  // Terminal equality block.
  const double eq_vals[5] = {x[M - 1][0] - query_.xf_m, x[M - 1][1] - query_.yf_m, x[M - 1][2],
                             x[M - 1][4], x[M - 1][5] - query_.thetaf_rad};
  const int eq_idx[5] = {0, 1, 2, 4, 5};
  for (int j = 0; j < 5; ++j) {
    total += eq_multipliers[j] * eq_vals[j] + 0.5 * mu * sq(eq_vals[j]);
    if (grad) dir_x[M - 1][eq_idx[j]] += eq_multipliers[j] + mu * eq_vals[j];
  }

  if (!grad) return total;

  // Adjoint sweep through the rollout.
  Vec6 adj = dir_x[M - 1];
  for (int i = n_int - 1; i >= 0; --i) {
    Vec6 wx = Vec6::Zero();
    rk4_vjp(stages[i], u[i], params_, h, adj, wx, dir_u[i]);
    adj = wx + dir_x[i];
  }
  Eigen::VectorXd& g = *grad;
  g[0] = adj[4] * scale_a_;
  for (int i = 0; i < n_free_; ++i) {
    g[1 + 2 * i] = dir_u[i][0] * scale_j_;
    g[2 + 2 * i] = dir_u[i][1] * scale_d_;
  }
  return total;
}

OcpSolution solve(const Query& query, const VehicleParams& params, const TimeGrid& grid,
                  const OcpConfig& config) {
  AugLagProblem prob(query, params, grid, config);
  Eigen::VectorXd d = prob.initial_point();
  auto eval = [&prob](const Eigen::VectorXd& x, Eigen::VectorXd& g) {
    return prob.value_and_grad(x, g);
  };

  Eigen::VectorXd eq, ineq;
  OcpSolution sol;
  double fx = 0.0;
  double inner_tol = 1e-2;
  bool feasible = false;
  int outer = 0;
  for (; outer < config.max_outer_iters; ++outer) {
    lbfgs_minimize(eval, d, fx, std::max(config.inner_tol, inner_tol), config.inner_max_iters);
    prob.constraints(d, eq, ineq);
    const double viol = std::max(eq.lpNorm<Eigen::Infinity>(), std::max(0.0, ineq.maxCoeff()));
    sol.violation_history.push_back(viol);
    if (viol <= config.feasibility_tol) {
      // Polish at the final stationarity tolerance before declaring victory.
      if (inner_tol > config.inner_tol) {
        lbfgs_minimize(eval, d, fx, config.inner_tol, config.inner_max_iters);
        prob.constraints(d, eq, ineq);
        const double v2 = std::max(eq.lpNorm<Eigen::Infinity>(), std::max(0.0, ineq.maxCoeff()));
        sol.violation_history.back() = std::min(viol, v2);
        if (v2 > config.feasibility_tol) {
          inner_tol = config.inner_tol;
          continue;
        }
      }
      feasible = true;
      ++outer;
      break;
    }
    // Stalled far from feasibility: declare the query infeasible early.
    const size_t n = sol.violation_history.size();
    if (n >= 4 && viol > config.stall_violation_factor * config.feasibility_tol &&
        viol > 0.7 * sol.violation_history[n - 4])
      break;

    prob.eq_multipliers += prob.penalty * eq;
    prob.ineq_multipliers =
        (prob.ineq_multipliers + prob.penalty * ineq).cwiseMax(0.0);
    prob.penalty = std::min(prob.penalty * config.penalty_growth, config.penalty_max);
    inner_tol = std::max(config.inner_tol, inner_tol * 0.2);
  }

  prob.rollout(d, sol.states, sol.controls);
  prob.constraints(d, eq, ineq);
  sol.max_constraint_violation =
      std::max(eq.lpNorm<Eigen::Infinity>(), std::max(0.0, ineq.maxCoeff()));
  sol.objective = objective(sol.states, sol.controls, grid, config, params);
  sol.converged = feasible;
  sol.outer_iters = outer;
  return sol;
}

}  // namespace mpr
