#include "mpr/models.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include <json.hpp>

#include "binio.hpp"

namespace mpr {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMap = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
using ConstRowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

int64_t MpRbfnModel::param_count() const {
  return z_map.size() + centers.size() + 1 + out_map.size();
}

int64_t BasicRbfnModel::param_count() const { return centers.size() + 1 + out_map.size(); }

int64_t MlpModel::param_count() const { return w1.size() + w2.size(); }

ModelKind model_kind_from_string(const std::string& name) {
  if (name == "mp-rbfn") return ModelKind::mp_rbfn;
  if (name == "mp-rbfn-no-interp") return ModelKind::mp_rbfn_no_interp;
  if (name == "basic-rbfn") return ModelKind::basic_rbfn;
  if (name == "mlp-tanh") return ModelKind::mlp_tanh;
  if (name == "mlp-sig") return ModelKind::mlp_sigmoid;
  throw std::invalid_argument("unknown model kind: " + name);
}

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::mp_rbfn: return "mp-rbfn";
    case ModelKind::mp_rbfn_no_interp: return "mp-rbfn-no-interp";
    case ModelKind::basic_rbfn: return "basic-rbfn";
    case ModelKind::mlp_tanh: return "mlp-tanh";
    case ModelKind::mlp_sigmoid: return "mlp-sig";
  }
  return "?";
}

const TimeGrid& AnyModel::time_grid() const {
  return std::visit([](const auto& m) -> const TimeGrid& { return m.grid; }, impl);
}

int64_t AnyModel::param_count() const {
  return std::visit([](const auto& m) { return m.param_count(); }, impl);
}

Eigen::MatrixXd AnyModel::forward(const Eigen::MatrixXd& queries) const {
  switch (kind) {
    case ModelKind::mp_rbfn:
    case ModelKind::mp_rbfn_no_interp:
      return mp_rbfn_forward(std::get<MpRbfnModel>(impl), queries);
    case ModelKind::basic_rbfn:
      return basic_rbfn_forward(std::get<BasicRbfnModel>(impl), queries);
    default:
      return mlp_forward(std::get<MlpModel>(impl), queries);
  }
}

Trajectory interp_branch(const Query& q, const TimeGrid& grid) {
  Trajectory t(grid.n_points, 5);
  for (int i = 0; i < grid.n_points; ++i) {
    const double ratio = grid.time_at(i) / grid.horizon_s;
    t(i, 0) = q.xf_m * ratio;
    t(i, 1) = q.yf_m * ratio;
    t(i, 2) = q.v0_m_s;
    t(i, 3) = q.delta0_rad * (1.0 - ratio);
    t(i, 4) = q.thetaf_rad * ratio;
  }
  return t;
}

Eigen::MatrixXd interp_branch_batch(const Eigen::MatrixXd& queries, const TimeGrid& grid) {
  if (queries.rows() != 5) throw std::invalid_argument("interp_branch_batch: queries must be 5 x B");
  const int M = grid.n_points;
  Eigen::VectorXd ratio(M);
  for (int i = 0; i < M; ++i) ratio[i] = grid.time_at(i) / grid.horizon_s;
  Eigen::MatrixXd out(5 * M, queries.cols());
  out.middleRows(0 * M, M) = ratio * queries.row(2);                       // x
  out.middleRows(1 * M, M) = ratio * queries.row(3);                       // y
  out.middleRows(2 * M, M) = Eigen::VectorXd::Ones(M) * queries.row(0);    // v
  out.middleRows(3 * M, M) = (1.0 - ratio.array()).matrix() * queries.row(1);  // steer
  out.middleRows(4 * M, M) = ratio * queries.row(4);                       // yaw
  return out;
}

namespace {

net::RbfLayer rbf_layer_of(const MpRbfnModel& m) {
  net::RbfLayer layer;
  layer.centers = m.centers;
  layer.shape = m.shape;
  layer.kernel = m.kernel;
  return layer;
}

// Pairwise radii between input-space centres and queries.
Eigen::MatrixXd center_radii(const Eigen::MatrixXd& centers, const Eigen::MatrixXd& queries) {
  Eigen::MatrixXd r2 = (-2.0 * centers.transpose() * queries).eval();
  r2.colwise() += centers.colwise().squaredNorm().transpose();
  r2.rowwise() += queries.colwise().squaredNorm();
  return r2.cwiseMax(0.0).cwiseSqrt();
}

}  // namespace

Eigen::MatrixXd mp_rbfn_forward(const MpRbfnModel& model, const Eigen::MatrixXd& queries) {
  if (queries.rows() != 5) throw std::invalid_argument("mp_rbfn_forward: queries must be 5 x B");
  const Eigen::MatrixXd latent = model.z_map * queries;
  const Eigen::MatrixXd phi = rbf_layer_of(model).forward(latent);
  Eigen::MatrixXd out = model.out_map * phi;
  if (model.interpolation) out += interp_branch_batch(queries, model.grid);
  return out;
}

Eigen::MatrixXd basic_rbfn_forward(const BasicRbfnModel& model, const Eigen::MatrixXd& queries) {
  if (queries.rows() != 5) throw std::invalid_argument("basic_rbfn_forward: queries must be 5 x B");
  Eigen::MatrixXd phi;
  net::kernel_apply(model.kernel, model.shape, center_radii(model.centers, queries), phi);
  return model.out_map * phi;
}

Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& queries) {
  if (queries.rows() != 5) throw std::invalid_argument("mlp_forward: queries must be 5 x B");
  Eigen::MatrixXd h = model.w1 * queries;
  if (model.use_tanh)
    h = h.array().tanh();
  else
    h = (1.0 / (1.0 + (-h.array()).exp()));
  return model.w2 * h;
}

Eigen::VectorXd flatten_params(const AnyModel& model) {
  VectorXd flat(model.param_count());
  Eigen::Index pos = 0;
  auto put = [&flat, &pos](const MatrixXd& m) {
    RowMajorMap(flat.data() + pos, m.rows(), m.cols()) = m;
    pos += m.size();
  };
  if (const auto* mp = std::get_if<MpRbfnModel>(&model.impl)) {
    put(mp->z_map);
    flat.segment(pos, mp->centers.size()) = mp->centers;
    pos += mp->centers.size();
    flat[pos++] = mp->shape;
    put(mp->out_map);
  } else if (const auto* basic = std::get_if<BasicRbfnModel>(&model.impl)) {
    put(basic->centers.transpose());  // centre-major
    flat[pos++] = basic->shape;
    put(basic->out_map);
  } else {
    const auto& mlp = std::get<MlpModel>(model.impl);
    put(mlp.w1);
    put(mlp.w2);
  }
  return flat;
}

void set_params(AnyModel& model, const Eigen::VectorXd& flat) {
  if (flat.size() != model.param_count())
    throw std::invalid_argument("set_params: parameter count mismatch");
  Eigen::Index pos = 0;
  auto take = [&flat, &pos](MatrixXd& m) {
    m = ConstRowMajorMap(flat.data() + pos, m.rows(), m.cols());
    pos += m.size();
  };
  if (auto* mp = std::get_if<MpRbfnModel>(&model.impl)) {
    take(mp->z_map);
    mp->centers = flat.segment(pos, mp->centers.size());
    pos += mp->centers.size();
    mp->shape = flat[pos++];
    take(mp->out_map);
  } else if (auto* basic = std::get_if<BasicRbfnModel>(&model.impl)) {
    MatrixXd ct = basic->centers.transpose();
    take(ct);
    basic->centers = ct.transpose();
    basic->shape = flat[pos++];
    take(basic->out_map);
  } else {
    auto& mlp = std::get<MlpModel>(model.impl);
    take(mlp.w1);
    take(mlp.w2);
  }
}

Eigen::MatrixXd model_forward_cached(const AnyModel& model, const Eigen::MatrixXd& queries,
                                     ModelCache& cache) {
  cache.input = queries;
  if (const auto* mp = std::get_if<MpRbfnModel>(&model.impl)) {
    cache.latent = mp->z_map * queries;
    cache.phi = rbf_layer_of(*mp).forward(cache.latent, &cache.rbf);
    Eigen::MatrixXd out = mp->out_map * cache.phi;
    if (mp->interpolation) out += interp_branch_batch(queries, mp->grid);
    return out;
  }
  if (const auto* basic = std::get_if<BasicRbfnModel>(&model.impl)) {
    cache.radii = center_radii(basic->centers, queries);
    net::kernel_apply(basic->kernel, basic->shape, cache.radii, cache.phi, &cache.d_r,
                      &cache.d_eps);
    return basic->out_map * cache.phi;
  }
  const auto& mlp = std::get<MlpModel>(model.impl);
  const Eigen::MatrixXd pre = mlp.w1 * queries;
  if (mlp.use_tanh)
    cache.latent = pre.array().tanh();
  else
    cache.latent = 1.0 / (1.0 + (-pre.array()).exp());
  return mlp.w2 * cache.latent;
}

Eigen::VectorXd model_backward(const AnyModel& model, const ModelCache& cache,
                               const Eigen::MatrixXd& output_grad) {
  VectorXd flat = VectorXd::Zero(model.param_count());
  Eigen::Index pos = 0;
  auto put = [&flat, &pos](const MatrixXd& m) {
    RowMajorMap(flat.data() + pos, m.rows(), m.cols()) = m;
    pos += m.size();
  };
  if (const auto* mp = std::get_if<MpRbfnModel>(&model.impl)) {
    const MatrixXd g_w = output_grad * cache.phi.transpose();
    const MatrixXd d_phi = mp->out_map.transpose() * output_grad;
    VectorXd g_c = VectorXd::Zero(mp->centers.size());
    double g_shape = 0.0;
    const MatrixXd d_latent = rbf_layer_of(*mp).backward(cache.rbf, d_phi, g_c, g_shape);
    const MatrixXd g_z = d_latent * cache.input.transpose();
    put(g_z);
    flat.segment(pos, g_c.size()) = g_c;
    pos += g_c.size();
    flat[pos++] = g_shape;
    put(g_w);
  } else if (const auto* basic = std::get_if<BasicRbfnModel>(&model.impl)) {
    const MatrixXd g_w = output_grad * cache.phi.transpose();
    const MatrixXd d_phi = basic->out_map.transpose() * output_grad;
    const MatrixXd d_r = d_phi.cwiseProduct(cache.d_r);
    const double g_shape = d_phi.cwiseProduct(cache.d_eps).sum();
    // dR/dC_k = (C_k - q_b) / R_kb, guarded at R ~ 0.
    const MatrixXd s = d_r.cwiseQuotient(cache.radii.cwiseMax(1e-12));
    const VectorXd row_sums = s.rowwise().sum();
    const MatrixXd g_c = basic->centers * row_sums.asDiagonal() - cache.input * s.transpose();
    put(g_c.transpose());
    flat[pos++] = g_shape;
    put(g_w);
  } else {
    const auto& mlp = std::get<MlpModel>(model.impl);
    const MatrixXd g_w2 = output_grad * cache.latent.transpose();
    const MatrixXd d_h = mlp.w2.transpose() * output_grad;
    MatrixXd act_grad;
    if (mlp.use_tanh)
      act_grad = 1.0 - cache.latent.array().square();
    else
      act_grad = cache.latent.array() * (1.0 - cache.latent.array());
    const MatrixXd g_w1 = d_h.cwiseProduct(act_grad) * cache.input.transpose();
    put(g_w1);
    put(g_w2);
  }
  return flat;
}

namespace {

struct QueryStats {
  Vec5 mean = Vec5::Zero();
  Vec5 stddev = Vec5::Ones();
};

QueryStats query_stats(const Dataset& ds) {
  QueryStats st;
  if (ds.samples.empty()) return st;
  Vec5 sum = Vec5::Zero(), sq = Vec5::Zero();
  for (const Sample& s : ds.samples) {
    const Vec5 q = s.query.vec();
    sum += q;
    sq += q.cwiseProduct(q);
  }
  const double n = static_cast<double>(ds.samples.size());
  st.mean = sum / n;
  st.stddev = (sq / n - st.mean.cwiseProduct(st.mean)).cwiseMax(1e-12).cwiseSqrt();
  st.stddev = st.stddev.cwiseMax(1e-6);
  return st;
}

AnyModel init_model(ModelKind kind, const ModelOptions& opts, const Dataset& train,
                    std::mt19937_64& rng) {
  const TimeGrid grid = train.grid_spec.time_grid;
  const int outputs = 5 * grid.n_points;
  const QueryStats st = query_stats(train);
  std::uniform_real_distribution<double> unif(-std::sqrt(3.0 / 5.0), std::sqrt(3.0 / 5.0));
  std::normal_distribution<double> normal(0.0, 1.0);

  AnyModel model;
  model.kind = kind;
  switch (kind) {
    case ModelKind::mp_rbfn:
    case ModelKind::mp_rbfn_no_interp: {
      MpRbfnModel m;
      m.grid = grid;
      m.kernel = opts.kernel;
      m.interpolation = kind == ModelKind::mp_rbfn;
      m.z_map.resize(opts.latent, 5);
      m.centers.resize(opts.latent);
      // Whitening-style init: rows act on standardized inputs, with the input
      // mean folded into the centres so that z - c is O(1) on the data.
      for (int k = 0; k < opts.latent; ++k) {
        double shift = 0.0;
        for (int j = 0; j < 5; ++j) {
          const double g = unif(rng);
          m.z_map(k, j) = g / st.stddev[j];
          shift += m.z_map(k, j) * st.mean[j];
        }
        m.centers[k] = shift + normal(rng);
      }
      m.shape = 1.0;
      m.out_map = MatrixXd::Zero(outputs, opts.latent);
      model.impl = std::move(m);
      break;
    }
    case ModelKind::basic_rbfn: {
      BasicRbfnModel m;
      m.grid = grid;
      m.kernel = opts.kernel;
      m.centers.resize(5, opts.latent);
      std::uniform_int_distribution<size_t> pick(0, train.samples.size() - 1);
      for (int k = 0; k < opts.latent; ++k)
        m.centers.col(k) = train.samples[pick(rng)].query.vec();
      double dist = 0.0;
      int pairs = 0;
      for (int k = 0; k + 1 < opts.latent && k < 256; ++k, ++pairs)
        dist += (m.centers.col(k) - m.centers.col(k + 1)).norm();
      m.shape = pairs > 0 && dist > 1e-9 ? pairs / dist : 1.0;
      m.out_map = MatrixXd::Zero(outputs, opts.latent);
      model.impl = std::move(m);
      break;
    }
    default: {
      MlpModel m;
      m.grid = grid;
      m.use_tanh = kind == ModelKind::mlp_tanh;
      m.w1.resize(opts.latent, 5);
      for (int k = 0; k < opts.latent; ++k)
        for (int j = 0; j < 5; ++j) m.w1(k, j) = unif(rng) / st.stddev[j];
      m.w2 = MatrixXd::Zero(outputs, opts.latent);
      model.impl = std::move(m);
      break;
    }
  }
  return model;
}

void dataset_matrices(const Dataset& ds, MatrixXd& queries, MatrixXd& targets) {
  const int M = ds.grid_spec.time_grid.n_points;
  queries.resize(5, static_cast<Eigen::Index>(ds.samples.size()));
  targets.resize(5 * M, static_cast<Eigen::Index>(ds.samples.size()));
  for (size_t i = 0; i < ds.samples.size(); ++i) {
    queries.col(static_cast<Eigen::Index>(i)) = ds.samples[i].query.vec();
    targets.col(static_cast<Eigen::Index>(i)) = flatten(ds.samples[i].trajectory);
  }
}

net::GroupWeights weights_from_ranges(const MatrixXd& targets, int n_nodes,
                                      const net::GroupWeights& base) {
  auto range_of = [&](int row0, int rows) {
    const auto block = targets.middleRows(row0, rows);
    const double r = block.maxCoeff() - block.minCoeff();
    return std::max(r, 1e-3);
  };
  net::GroupWeights w = base;
  const double pr = range_of(0, 2 * n_nodes);
  w.position = 1.0 / (pr * pr);
  const double vr = range_of(2 * n_nodes, n_nodes);
  w.velocity = 1.0 / (vr * vr);
  const double sr = range_of(3 * n_nodes, n_nodes);
  w.steering = 1.0 / (sr * sr);
  const double orr = range_of(4 * n_nodes, n_nodes);
  w.orientation = 1.0 / (orr * orr);
  return w;
}

}  // namespace

TrainResult train_model(ModelKind kind, const Dataset& train, const Dataset& test,
                        const net::TrainConfig& cfg, const ModelOptions& opts) {
  cfg.validate();
  if (train.samples.empty()) throw std::invalid_argument("train_model: empty training split");
  const int M = train.grid_spec.time_grid.n_points;

  MatrixXd q_train, y_train, q_test, y_test;
  dataset_matrices(train, q_train, y_train);
  dataset_matrices(test, q_test, y_test);

  net::GroupWeights weights = cfg.loss_weights;
  if (cfg.weights_from_data) weights = weights_from_ranges(y_train, M, cfg.loss_weights);

  std::mt19937_64 rng(cfg.seed);
  AnyModel model = init_model(kind, opts, train, rng);
  VectorXd params = flatten_params(model);
  net::AdamState adam;
  adam.init(params.size());

  const auto n = static_cast<size_t>(q_train.cols());
  std::vector<Eigen::Index> order(n);
  for (size_t i = 0; i < n; ++i) order[i] = static_cast<Eigen::Index>(i);

  auto eval_loss = [&](const MatrixXd& q, const MatrixXd& y) {
    if (q.cols() == 0) return 0.0;
    double total = 0.0;
    constexpr Eigen::Index kChunk = 2048;
    for (Eigen::Index c0 = 0; c0 < q.cols(); c0 += kChunk) {
      const Eigen::Index b = std::min(kChunk, q.cols() - c0);
      const MatrixXd pred = model.forward(q.middleCols(c0, b));
      total += net::weighted_mse(pred, y.middleCols(c0, b), M, weights) * static_cast<double>(b);
    }
    return total / static_cast<double>(q.cols());
  };

  TrainResult result;
  result.loss_weights = weights;
  VectorXd best_params = params;
  double best_loss = std::numeric_limits<double>::infinity();
  int t = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (size_t b0 = 0; b0 < n; b0 += static_cast<size_t>(cfg.batch_size)) {
      const auto b = std::min<size_t>(cfg.batch_size, n - b0);
      MatrixXd qb(5, static_cast<Eigen::Index>(b)), yb(5 * M, static_cast<Eigen::Index>(b));
      for (size_t j = 0; j < b; ++j) {
        qb.col(static_cast<Eigen::Index>(j)) = q_train.col(order[b0 + j]);
        yb.col(static_cast<Eigen::Index>(j)) = y_train.col(order[b0 + j]);
      }
      ModelCache cache;
      const MatrixXd pred = model_forward_cached(model, qb, cache);
      const double loss = net::weighted_mse(pred, yb, M, weights);
      if (!std::isfinite(loss)) throw TrainingError("training diverged", epoch);
      epoch_loss += loss * static_cast<double>(b);
      const MatrixXd d_out = net::weighted_mse_grad(pred, yb, M, weights);
      const VectorXd grad = model_backward(model, cache, d_out);
      net::adam_step(params, grad, adam, ++t, cfg);
      set_params(model, params);
    }
    result.train_loss.push_back(epoch_loss / static_cast<double>(n));
    const double test_loss = eval_loss(q_test, y_test);
    result.test_loss.push_back(test_loss);
    if (test_loss < best_loss) {
      best_loss = test_loss;
      best_params = params;
      result.best_epoch = epoch;
    }
  }

  set_params(model, best_params);
  result.model = std::move(model);
  return result;
}

std::pair<Trajectory, bool> analytic_mp(const Query& q, const VehicleParams& params,
                                        const TimeGrid& grid) {
  const double T = grid.horizon_s;
  const double vf = 2.0 * q.xf_m / T - q.v0_m_s;

  // Quintic with c0..c2 fixed by the initial conditions and c3..c5 from the
  // terminal ones.
  auto quintic = [T](double p0, double v0, double a0, double pT, double vT, double aT) {
    Eigen::Matrix3d A;
    const double t2 = T * T, t3 = t2 * T, t4 = t3 * T, t5 = t4 * T;
    A << t3, t4, t5, 3 * t2, 4 * t3, 5 * t4, 6 * T, 12 * t2, 20 * t3;
    Eigen::Vector3d b;
    b << pT - (p0 + v0 * T + 0.5 * a0 * t2), vT - (v0 + a0 * T), aT - a0;
    const Eigen::Vector3d c = A.partialPivLu().solve(b);
    return (Eigen::Matrix<double, 6, 1>() << p0, v0, 0.5 * a0, c[0], c[1], c[2]).finished();
  };

  const auto cx = quintic(0.0, q.v0_m_s, 0.0, q.xf_m, vf, 0.0);
  const auto cy = quintic(0.0, 0.0, 0.0, q.yf_m, vf * std::tan(q.thetaf_rad), 0.0);

  auto eval = [](const Eigen::Matrix<double, 6, 1>& c, double t, double& p, double& v,
                 double& a) {
    p = c[0] + t * (c[1] + t * (c[2] + t * (c[3] + t * (c[4] + t * c[5]))));
    v = c[1] + t * (2 * c[2] + t * (3 * c[3] + t * (4 * c[4] + t * 5 * c[5])));
    a = 2 * c[2] + t * (6 * c[3] + t * (12 * c[4] + t * 20 * c[5]));
  };

  const int M = grid.n_points;
  Trajectory traj = Trajectory::Zero(M, 5);
  bool valid = vf > 0.0;
  std::vector<double> steer(M, 0.0), accel(M, 0.0);
  for (int i = 0; i < M; ++i) {
    const double t = grid.time_at(i);
    double x, xd, xdd, y, yd, ydd;
    eval(cx, t, x, xd, xdd);
    eval(cy, t, y, yd, ydd);
    const double speed = std::hypot(xd, yd);
    const double heading = std::atan2(yd, xd);
    double curvature = 0.0;
    const double curv_num = xd * ydd - yd * xdd;
    if (speed >= 0.1) {
      curvature = curv_num / (speed * speed * speed);
      accel[i] = (xd * xdd + yd * ydd) / speed;
    } else if (std::abs(curv_num) > 1e-12) {
      valid = false;  // curvature needed at degenerate speed
    }
    steer[i] = std::atan(params.wheelbase_m * curvature);
    traj(i, 0) = x;
    traj(i, 1) = y;
    traj(i, 2) = speed;
    traj(i, 3) = steer[i];
    traj(i, 4) = heading;
  }
  if (std::abs(traj(0, 4)) > 1e-6) valid = false;
  if (valid) {
    for (int i = 0; i < M && valid; ++i) {
      const int j = std::min(i, M - 2);
      const double steer_rate = (steer[j + 1] - steer[j]) / grid.step_s;
      const State s{traj(i, 0), traj(i, 1), traj(i, 3), traj(i, 2), accel[i], traj(i, 4)};
      const Control u{0.0, steer_rate};
      if (std::abs(s.steer_rad) >= M_PI / 2 || constraint_values(s, u, params).maxCoeff() > 1e-9)
        valid = false;
    }
  }
  return {traj, valid};
}

namespace {
constexpr char kModelMagic[6] = {'M', 'P', 'N', 'E', 'T', '1'};
}

void save_model(const AnyModel& model, const std::filesystem::path& path) {
  nlohmann::json header;
  header["kind"] = to_string(model.kind);
  const TimeGrid& grid = model.time_grid();
  header["n_points"] = grid.n_points;
  header["horizon_s"] = grid.horizon_s;
  header["step_s"] = grid.step_s;
  if (const auto* mp = std::get_if<MpRbfnModel>(&model.impl)) {
    header["latent"] = mp->z_map.rows();
    header["kernel"] = net::to_string(mp->kernel);
    header["interpolation"] = mp->interpolation;
  } else if (const auto* basic = std::get_if<BasicRbfnModel>(&model.impl)) {
    header["latent"] = basic->centers.cols();
    header["kernel"] = net::to_string(basic->kernel);
  } else {
    header["hidden"] = std::get<MlpModel>(model.impl).w1.rows();
  }
  const VectorXd flat = flatten_params(model);
  header["param_count"] = flat.size();

  binio::Writer w;
  w.raw(kModelMagic, sizeof(kModelMagic));
  w.u32(1);  // version
  const std::string hs = header.dump();
  w.u64(hs.size());
  w.bytes(hs);
  w.u64(static_cast<uint64_t>(flat.size()));
  w.f64s(flat.data(), static_cast<size_t>(flat.size()));
  binio::write_file(path.string(), w);
}

AnyModel load_model(const std::filesystem::path& path, std::optional<ModelKind> expected) {
  const auto file = binio::read_file(path.string());
  binio::Reader r = binio::checked_reader(file);
  char magic[6];
  r.raw(magic, 6);
  if (std::memcmp(magic, kModelMagic, 6) != 0) throw FormatError("bad magic", 0);
  if (r.u32() != 1) throw FormatError("unsupported version", 6);
  const uint64_t hlen = r.u64();
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(r.bytes(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad header: ") + e.what(), 18);
  }

  AnyModel model;
  model.kind = model_kind_from_string(header.at("kind").get<std::string>());
  if (expected && *expected != model.kind)
    throw FormatError("checkpoint holds a '" + to_string(model.kind) + "' model, expected '" +
                          to_string(*expected) + "'",
                      18);
  TimeGrid grid;
  grid.n_points = header.at("n_points").get<int>();
  grid.horizon_s = header.at("horizon_s").get<double>();
  grid.step_s = header.at("step_s").get<double>();
  const int outputs = 5 * grid.n_points;

  switch (model.kind) {
    case ModelKind::mp_rbfn:
    case ModelKind::mp_rbfn_no_interp: {
      MpRbfnModel m;
      m.grid = grid;
      const int latent = header.at("latent").get<int>();
      m.kernel = net::kernel_from_string(header.at("kernel").get<std::string>());
      m.interpolation = header.at("interpolation").get<bool>();
      m.z_map.resize(latent, 5);
      m.centers.resize(latent);
      m.out_map.resize(outputs, latent);
      model.impl = std::move(m);
      break;
    }
    case ModelKind::basic_rbfn: {
      BasicRbfnModel m;
      m.grid = grid;
      const int latent = header.at("latent").get<int>();
      m.kernel = net::kernel_from_string(header.at("kernel").get<std::string>());
      m.centers.resize(5, latent);
      m.out_map.resize(outputs, latent);
      model.impl = std::move(m);
      break;
    }
    default: {
      MlpModel m;
      m.grid = grid;
      const int hidden = header.at("hidden").get<int>();
      m.use_tanh = model.kind == ModelKind::mlp_tanh;
      m.w1.resize(hidden, 5);
      m.w2.resize(outputs, hidden);
      model.impl = std::move(m);
      break;
    }
  }

  const uint64_t count = r.u64();
  if (count != static_cast<uint64_t>(model.param_count()))
    throw FormatError("parameter array disagrees with architecture", r.pos() - 8);
  VectorXd flat(count);
  r.f64s(flat.data(), count);
  set_params(model, flat);
  return model;
}

uint64_t file_checksum(const std::filesystem::path& path) {
  const auto bytes = binio::read_file(path.string());
  return binio::crc32(bytes.data(), bytes.size());
}

}  // namespace mpr
