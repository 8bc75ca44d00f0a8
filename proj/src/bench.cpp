#include "mpr/bench.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "mpr/svg.hpp"

namespace mpr {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

double rmse(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& target,
            Channel channel) {
  if (pred.empty() || pred.size() != target.size())
    throw std::invalid_argument("rmse: empty or misaligned sets");
  double sum = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const Trajectory& p = pred[i];
    const Trajectory& t = target[i];
    if (p.rows() != t.rows()) throw std::invalid_argument("rmse: node count mismatch");
    switch (channel) {
      case Channel::position:
        sum += (p.leftCols(2) - t.leftCols(2)).rowwise().squaredNorm().sum();
        break;
      case Channel::velocity:
        sum += (p.col(2) - t.col(2)).squaredNorm();
        break;
      case Channel::steering:
        sum += (p.col(3) - t.col(3)).squaredNorm();
        break;
      case Channel::orientation:
        sum += (p.col(4) - t.col(4)).squaredNorm();
        break;
    }
    n += static_cast<size_t>(p.rows());
  }
  return std::sqrt(sum / static_cast<double>(n));
}

YawBinStats yaw_binned_error(const std::vector<Trajectory>& pred,
                             const std::vector<Trajectory>& target,
                             const std::vector<Query>& queries,
                             const std::vector<bool>* valid) {
  if (pred.size() != target.size() || pred.size() != queries.size())
    throw std::invalid_argument("yaw_binned_error: misaligned sets");
  YawBinStats stats;
  std::array<double, 3> err_sum{};
  for (size_t i = 0; i < queries.size(); ++i) {
    const double a = std::abs(queries[i].thetaf_rad);
    size_t bin = 0;
    for (size_t b = 1; b < stats.kCenters.size(); ++b)
      if (std::abs(a - stats.kCenters[b]) < std::abs(a - stats.kCenters[bin])) bin = b;
    ++stats.total[bin];
    if (valid && !(*valid)[i]) continue;
    const double e =
        (pred[i].leftCols(2) - target[i].leftCols(2)).rowwise().norm().mean();
    err_sum[bin] += e;
    ++stats.count[bin];
  }
  for (size_t b = 0; b < 3; ++b) {
    stats.mean_position_error[b] =
        stats.count[b] ? err_sum[b] / static_cast<double>(stats.count[b]) : kNaN;
    stats.valid_share[b] =
        valid ? (stats.total[b] ? static_cast<double>(stats.count[b]) / stats.total[b] : kNaN)
              : kNaN;
  }
  return stats;
}

TimingRow time_inference(const std::function<void(const Eigen::MatrixXd&)>& generator,
                         const Eigen::MatrixXd& query_pool, size_t batch_size, int repetitions) {
  if (query_pool.cols() == 0) throw std::invalid_argument("time_inference: empty query pool");
  Eigen::MatrixXd batch(5, static_cast<Eigen::Index>(batch_size));
  for (size_t i = 0; i < batch_size; ++i)
    batch.col(static_cast<Eigen::Index>(i)) =
        query_pool.col(static_cast<Eigen::Index>(i % query_pool.cols()));

  generator(batch);  // warm-up, discarded
  double sum = 0.0, sum_sq = 0.0;
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    generator(batch);
    const auto t1 = std::chrono::steady_clock::now();
    const double dt = std::chrono::duration<double>(t1 - t0).count();
    sum += dt;
    sum_sq += dt * dt;
  }
  TimingRow row;
  row.batch_size = batch_size;
  row.repetitions = repetitions;
  row.mean_s = sum / repetitions;
  const double var = std::max(0.0, sum_sq / repetitions - row.mean_s * row.mean_s);
  row.stddev_s = std::sqrt(var);
  row.per_traj_s = row.mean_s / static_cast<double>(batch_size);
  row.unstable = row.mean_s > 0.0 && row.stddev_s / row.mean_s > 0.5;
  return row;
}

size_t PredictionSet::n_valid() const {
  size_t n = 0;
  for (bool v : valid) n += v ? 1 : 0;
  return n;
}

std::vector<Trajectory> PredictionSet::valid_pred() const {
  std::vector<Trajectory> out;
  for (size_t i = 0; i < pred.size(); ++i)
    if (valid[i]) out.push_back(pred[i]);
  return out;
}

std::vector<Trajectory> PredictionSet::valid_target() const {
  std::vector<Trajectory> out;
  for (size_t i = 0; i < target.size(); ++i)
    if (valid[i]) out.push_back(target[i]);
  return out;
}

PredictionSet predict_with_model(const AnyModel& model, const Dataset& data) {
  PredictionSet set;
  const int M = data.grid_spec.time_grid.n_points;
  const auto n = static_cast<Eigen::Index>(data.samples.size());
  Eigen::MatrixXd q(5, n);
  for (Eigen::Index i = 0; i < n; ++i) q.col(i) = data.samples[i].query.vec();
  constexpr Eigen::Index kChunk = 4096;
  set.pred.reserve(data.samples.size());
  for (Eigen::Index c0 = 0; c0 < n; c0 += kChunk) {
    const Eigen::Index b = std::min(kChunk, n - c0);
    const Eigen::MatrixXd out = model.forward(q.middleCols(c0, b));
    for (Eigen::Index j = 0; j < b; ++j) set.pred.push_back(unflatten(out.col(j), M));
  }
  for (const Sample& s : data.samples) {
    set.target.push_back(s.trajectory);
    set.queries.push_back(s.query);
  }
  set.valid.assign(data.samples.size(), true);
  return set;
}

PredictionSet predict_analytic(const VehicleParams& params, const Dataset& data) {
  PredictionSet set;
  for (const Sample& s : data.samples) {
    auto [traj, ok] = analytic_mp(s.query, params, data.grid_spec.time_grid);
    set.pred.push_back(std::move(traj));
    set.target.push_back(s.trajectory);
    set.queries.push_back(s.query);
    set.valid.push_back(ok);
  }
  return set;
}

ModelReport report_for(const std::string& name, const PredictionSet& set, bool can_reject) {
  ModelReport r;
  r.name = name;
  r.total = set.pred.size();
  r.evaluated = set.n_valid();
  const auto vp = set.valid_pred();
  const auto vt = set.valid_target();
  if (!vp.empty()) {
    r.rmse_position = rmse(vp, vt, Channel::position);
    r.rmse_velocity = rmse(vp, vt, Channel::velocity);
    r.rmse_orientation = rmse(vp, vt, Channel::orientation);
  }
  r.bins = yaw_binned_error(set.pred, set.target, set.queries, can_reject ? &set.valid : nullptr);
  return r;
}

void emit_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);

  {
    std::ofstream f(dir / "report.csv");
    if (!f) throw std::runtime_error("cannot write report.csv under " + dir.string());
    f << "# position RMSE is the root mean squared Euclidean point error over all nodes;\n";
    f << "# models that can reject queries are scored on their valid subset only\n";
    f << "model,rmse_position,rmse_velocity,rmse_orientation,"
         "bin0_mean_pos_err,bin08_mean_pos_err,bin16_mean_pos_err,"
         "bin0_valid_share,bin08_valid_share,bin16_valid_share,evaluated,total\n";
    f << std::setprecision(6);
    for (const auto& m : report.models) {
      f << m.name << ',' << m.rmse_position << ',' << m.rmse_velocity << ','
        << m.rmse_orientation;
      for (double v : m.bins.mean_position_error) f << ',' << v;
      for (double v : m.bins.valid_share) f << ',' << v;
      f << ',' << m.evaluated << ',' << m.total << '\n';
    }
  }

  {
    std::ofstream f(dir / "timing.csv");
    if (!f) throw std::runtime_error("cannot write timing.csv under " + dir.string());
    f << "model,batch_size,mean_s,stddev_s,per_traj_s,repetitions,unstable\n";
    f << std::setprecision(6);
    for (const auto& m : report.models)
      for (const auto& t : m.timing)
        f << m.name << ',' << t.batch_size << ',' << t.mean_s << ',' << t.stddev_s << ','
          << t.per_traj_s << ',' << t.repetitions << ',' << (t.unstable ? 1 : 0) << '\n';
  }

  {
    std::ofstream f(dir / "report.txt");
    f << "Evaluation report";
    if (!report.host.empty()) f << " (" << report.host << ")";
    f << "\ndataset hash: " << std::hex << report.dataset_hash << std::dec << "\n";
    if (!report.note.empty()) f << report.note << "\n";
    f << "\n" << std::left << std::setw(22) << "model" << std::right << std::setw(12) << "pos RMSE"
      << std::setw(12) << "vel RMSE" << std::setw(12) << "yaw RMSE" << std::setw(10) << "n"
      << "\n";
    f << std::setprecision(4);
    for (const auto& m : report.models)
      f << std::left << std::setw(22) << m.name << std::right << std::setw(12) << m.rmse_position
        << std::setw(12) << m.rmse_velocity << std::setw(12) << m.rmse_orientation
        << std::setw(10) << m.evaluated << "\n";
    f << "\nmean position error by final-yaw bin (0 / 0.8 / 1.6 rad):\n";
    for (const auto& m : report.models) {
      f << std::left << std::setw(22) << m.name << std::right;
      for (double v : m.bins.mean_position_error) f << std::setw(12) << v;
      if (!std::isnan(m.bins.valid_share[0])) {
        f << "   valid:";
        for (double v : m.bins.valid_share) f << ' ' << std::setw(6) << v;
      }
      f << "\n";
    }
    if (!report.models.empty() && !report.models.front().timing.empty()) {
      f << "\ninference timing (per-trajectory seconds):\n";
      for (const auto& m : report.models) {
        f << std::left << std::setw(22) << m.name << std::right;
        for (const auto& t : m.timing)
          f << "  b" << t.batch_size << "=" << std::setprecision(3) << t.per_traj_s;
        f << "\n";
      }
    }
  }

  std::vector<std::string> names;
  std::vector<std::vector<double>> rmse_vals(1);
  for (const auto& m : report.models) {
    names.push_back(m.name);
    rmse_vals[0].push_back(m.rmse_position);
  }
  svg::write_bar_chart(dir / "rmse.svg", "position RMSE [m]", {"position RMSE"}, names,
                       [&] {
                         std::vector<std::vector<double>> v(1);
                         v[0] = rmse_vals[0];
                         return v;
                       }());

  bool have_timing = false;
  for (const auto& m : report.models) have_timing |= !m.timing.empty();
  if (have_timing) {
    std::vector<std::string> groups;
    for (const auto& m : report.models)
      if (!m.timing.empty()) {
        for (const auto& t : m.timing) groups.push_back("b" + std::to_string(t.batch_size));
        break;
      }
    std::vector<std::string> series;
    std::vector<std::vector<double>> vals;
    for (const auto& m : report.models) {
      if (m.timing.empty()) continue;
      series.push_back(m.name);
      std::vector<double> row(groups.size(), kNaN);
      for (size_t i = 0; i < m.timing.size() && i < groups.size(); ++i)
        row[i] = m.timing[i].per_traj_s;
      vals.push_back(std::move(row));
    }
    svg::write_bar_chart(dir / "timing.svg", "per-trajectory inference time [s]", series, groups,
                         vals);
  }
}

}  // namespace mpr
