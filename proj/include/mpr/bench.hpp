#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "mpr/models.hpp"

namespace mpr {

enum class Channel { position, velocity, orientation, steering };

/// RMSE over all nodes and samples. Position uses the Euclidean point error;
/// the scalar channels use plain componentwise RMSE.
double rmse(const std::vector<Trajectory>& pred, const std::vector<Trajectory>& target,
            Channel channel);

/// Yaw bins at |thetaf| nearest to {0, 0.8, 1.6} rad.
struct YawBinStats {
  static constexpr std::array<double, 3> kCenters{0.0, 0.8, 1.6};
  std::array<double, 3> mean_position_error{};  // NaN where the bin is empty
  std::array<double, 3> valid_share{};          // NaN unless a validity mask was given
  std::array<size_t, 3> count{};
  std::array<size_t, 3> total{};  // including invalid samples
};

/// Mean per-sample position error per bin. `valid`, when given, marks which
/// predictions count; invalid samples still enter the bin totals for the
/// valid-share row.
YawBinStats yaw_binned_error(const std::vector<Trajectory>& pred,
                             const std::vector<Trajectory>& target,
                             const std::vector<Query>& queries,
                             const std::vector<bool>* valid = nullptr);

struct TimingRow {
  size_t batch_size = 0;
  double mean_s = 0.0;
  double stddev_s = 0.0;
  double per_traj_s = 0.0;
  int repetitions = 0;
  bool unstable = false;  // stddev/mean above 0.5
};

/// Wall-clock timing of a batch generator. One warm-up run is discarded;
/// the pool columns are cycled to fill each batch.
TimingRow time_inference(const std::function<void(const Eigen::MatrixXd&)>& generator,
                         const Eigen::MatrixXd& query_pool, size_t batch_size, int repetitions);

struct ModelReport {
  std::string name;
  double rmse_position = 0.0;
  double rmse_velocity = 0.0;
  double rmse_orientation = 0.0;
  YawBinStats bins;
  std::vector<TimingRow> timing;
  size_t evaluated = 0;  // samples entering the RMSE
  size_t total = 0;      // all test samples
};

struct EvalReport {
  std::vector<ModelReport> models;
  uint64_t dataset_hash = 0;
  std::string host;
  std::string note;
};

/// Aligned predictions/targets over a dataset, with a validity mask for
/// generators that can reject a query.
struct PredictionSet {
  std::vector<Trajectory> pred;
  std::vector<Trajectory> target;
  std::vector<Query> queries;
  std::vector<bool> valid;

  size_t n_valid() const;
  std::vector<Trajectory> valid_pred() const;
  std::vector<Trajectory> valid_target() const;
};

PredictionSet predict_with_model(const AnyModel& model, const Dataset& data);
PredictionSet predict_analytic(const VehicleParams& params, const Dataset& data);

/// RMSE + yaw-bin block of a model report (timing is filled separately).
/// can_reject controls whether the valid-share row is populated.
ModelReport report_for(const std::string& name, const PredictionSet& set,
                       bool can_reject = false);

/// Writes report.csv / timing.csv / report.txt plus SVG bar charts of the
/// position RMSE and the per-trajectory timing. Deterministic output for a
/// fixed report.
void emit_report(const EvalReport& report, const std::filesystem::path& dir);

}  // namespace mpr
