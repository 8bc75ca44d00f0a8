#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mpr/dataset.hpp"
#include "mpr/net.hpp"

namespace mpr {

/// Latent-linear RBF motion-primitive network: a linear map into an
/// N-dimensional latent space, one scalar radial kernel per latent
/// coordinate, a linear output map, and an optional boundary-interpolation
/// branch added on top.
struct MpRbfnModel {
  Eigen::MatrixXd z_map;    // N x 5
  Eigen::VectorXd centers;  // K == N
  double shape = 1.0;
  Eigen::MatrixXd out_map;  // (5*n_points) x K
  net::Kernel kernel = net::Kernel::gaussian;
  bool interpolation = true;
  TimeGrid grid;

  int64_t param_count() const;
};

/// Plain RBF network; centres are vectors in the 5-dimensional input space.
struct BasicRbfnModel {
  Eigen::MatrixXd centers;  // 5 x K
  double shape = 1.0;
  Eigen::MatrixXd out_map;  // (5*n_points) x K
  net::Kernel kernel = net::Kernel::gaussian;
  TimeGrid grid;

  int64_t param_count() const;
};

/// Input, hidden and output layer with a pointwise nonlinearity after the
/// hidden layer.
struct MlpModel {
  Eigen::MatrixXd w1;  // hidden x 5
  Eigen::MatrixXd w2;  // (5*n_points) x hidden
  bool use_tanh = true;
  TimeGrid grid;

  int64_t param_count() const;
};

enum class ModelKind { mp_rbfn, mp_rbfn_no_interp, basic_rbfn, mlp_tanh, mlp_sigmoid };

ModelKind model_kind_from_string(const std::string& name);
std::string to_string(ModelKind kind);

struct AnyModel {
  ModelKind kind = ModelKind::mp_rbfn;
  std::variant<MpRbfnModel, BasicRbfnModel, MlpModel> impl;

  const TimeGrid& time_grid() const;
  int64_t param_count() const;
  /// queries: 5 x batch; returns (5*n_points) x batch in channel-block layout.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& queries) const;
};

/// Linear time-domain interpolation between the boundary values: positions
/// and yaw ramp from zero to their final values, speed stays at v0 and the
/// steering angle ramps from delta0 back to zero.
Trajectory interp_branch(const Query& q, const TimeGrid& grid);
Eigen::MatrixXd interp_branch_batch(const Eigen::MatrixXd& queries, const TimeGrid& grid);

Eigen::MatrixXd mp_rbfn_forward(const MpRbfnModel& model, const Eigen::MatrixXd& queries);
Eigen::MatrixXd basic_rbfn_forward(const BasicRbfnModel& model, const Eigen::MatrixXd& queries);
Eigen::MatrixXd mlp_forward(const MlpModel& model, const Eigen::MatrixXd& queries);

/// Flat parameter vector in checkpoint order. MP-RBFN: Z row-major, centres,
/// shape, W row-major. Basic RBFN: centres (centre-major), shape, W
/// row-major. MLP: w1 row-major, w2 row-major.
Eigen::VectorXd flatten_params(const AnyModel& model);
void set_params(AnyModel& model, const Eigen::VectorXd& flat);

struct ModelCache {
  Eigen::MatrixXd input;
  Eigen::MatrixXd latent;  // latent coordinates (RBF nets) or hidden activations (MLP)
  Eigen::MatrixXd phi;
  Eigen::MatrixXd radii;        // basic RBFN only
  net::RbfLayer::Cache rbf;     // scalar-RBF partials
  Eigen::MatrixXd d_r, d_eps;   // basic RBFN kernel partials
};

Eigen::MatrixXd model_forward_cached(const AnyModel& model, const Eigen::MatrixXd& queries,
                                     ModelCache& cache);
/// Reverse sweep for the cached forward; returns the flat parameter gradient.
Eigen::VectorXd model_backward(const AnyModel& model, const ModelCache& cache,
                               const Eigen::MatrixXd& output_grad);

struct ModelOptions {
  int latent = 1024;  // N = K for the RBF models, hidden width for the MLPs
  net::Kernel kernel = net::Kernel::gaussian;
};

struct TrainResult {
  AnyModel model;  // best-on-test parameters
  std::vector<double> train_loss;
  std::vector<double> test_loss;
  int best_epoch = 0;
  net::GroupWeights loss_weights;
};

/// Mini-batch Adam training against the weighted trajectory MSE; keeps the
/// checkpoint with the lowest test loss. Throws TrainingError on divergence.
TrainResult train_model(ModelKind kind, const Dataset& train, const Dataset& test,
                        const net::TrainConfig& cfg, const ModelOptions& opts);

/// Jerk-minimal quintic polynomials in x and y with the terminal speed closed
/// by v_f = 2*xf/T - v0. The flag reports kinematic validity: the boundary
/// closure must be forward (v_f > 0), node speeds must stay away from zero
/// wherever curvature is needed, and every node must satisfy the vehicle
/// constraint vector.
std::pair<Trajectory, bool> analytic_mp(const Query& q, const VehicleParams& params,
                                        const TimeGrid& grid);

void save_model(const AnyModel& model, const std::filesystem::path& path);
AnyModel load_model(const std::filesystem::path& path,
                    std::optional<ModelKind> expected = std::nullopt);

/// CRC32 of a checkpoint (or any) file; recorded in training histories.
uint64_t file_checksum(const std::filesystem::path& path);

}  // namespace mpr
