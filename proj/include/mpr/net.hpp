#pragma once

#include <cstdint>
#include <string>

#include <Eigen/Dense>

namespace mpr::net {

enum class Kernel { gaussian, inv_quadratic, inv_multiquadratic };

Kernel kernel_from_string(const std::string& name);
std::string to_string(Kernel k);

/// Radial kernel value rho(eps * r), r >= 0; rho(0) = 1 for every kernel.
double kernel_eval(Kernel k, double eps, double r);

struct KernelGrads {
  double rho = 0.0;
  double d_r = 0.0;    // d rho / d r
  double d_eps = 0.0;  // d rho / d eps
};
KernelGrads kernel_grads(Kernel k, double eps, double r);

/// Element-wise kernel over a matrix of radii, optionally producing the
/// partials needed by backward passes.
void kernel_apply(Kernel k, double eps, const Eigen::MatrixXd& r, Eigen::MatrixXd& rho,
                  Eigen::MatrixXd* d_r = nullptr, Eigen::MatrixXd* d_eps = nullptr);

/// Dense layer; bias disabled by default for parameter-count parity with the
/// reference architectures.
struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  bool has_bias = false;
  Eigen::VectorXd bias;

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
  /// output_grad is (out x batch); returns the input gradient and fills the
  /// parameter gradients.
  Eigen::MatrixXd backward(const Eigen::MatrixXd& input, const Eigen::MatrixXd& output_grad,
                           Eigen::MatrixXd& weight_grad, Eigen::VectorXd* bias_grad) const;
};

/// Scalar-centre RBF layer: latent coordinate z_k is paired with its own
/// centre c_k and a single shared shape parameter, activation
/// rho(eps * |z_k - c_k|).
struct RbfLayer {
  Eigen::VectorXd centers;
  double shape = 1.0;
  Kernel kernel = Kernel::gaussian;

  struct Cache {
    Eigen::MatrixXd sign;   // sign(z - c)
    Eigen::MatrixXd d_r;    // d rho / d r per element
    Eigen::MatrixXd d_eps;  // d rho / d eps per element
  };

  Eigen::MatrixXd forward(const Eigen::MatrixXd& latent, Cache* cache = nullptr) const;
  /// Returns the latent gradient and accumulates the centre/shape gradients.
  Eigen::MatrixXd backward(const Cache& cache, const Eigen::MatrixXd& output_grad,
                           Eigen::VectorXd& centers_grad, double& shape_grad) const;
};

struct GroupWeights {
  double position = 1.0;
  double velocity = 1.0;
  double orientation = 1.0;
  double steering = 1.0;
  bool include_steering = true;
};

/// Weighted MSE over the channel groups of a trajectory batch laid out as
/// (5*n_nodes) x batch with channel blocks (x, y, v, steer, yaw). Each group
/// contributes weight * mean(squared error over its entries).
double weighted_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, int n_nodes,
                    const GroupWeights& w);
Eigen::MatrixXd weighted_mse_grad(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                                  int n_nodes, const GroupWeights& w);

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_hat = 1e-8;
  int epochs = 300;
  int batch_size = 256;
  GroupWeights loss_weights;
  bool weights_from_data = true;  // 1/range^2 per group, measured on the training split
  uint64_t seed = 1;

  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m, v;
  void init(Eigen::Index n) {
    m = Eigen::VectorXd::Zero(n);
    v = Eigen::VectorXd::Zero(n);
  }
};

/// One bias-corrected Adam update; t is the 1-based step counter.
void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, int t,
               const TrainConfig& cfg);

}  // namespace mpr::net
