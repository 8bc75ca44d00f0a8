#include "mpr/net.hpp"

#include <cmath>
#include <stdexcept>

namespace mpr::net {

Kernel kernel_from_string(const std::string& name) {
  if (name == "gaussian") return Kernel::gaussian;
  if (name == "inv_quadratic") return Kernel::inv_quadratic;
  if (name == "inv_multiquadratic") return Kernel::inv_multiquadratic;
  throw std::invalid_argument("unknown kernel: " + name);
}

std::string to_string(Kernel k) {
  switch (k) {
    case Kernel::gaussian: return "gaussian";
    case Kernel::inv_quadratic: return "inv_quadratic";
    case Kernel::inv_multiquadratic: return "inv_multiquadratic";
  }
  return "?";
}

double kernel_eval(Kernel k, double eps, double r) {
  const double s = eps * r * eps * r;
  switch (k) {
    case Kernel::gaussian: return std::exp(-s);
    case Kernel::inv_quadratic: return 1.0 / (1.0 + s);
    case Kernel::inv_multiquadratic: return 1.0 / std::sqrt(1.0 + s);
  }
  return 0.0;
}

KernelGrads kernel_grads(Kernel k, double eps, double r) {
  const double s = eps * r * eps * r;
  KernelGrads g;
  switch (k) {
    case Kernel::gaussian: {
      g.rho = std::exp(-s);
      g.d_r = -2.0 * eps * eps * r * g.rho;
      g.d_eps = -2.0 * eps * r * r * g.rho;
      break;
    }
    case Kernel::inv_quadratic: {
      g.rho = 1.0 / (1.0 + s);
      const double r2 = g.rho * g.rho;
      g.d_r = -2.0 * eps * eps * r * r2;
      g.d_eps = -2.0 * eps * r * r * r2;
      break;
    }
    case Kernel::inv_multiquadratic: {
      g.rho = 1.0 / std::sqrt(1.0 + s);
      const double r3 = g.rho * g.rho * g.rho;
      g.d_r = -eps * eps * r * r3;
      g.d_eps = -eps * r * r * r3;
      break;
    }
  }
  return g;
}

void kernel_apply(Kernel k, double eps, const Eigen::MatrixXd& r, Eigen::MatrixXd& rho,
                  Eigen::MatrixXd* d_r, Eigen::MatrixXd* d_eps) {
  rho.resize(r.rows(), r.cols());
  if (d_r) d_r->resize(r.rows(), r.cols());
  if (d_eps) d_eps->resize(r.rows(), r.cols());
  const double* rp = r.data();
  double* op = rho.data();
  const Eigen::Index n = r.size();
  if (!d_r && !d_eps) {
    for (Eigen::Index i = 0; i < n; ++i) op[i] = kernel_eval(k, eps, rp[i]);
    return;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const KernelGrads g = kernel_grads(k, eps, rp[i]);
    op[i] = g.rho;
    if (d_r) d_r->data()[i] = g.d_r;
    if (d_eps) d_eps->data()[i] = g.d_eps;
  }
}

Eigen::MatrixXd DenseLayer::forward(const Eigen::MatrixXd& input) const {
  if (input.rows() != weight.cols())
    throw std::invalid_argument("DenseLayer: input rows do not match weight columns");
  Eigen::MatrixXd out = weight * input;
  if (has_bias) out.colwise() += bias;
  return out;
}

Eigen::MatrixXd DenseLayer::backward(const Eigen::MatrixXd& input,
                                     const Eigen::MatrixXd& output_grad,
                                     Eigen::MatrixXd& weight_grad,
                                     Eigen::VectorXd* bias_grad) const {
  weight_grad = output_grad * input.transpose();
  if (bias_grad) *bias_grad = output_grad.rowwise().sum();
  return weight.transpose() * output_grad;
}

Eigen::MatrixXd RbfLayer::forward(const Eigen::MatrixXd& latent, Cache* cache) const {
  if (latent.rows() != centers.size())
    throw std::invalid_argument("RbfLayer: latent rows do not match centre count");
  Eigen::MatrixXd diff = latent.colwise() - centers;
  Eigen::MatrixXd r = diff.cwiseAbs();
  Eigen::MatrixXd rho;
  if (cache) {
    cache->sign = diff.cwiseSign();
    kernel_apply(kernel, shape, r, rho, &cache->d_r, &cache->d_eps);
  } else {
    kernel_apply(kernel, shape, r, rho);
  }
  return rho;
}

Eigen::MatrixXd RbfLayer::backward(const Cache& cache, const Eigen::MatrixXd& output_grad,
                                   Eigen::VectorXd& centers_grad, double& shape_grad) const {
  const Eigen::MatrixXd dr = output_grad.cwiseProduct(cache.d_r);
  shape_grad += output_grad.cwiseProduct(cache.d_eps).sum();
  const Eigen::MatrixXd dz = dr.cwiseProduct(cache.sign);
  centers_grad -= dz.rowwise().sum();
  return dz;
}

namespace {
struct GroupSpan {
  int row0, rows;
  double weight;
};
}  // namespace

static void group_spans(int n_nodes, const GroupWeights& w, GroupSpan out[4], int& count) {
  count = 0;
  out[count++] = {0, 2 * n_nodes, w.position};           // x and y blocks
  out[count++] = {2 * n_nodes, n_nodes, w.velocity};
  if (w.include_steering) out[count++] = {3 * n_nodes, n_nodes, w.steering};
  out[count++] = {4 * n_nodes, n_nodes, w.orientation};
}

double weighted_mse(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target, int n_nodes,
                    const GroupWeights& w) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols() ||
      pred.rows() != 5 * n_nodes)
    throw std::invalid_argument("weighted_mse: shape mismatch");
  GroupSpan spans[4];
  int count = 0;
  group_spans(n_nodes, w, spans, count);
  double total = 0.0;
  for (int i = 0; i < count; ++i) {
    const auto d = pred.middleRows(spans[i].row0, spans[i].rows) -
                   target.middleRows(spans[i].row0, spans[i].rows);
    total += spans[i].weight * d.squaredNorm() / static_cast<double>(d.size());
  }
  return total;
}

Eigen::MatrixXd weighted_mse_grad(const Eigen::MatrixXd& pred, const Eigen::MatrixXd& target,
                                  int n_nodes, const GroupWeights& w) {
  GroupSpan spans[4];
  int count = 0;
  group_spans(n_nodes, w, spans, count);
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(pred.rows(), pred.cols());
  for (int i = 0; i < count; ++i) {
    const double c = 2.0 * spans[i].weight /
                     static_cast<double>(spans[i].rows * pred.cols());
    grad.middleRows(spans[i].row0, spans[i].rows) =
        c * (pred.middleRows(spans[i].row0, spans[i].rows) -
             target.middleRows(spans[i].row0, spans[i].rows));
  }
  return grad;
}

void TrainConfig::validate() const {
  if (!(beta1 > 0 && beta1 < 1 && beta2 > 0 && beta2 < 1))
    throw std::invalid_argument("TrainConfig: betas must lie in (0, 1)");
  if (learning_rate <= 0 || epochs < 1 || batch_size < 1)
    throw std::invalid_argument("TrainConfig: bad learning rate / epochs / batch size");
}

void adam_step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, AdamState& state, int t,
               const TrainConfig& cfg) {
  if (t < 1) throw std::invalid_argument("adam_step: t must be >= 1");
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * grad;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
  const double mc = 1.0 - std::pow(cfg.beta1, t);
  const double vc = 1.0 - std::pow(cfg.beta2, t);
  params.array() -= cfg.learning_rate * (state.m.array() / mc) /
                    ((state.v.array() / vc).sqrt() + cfg.epsilon_hat);
}

}  // namespace mpr::net
