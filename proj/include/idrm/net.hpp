#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "idrm/errors.hpp"

namespace idrm {

// Architecture of a tanh feedforward network: input_dim -> layer_widths...
// -> output_dim, hyperbolic tangent on every hidden layer, affine output.
struct NetArch {
  int input_dim = 1;
  std::vector<int> layer_widths;  // hidden widths, at least one entry
  int output_dim = 1;
  std::optional<double> param_bound;  // |theta_i| <= B when engaged

  void validate() const;
  // Layer sizes including input and output: [input_dim, widths..., output_dim].
  std::vector<int> dims() const;
  int n_affine() const { return static_cast<int>(layer_widths.size()) + 1; }
  bool operator==(const NetArch& o) const {
    return input_dim == o.input_dim && layer_widths == o.layer_widths &&
           output_dim == o.output_dim && param_bound == o.param_bound;
  }
};

// Network evaluation at a point: value u(x) and the exact spatial Jacobian,
// grad(j, i) = du_j / dx_i.
struct EvalResult {
  Eigen::VectorXd value;
  Eigen::MatrixXd grad;
};

// Second-order evaluation: additionally hess.row(j) holds the full Hessian of
// component j, flattened row-major (d*d entries).
struct EvalResult2 {
  Eigen::VectorXd value;
  Eigen::MatrixXd grad;
  Eigen::MatrixXd hess;
};

// Seed sensitivities of a scalar functional with respect to one evaluation:
// dval(j) = dF/du_j, dgrad(j, i) = dF/d(du_j/dx_i).
struct Seeds {
  Eigen::VectorXd dval;
  Eigen::MatrixXd dgrad;
};

// Flat gradient over the network parameters, in the canonical flattening
// order (per affine layer: weights row-major, then bias).
using ParamGradient = Eigen::VectorXd;

// Forward-pass storage reused by the reverse passes. One instance per thread.
struct Workspace {
  std::vector<Eigen::VectorXd> y;  // post-activation values per layer
  std::vector<Eigen::MatrixXd> M;  // pre-activation spatial Jacobians
  std::vector<Eigen::MatrixXd> J;  // post-activation spatial Jacobians
  // Second-order extensions (filled by eval_with_hessian only):
  std::vector<Eigen::MatrixXd> T;  // pre-activation Hessians, N x d*d
  std::vector<Eigen::MatrixXd> H;  // post-activation Hessians, N x d*d
  // Reverse-pass scratch:
  Eigen::VectorXd ybar, zbar, sbar;
  Eigen::MatrixXd Jbar, Mbar, Hbar, Tbar;
};

// Tanh MLP with dense weights. Parameters flatten in a canonical order:
// for each affine layer l = 1..L, weight matrix A_l row-major, then bias b_l.
// Warm-start serialization and all parameter gradients use this layout.
class MlpNet {
 public:
  MlpNet() = default;
  explicit MlpNet(NetArch arch);  // all parameters zero

  // Glorot-uniform weights, zero biases, deterministic in the seed.
  static MlpNet glorot(NetArch arch, uint64_t seed);

  const NetArch& arch() const { return arch_; }
  int n_affine() const { return static_cast<int>(weights_.size()); }
  const Eigen::MatrixXd& weight(int l) const { return weights_[l]; }
  Eigen::MatrixXd& weight(int l) { return weights_[l]; }
  const Eigen::VectorXd& bias(int l) const { return biases_[l]; }
  Eigen::VectorXd& bias(int l) { return biases_[l]; }

  int param_count() const { return n_params_; }
  Eigen::VectorXd flatten() const;
  void unflatten(const Eigen::VectorXd& theta);
  // Offset of layer l's block in the flat layout (weights, then bias).
  int layer_offset(int l) const { return offsets_[l]; }
  // First flat index of the output layer's block.
  int output_layer_offset() const { return offsets_[n_affine() - 1]; }

  void clamp_params(double bound);
  bool params_finite() const;

 private:
  NetArch arch_;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
  std::vector<int> offsets_;
  int n_params_ = 0;
};

// Forward-mode evaluation: value and exact spatial Jacobian.
EvalResult eval_with_grad(const MlpNet& net, const Eigen::VectorXd& x);
EvalResult eval_with_grad(const MlpNet& net, const Eigen::VectorXd& x,
                          Workspace& ws);

// Forward-mode evaluation including exact full Hessians per component.
EvalResult2 eval_with_hessian(const MlpNet& net, const Eigen::VectorXd& x);
EvalResult2 eval_with_hessian(const MlpNet& net, const Eigen::VectorXd& x,
                              Workspace& ws);

// Reverse pass through the (value, spatial-gradient) computation recorded in
// ws. Accumulates dF/dtheta into grad_accum (flat canonical layout) given the
// seeds dF/dvalue and dF/dgrad. Includes the mixed d2u/(dtheta dx) terms.
void backprop_params(const MlpNet& net, Workspace& ws,
                     const Eigen::VectorXd& dval, const Eigen::MatrixXd& dgrad,
                     Eigen::VectorXd& grad_accum);

// Reverse pass through the second-order computation recorded by
// eval_with_hessian; dhess(j, :) seeds the flattened Hessian of component j.
void backprop_params2(const MlpNet& net, Workspace& ws,
                      const Eigen::VectorXd& dval, const Eigen::MatrixXd& dgrad,
                      const Eigen::MatrixXd& dhess, Eigen::VectorXd& grad_accum);

// Gradient of F = sum_i term_value(i, eval_i) with respect to the network
// parameters, where term_seeds supplies dF/d(eval_i). Exact via reverse mode;
// throws NumericError naming the point index when an evaluation turns
// non-finite. Reduction over points is deterministic (fixed chunk order).
ParamGradient param_grad_of_functional(
    const MlpNet& net, const std::vector<Eigen::VectorXd>& points,
    const std::function<double(long, const EvalResult&)>& term_value,
    const std::function<Seeds(long, const EvalResult&)>& term_seeds);

// Curl of a 3->3 potential network: value = curl(psi)(x) and grad = the
// spatial Jacobian of the curl (from exact second derivatives of psi).
EvalResult curl_field(const MlpNet& potential, const Eigen::VectorXd& x);
EvalResult curl_field(const MlpNet& potential, const Eigen::VectorXd& x,
                      Workspace& ws);

// Maps seeds on (curl value, curl Jacobian) to seeds on the potential's
// (Jacobian, Hessian) stack; used to train curl-ansatz fields.
void curl_seeds_to_potential(const Eigen::VectorXd& dval,
                             const Eigen::MatrixXd& dgrad,
                             Eigen::MatrixXd& dpsi_grad,
                             Eigen::MatrixXd& dpsi_hess);

// Bit-exact binary serialization (arch + flat parameters, little endian).
void save_net(const MlpNet& net, const std::string& path);
MlpNet load_net(const std::string& path);

}  // namespace idrm
