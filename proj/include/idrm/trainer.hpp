#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

#include "idrm/net.hpp"

namespace idrm {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_steps = 500;
  std::optional<double> grad_clip;  // global-norm clip
  // Project |theta_i| <= arch.param_bound after each step (realizes the
  // bounded class literally; off by default).
  bool project_param_bound = false;
  // Restrict updates to the final affine layer; the net is then linear in
  // its trainable parameters.
  bool train_output_layer_only = false;

  void validate() const;
};

struct AdamState {
  Eigen::VectorXd m, v;
  long step = 0;

  static AdamState zero(int n) {
    AdamState s;
    s.m = Eigen::VectorXd::Zero(n);
    s.v = Eigen::VectorXd::Zero(n);
    return s;
  }
};

// One bias-corrected Adam update in the canonical parameter order. Throws
// NumericError on a non-finite gradient entry without touching the net.
void adam_step(MlpNet& net, const Eigen::VectorXd& grad, AdamState& state,
               const AdamConfig& cfg);

struct TrainStep {
  long step;
  double loss;
  double grad_norm;
};

struct TrainTrace {
  std::vector<TrainStep> steps;
  bool nan_truncated = false;
  double final_loss = 0;
};

// Loss closure: returns the loss at the current parameters and, when grad is
// non-null, fills the exact parameter gradient.
using LossClosure = std::function<double(const MlpNet&, Eigen::VectorXd* grad)>;

// Runs at most cfg.max_steps Adam steps from the warm start in `net`
// (updated in place). A non-finite loss at step 0 is an error; a non-finite
// loss or overflowed update mid-run truncates the trace at the last finite
// step and flags it. Never leaves non-finite parameters in `net`.
TrainTrace minimize(const LossClosure& loss, MlpNet& net, const AdamConfig& cfg);

}  // namespace idrm
