#include "idrm/trainer.hpp"

#include <cmath>

namespace idrm {

void AdamConfig::validate() const {
  if (!(learning_rate > 0)) throw ConfigError("Adam: learning_rate must be > 0");
  if (!(beta1 >= 0 && beta1 < 1)) throw ConfigError("Adam: beta1 must lie in [0,1)");
  if (!(beta2 >= 0 && beta2 < 1)) throw ConfigError("Adam: beta2 must lie in [0,1)");
  if (!(epsilon > 0)) throw ConfigError("Adam: epsilon must be > 0");
  if (max_steps < 1) throw ConfigError("Adam: max_steps must be >= 1");
  if (grad_clip && !(*grad_clip > 0))
    throw ConfigError("Adam: grad_clip must be > 0 when set");
}

void adam_step(MlpNet& net, const Eigen::VectorXd& grad, AdamState& state,
               const AdamConfig& cfg) {
  if (grad.size() != net.param_count() || state.m.size() != grad.size() ||
      state.v.size() != grad.size())
    throw ConfigError("adam_step: gradient/moment size mismatch");
  if (!grad.allFinite())
    throw NumericError("adam_step: non-finite gradient entry");

  Eigen::VectorXd g = grad;
  if (cfg.train_output_layer_only)
    g.head(net.output_layer_offset()).setZero();
  if (cfg.grad_clip) {
    const double norm = g.norm();
    if (norm > *cfg.grad_clip) g *= *cfg.grad_clip / norm;
  }

  state.step += 1;
  state.m = cfg.beta1 * state.m + (1.0 - cfg.beta1) * g;
  state.v = cfg.beta2 * state.v + (1.0 - cfg.beta2) * g.cwiseProduct(g);
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));

  Eigen::VectorXd theta = net.flatten();
  theta -= (cfg.learning_rate * (state.m / bc1).array() /
            ((state.v / bc2).array().sqrt() + cfg.epsilon))
               .matrix();
  net.unflatten(theta);
  if (cfg.project_param_bound && net.arch().param_bound)
    net.clamp_params(*net.arch().param_bound);
}

TrainTrace minimize(const LossClosure& loss, MlpNet& net, const AdamConfig& cfg) {
  cfg.validate();
  TrainTrace trace;
  trace.steps.reserve(cfg.max_steps);
  AdamState state = AdamState::zero(net.param_count());
  Eigen::VectorXd grad(net.param_count());

  Eigen::VectorXd last_good = net.flatten();
  double last_loss = 0;
  for (long s = 0; s < cfg.max_steps; ++s) {
    double value;
    try {
      value = loss(net, &grad);
    } catch (const NumericError& e) {
      if (s == 0) throw;
      net.unflatten(last_good);
      trace.nan_truncated = true;
      trace.final_loss = last_loss;
      return trace;
    }
    if (!std::isfinite(value)) {
      if (s == 0)
        throw NumericError("minimize: non-finite loss at step 0 (bad warm start)");
      net.unflatten(last_good);
      trace.nan_truncated = true;
      trace.final_loss = last_loss;
      return trace;
    }
    if (!grad.allFinite()) {
      if (s == 0) throw NumericError("minimize: non-finite gradient at step 0");
      net.unflatten(last_good);
      trace.nan_truncated = true;
      trace.final_loss = last_loss;
      return trace;
    }
    trace.steps.push_back({s, value, grad.norm()});
    last_good = net.flatten();
    last_loss = value;
    adam_step(net, grad, state, cfg);
    if (!net.params_finite()) {
      net.unflatten(last_good);
      trace.nan_truncated = true;
      trace.final_loss = last_loss;
      return trace;
    }
  }
  trace.final_loss = loss(net, nullptr);
  if (!std::isfinite(trace.final_loss)) {
    net.unflatten(last_good);
    trace.nan_truncated = true;
    trace.final_loss = last_loss;
  }
  return trace;
}

}  // namespace idrm
