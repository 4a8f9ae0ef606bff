#pragma once

#include <Eigen/Dense>

#include "idrm/field.hpp"
#include "idrm/problem.hpp"
#include "idrm/quadrature.hpp"

namespace idrm {

// Parameters of the per-iteration surrogate loss: step size lambda_k,
// convexity weight mu, boundary penalty sigma and the W^{1,p} exponent of
// the penalty norm.
struct SurrogateConfig {
  double lambda_k = 1.0;
  double mu = 0.0;
  double sigma = 0.0;
  double p_exponent = 2.0;
  // Pair each t-sample with 1 - t in the I1 estimator. Unbiased for the same
  // population loss, lower variance, and it makes the Ritz-difference
  // identity exact on shared batches for pairings linear in the state.
  bool antithetic_t = true;
};

// Raw term sums and the assembled total:
//   total = lambda*i1 + mu*lambda^2*max(i2, 0)^(2/p) + lambda*i3 + boundary,
// where i1/i2/i3 are the weighted interior sums and boundary_term already
// carries its sigma factor. (The i2 clamp only guards floating-point
// cancellation; the integrand is nonnegative.)
struct LossBreakdown {
  double i1_term = 0;
  double i2_term = 0;
  double i3_term = 0;
  double boundary_term = 0;
  double total = 0;
};

// Quadrature data the losses consume. Interior weights sum to |Omega|,
// boundary weights to |dOmega|. Each interior point carries a pair of
// t-nodes whose average estimates the auxiliary integral over (0,1):
// Monte Carlo uses (t, 1-t) (or a duplicated node when antithetic_t is off),
// tensor grids use the 2-point Gauss rule.
struct LossQuadrature {
  Eigen::MatrixXd interior_x;
  Eigen::VectorXd interior_w;
  Eigen::VectorXd t1, t2;
  Eigen::MatrixXd boundary_x;
  Eigen::VectorXd boundary_w;
};

LossQuadrature loss_quadrature(const SampleBatch& batch, bool antithetic_t);
// Grid variant: interior from `interior`, boundary points with weights
// supplied explicitly (face grids).
LossQuadrature loss_quadrature(const GridQuad& interior,
                               const Eigen::MatrixXd& boundary_x,
                               const Eigen::VectorXd& boundary_w);

// Empirical surrogate loss of `candidate` anchored at `anchor`:
//   lambda * sum_w I1 + mu*lambda^2 * (sum_w I2)^(2/p) + lambda * sum_w I3
//     + sigma * sum_b |u - g|^2,
// with I1 = P(x, t*lambda*w, .; w, .), I2 = |w|^p + |grad w|^p,
// I3 = P(x, u_k, .; w, .) - (f0.w + f1 : grad w), w = candidate - anchor.
// Interior terms vanish exactly (bit-zero) when candidate == anchor.
LossBreakdown surrogate_loss(const ProblemSpec& spec, const Field& anchor,
                             const Field& candidate, const SurrogateConfig& cfg,
                             const LossQuadrature& quad);
LossBreakdown surrogate_loss(const ProblemSpec& spec, const Field& anchor,
                             const Field& candidate, const SurrogateConfig& cfg,
                             const SampleBatch& batch);

// Loss plus its exact gradient with respect to the network parameters.
// When curl_ansatz is set the trained field is curl(net) (net: 3 -> 3).
LossBreakdown surrogate_loss_grad(const ProblemSpec& spec, const Field& anchor,
                                  const MlpNet& net, bool curl_ansatz,
                                  const SurrogateConfig& cfg,
                                  const LossQuadrature& quad,
                                  Eigen::VectorXd& grad);

// PINN baseline: sum_w r(x, u, grad u, hess u)^2 + sigma * sum_b |u - g|^2.
// Requires spec.strong; non-finite residuals surface as NumericError with the
// point index (the regularity failure mode of strong-form losses).
double pinn_loss(const ProblemSpec& spec, const MlpNet& net,
                 const LossQuadrature& quad, double sigma);
double pinn_loss(const ProblemSpec& spec, const MlpNet& net,
                 const SampleBatch& batch, double sigma);
double pinn_loss_grad(const ProblemSpec& spec, const MlpNet& net,
                      const LossQuadrature& quad, double sigma,
                      Eigen::VectorXd& grad);

// Estimate of the dual potential Phi*_mu(f - A(u_k)) = -min L^k from the
// finished inner minimization; interior terms only, clamped at zero.
double dual_potential_estimate(const LossBreakdown& last_inner_loss);

}  // namespace idrm
