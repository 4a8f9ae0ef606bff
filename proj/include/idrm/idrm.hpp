#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "idrm/loss.hpp"
#include "idrm/trainer.hpp"

namespace idrm {

// Step-size schedule exponents
//   alpha = -(rho^2(rho-1) - p^2(p-1)) / (p rho [p(p-1) - (rho-1)^2])
//   beta  = (p-1)(rho^2 - p(rho-1)) / (rho (p(p-1) - (rho-1)^2)).
// rate_condition_ok records whether the preasymptotic-rate regime applies
// (p = rho = 2, or 0 < p(p-1) - (rho-1)^2 < 1, strict); the solver runs
// regardless, only the rate guarantee is flagged absent.
struct Exponents {
  double alpha = 0;
  double beta = 0;
  bool rate_condition_ok = false;
};

// Throws ConfigError when p(p-1) = (rho-1)^2 makes the formulas degenerate
// (alpha must then be given explicitly).
Exponents compute_exponents(double p, double rho);

struct IdrmConfig {
  double lambda0 = 1.0;
  double c_s = 1.0;        // step-size scale of the schedule
  bool alpha_auto = false; // compute alpha from (p, rho)
  double alpha = 0.0;      // constant lambda by default
  double mu = 0.0;
  // Stop once phi_star <= eps_tol. 0 disables early stopping (the penalized
  // minimizer can legitimately clamp phi_star to 0 mid-run while the
  // boundary misfit is still being traded against the interior terms).
  double eps_tol = 0.0;
  int outer_loops = 8;
  double sigma0 = 100.0;
  double sigma_growth = 1.0;  // sigma_{k+1} = growth * sigma_k
  bool resample_every_outer = true;
  bool antithetic_t = true;

  void validate() const;
};

struct OuterSummary {
  int k = 0;
  double lambda_k = 0;
  double sigma_k = 0;
  double phi_star = 0;
  double initial_total = 0;
  double initial_interior = 0;  // exactly 0 by zero-increment annihilation
  double final_total = 0;
  LossBreakdown final_breakdown;
  bool plateau = false;
  long inner_steps = 0;
};

// Outer-iteration state: frozen anchor u_k, current step size and penalty,
// last dual-potential estimate.
struct IdrmState {
  int k = 0;
  FieldPtr anchor;
  double lambda_k = 1.0;
  double sigma_k = 0.0;
  double phi_star = 0.0;
  std::vector<OuterSummary> history;
};

// lambda update: unchanged when alpha == 0; c_s * phi_star^alpha otherwise.
// phi_star == 0 with alpha != 0 would blow up the power rule, so lambda is
// left unchanged and the plateau flag set.
double update_lambda(const IdrmState& state, const IdrmConfig& cfg,
                     bool* plateau = nullptr);

// Supplies the quadrature per outer loop (and a derived evaluation
// quadrature for the dual-potential estimate when resampling).
struct BatchProvider {
  std::function<LossQuadrature(int k)> train;
  std::function<LossQuadrature(int k)> eval;
};

BatchProvider mc_provider(const Domain& domain, long n_interior, long n_boundary,
                          uint64_t seed, bool resample_every_outer,
                          bool antithetic_t);

// Tensor-grid provider (3-d problems). Boundary points are face-centered
// cell grids; faces listed in inset_faces are enforced on a plane offset
// h/2 into the interior (for boundary data singular on that face).
BatchProvider grid_provider(const Domain& domain, double h, bool midpoint,
                            const std::vector<std::pair<int, int>>& inset_faces = {});

struct IdrmRunResult {
  std::vector<OuterSummary> history;
  MlpNet final_net;
  bool curl_ansatz = false;
  // Inner trajectory with global step indices (for the run CSV).
  std::vector<TrainStep> trajectory;
  bool aborted_nan = false;
  double lambda_final = 0;
};

// Pluggable inner minimizer; defaults to Adam (trainer::minimize). The
// convex-shadow tests inject an exact linear solver here.
using InnerSolver =
    std::function<TrainTrace(const LossClosure&, MlpNet&, const AdamConfig&)>;

// Invoked after each outer loop with the summary and the current net.
using LoopObserver = std::function<void(const OuterSummary&, const MlpNet&)>;

// Algorithm: freeze anchor u_k, (re)sample, minimize the sigma-penalized
// surrogate warm-started from u_k, estimate phi_star, update lambda and
// sigma; stop after outer_loops or once phi_star <= eps_tol.
IdrmRunResult run_idrm(const ProblemSpec& spec, const MlpNet& net0,
                       const IdrmConfig& cfg, const AdamConfig& adam,
                       const BatchProvider& batches,
                       const InnerSolver& solver = {},
                       const LoopObserver& observer = {});

// Backward-Euler marching: n_steps steps of size T/n_steps, each level's
// problem built by the family from (dt, t_next, previous field) and solved by
// run_idrm warm-started from the previous level's net. Level 0 anchors on the
// analytic initial state u0.
struct TimeMarchResult {
  std::vector<IdrmRunResult> levels;
  std::vector<double> times;  // t_{k+1} per level
};

using StepFamily =
    std::function<ProblemSpec(double dt, double t_next, FieldPtr u_prev)>;

TimeMarchResult run_time_marching(const StepFamily& family, FieldPtr u0,
                                  double T, int n_steps, const MlpNet& net0,
                                  const IdrmConfig& cfg, const AdamConfig& adam,
                                  long n_interior, long n_boundary,
                                  uint64_t seed);

// The quasilinear heat benchmark instanced through the step family above.
TimeMarchResult run_time_marching(double T, int n_steps, const MlpNet& net0,
                                  const IdrmConfig& cfg, const AdamConfig& adam,
                                  long n_interior, long n_boundary,
                                  uint64_t seed);

}  // namespace idrm
