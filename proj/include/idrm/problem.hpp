#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "idrm/dual.hpp"
#include "idrm/field.hpp"
#include "idrm/quadrature.hpp"

namespace idrm {

// One slot of the duality pairing: m value components and an m x d gradient
// (row-major, entry c*d + k holds du_c/dx_k), all as dual scalars.
struct AdSlot {
  const Ad* val;
  const Ad* grad;
  int m;
  int d;
  const Ad& g(int c, int k) const { return grad[c * d + k]; }
};

// Integrand density of <test, A(state)> at a point. Linear in the test slot.
using PairingFn =
    std::function<Ad(const Eigen::VectorXd& x, const AdSlot& state, const AdSlot& test)>;

struct Regularization {
  double delta = 0.01;  // finite-difference step for p < 2 pairings
};

// Strong-form residual r(x, u, grad u, Hessian u) and its derivative seeds,
// for scalar problems only (PINN baseline).
struct StrongForm {
  std::function<double(const Eigen::VectorXd& x, double u, const Eigen::VectorXd& g,
                       const Eigen::MatrixXd& H)>
      residual;
  std::function<void(const Eigen::VectorXd& x, double u, const Eigen::VectorXd& g,
                     const Eigen::MatrixXd& H, double& ru, Eigen::VectorXd& rg,
                     Eigen::MatrixXd& rH)>
      seeds;
};

// A monotone elliptic problem in weak form: pairing density, sources, boundary
// data, exponents and (optionally) the exact solution for error reporting.
struct ProblemSpec {
  std::string name;
  Domain domain;
  int n_components = 1;
  double p_exponent = 2.0;
  double rho_exponent = 2.0;
  PairingFn pairing;
  // Sources of <v, f> = int v.f0 + grad v : f1. Null means identically zero.
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> f0;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> f1;  // m x d
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> boundary_g;
  bool dirichlet = true;
  std::optional<Regularization> regularization;
  FieldPtr exact;  // u* with gradient, when known
  std::optional<StrongForm> strong;

  void validate() const;
  Eigen::VectorXd source_f0(const Eigen::VectorXd& x) const;
  Eigen::MatrixXd source_f1(const Eigen::VectorXd& x) const;
};

// Plain-double pairing evaluation; throws NumericError with the point
// location when the result is non-finite (e.g. the p < 2 singularity hit
// without regularization).
double pairing_eval(const ProblemSpec& spec, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& state_val, const Eigen::MatrixXd& state_grad,
                    const Eigen::VectorXd& test_val, const Eigen::MatrixXd& test_grad);

// Benchmark catalog. Stable CLI identifiers:
//   conv-diffusion-10d, plaplace-2.5, plaplace-1.5, quasilinear-heat-10d,
//   navier-stokes-3d.
// quasilinear-heat-10d is a family; catalog() returns the t = 0.05 first
// backward-Euler step with the analytic initial state (use
// make_quasilinear_step for other levels).
ProblemSpec catalog(const std::string& name);
std::vector<std::string> catalog_names();

ProblemSpec make_conv_diffusion_10d();
ProblemSpec make_plaplace_25();
ProblemSpec make_plaplace_15();
ProblemSpec make_quasilinear_step(double dt, double t_next, FieldPtr u_prev);
ProblemSpec make_navier_stokes_3d();

// Exact space-time solution of the quasilinear heat benchmark.
double quasilinear_exact_value(const Eigen::VectorXd& x, double t);
FieldPtr quasilinear_exact_field(double t);
// Forcing f(x, t) of the continuous parabolic problem.
double quasilinear_forcing(const Eigen::VectorXd& x, double t);

// 1-D model problem -u'' + u = f on (0,1) with u* = sin(pi x); used by the
// convex shadow tests of the outer iteration.
ProblemSpec make_linear_1d();

struct MonotonicityReport {
  double min_ratio = std::numeric_limits<double>::infinity();
  long violations = 0;
  long pairs_tested = 0;
  long skipped = 0;
};

// Estimates <u - v, A(u) - A(v)> and ||u - v||_{W^{1,p}}^rho for random net
// pairs with W^{1,p} norm estimates <= radius, on shared samples. For
// Dirichlet problems the draws are windowed by a boundary bubble so they lie
// in (an approximation of) the zero-trace space the monotonicity assumption
// concerns. Returns the minimum ratio and the count of negative pairings.
MonotonicityReport check_monotonicity(const ProblemSpec& spec, long n_pairs,
                                      const SampleBatch& quad, double radius,
                                      uint64_t seed);

// Pointwise p-Laplace vector inequalities on random (a, b) pairs:
//   continuity: | |b|^{p-2}b - |a|^{p-2}a | <= 2^{2-p} |b-a|^{p-1}
//   monotonicity: (|b|^{p-2}b - |a|^{p-2}a).(b-a)
//                   >= (p-1) |b-a|^2 (1+|a|^2+|b|^2)^{(p-2)/2}
// Returns the number of violations over n_pairs random pairs in R^dim.
long count_continuity_violations(double p, int dim, long n_pairs, uint64_t seed);
long count_monotonicity_violations(double p, int dim, long n_pairs, uint64_t seed);

}  // namespace idrm
