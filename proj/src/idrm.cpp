#include "idrm/idrm.hpp"

#include <algorithm>
#include <cmath>

namespace idrm {

Exponents compute_exponents(double p, double rho) {
  const double D = p * (p - 1.0) - (rho - 1.0) * (rho - 1.0);
  if (std::abs(D) <= 1e-12)
    throw ConfigError(
        "compute_exponents: p(p-1) = (rho-1)^2 makes the rate formulas "
        "degenerate for p = " +
        std::to_string(p) + ", rho = " + std::to_string(rho) +
        "; alpha must be given explicitly");
  Exponents e;
  e.alpha = -(rho * rho * (rho - 1.0) - p * p * (p - 1.0)) / (p * rho * D);
  e.beta = (p - 1.0) * (rho * rho - p * (rho - 1.0)) / (rho * D);
  if (e.alpha == 0.0) e.alpha = 0.0;  // normalize -0
  e.rate_condition_ok = (p == 2.0 && rho == 2.0) || (D > 0.0 && D < 1.0);
  return e;
}

void IdrmConfig::validate() const {
  if (!(lambda0 > 0)) throw ConfigError("IdrmConfig: lambda0 must be > 0");
  if (!(c_s > 0)) throw ConfigError("IdrmConfig: c_s must be > 0");
  if (mu < 0) throw ConfigError("IdrmConfig: mu must be >= 0");
  if (!(eps_tol >= 0)) throw ConfigError("IdrmConfig: eps_tol must be >= 0");
  if (outer_loops < 1) throw ConfigError("IdrmConfig: outer_loops must be >= 1");
  if (sigma0 < 0) throw ConfigError("IdrmConfig: sigma0 must be >= 0");
  if (!(sigma_growth >= 1.0))
    throw ConfigError("IdrmConfig: sigma_growth must be >= 1");
}

double update_lambda(const IdrmState& state, const IdrmConfig& cfg, bool* plateau) {
  if (plateau) *plateau = false;
  const double alpha = cfg.alpha;
  if (alpha == 0.0) return state.lambda_k;
  if (state.phi_star == 0.0) {
    if (plateau) *plateau = true;
    return state.lambda_k;
  }
  return cfg.c_s * std::pow(state.phi_star, alpha);
}

BatchProvider mc_provider(const Domain& domain, long n_interior, long n_boundary,
                          uint64_t seed, bool resample_every_outer,
                          bool antithetic_t) {
  auto make = [=](std::string_view tag, int k) {
    return loss_quadrature(
        sample_batch(domain, n_interior, n_boundary, derive_seed(seed, tag, k)),
        antithetic_t);
  };
  BatchProvider p;
  if (resample_every_outer) {
    p.train = [make](int k) { return make("batch", k); };
    p.eval = [make](int k) { return make("phi-eval", k); };
  } else {
    p.train = [make](int) { return make("batch", 0); };
    p.eval = p.train;
  }
  return p;
}

BatchProvider grid_provider(const Domain& domain, double h, bool midpoint,
                            const std::vector<std::pair<int, int>>& inset_faces) {
  const int d = domain.dim();
  if (d < 2) throw ConfigError("grid_provider: needs dim >= 2 for face grids");
  const GridQuad interior =
      midpoint ? grid_quad_midpoint(domain, h) : grid_quad(domain, h);

  // Face-centered boundary grids, one cell-centered grid per face; inset
  // faces are shifted h/2 into the interior.
  std::vector<Eigen::VectorXd> pts;
  std::vector<double> wts;
  for (int axis = 0; axis < d; ++axis) {
    for (int side = 0; side < 2; ++side) {
      const bool inset = std::find(inset_faces.begin(), inset_faces.end(),
                                   std::make_pair(axis, side)) != inset_faces.end();
      Domain face;
      face.lower.resize(d - 1);
      face.upper.resize(d - 1);
      int j = 0;
      for (int i = 0; i < d; ++i) {
        if (i == axis) continue;
        face.lower[j] = domain.lower[i];
        face.upper[j] = domain.upper[i];
        ++j;
      }
      const GridQuad fq = grid_quad_midpoint(face, h);
      Eigen::VectorXd fx;
      double fw;
      double coord = side == 0 ? domain.lower[axis] : domain.upper[axis];
      if (inset) coord += (side == 0 ? h / 2.0 : -h / 2.0);
      for (long i = 0; i < fq.size(); ++i) {
        fq.node(i, fx, fw);
        Eigen::VectorXd x(d);
        int jj = 0;
        for (int a = 0; a < d; ++a) x[a] = a == axis ? coord : fx[jj++];
        pts.push_back(x);
        wts.push_back(fw);
      }
    }
  }
  Eigen::MatrixXd bx(static_cast<long>(pts.size()), d);
  Eigen::VectorXd bw(static_cast<long>(pts.size()));
  for (size_t i = 0; i < pts.size(); ++i) {
    bx.row(static_cast<long>(i)) = pts[i].transpose();
    bw[static_cast<long>(i)] = wts[i];
  }
  const LossQuadrature quad = loss_quadrature(interior, bx, bw);
  BatchProvider p;
  p.train = [quad](int) { return quad; };
  p.eval = [quad](int) { return quad; };
  return p;
}

namespace {

FieldPtr freeze(const MlpNet& net, bool curl) {
  if (curl) return std::make_shared<CurlMlpField>(net);
  return std::make_shared<MlpField>(net);
}

}  // namespace

IdrmRunResult run_idrm(const ProblemSpec& spec, const MlpNet& net0,
                       const IdrmConfig& cfg, const AdamConfig& adam,
                       const BatchProvider& batches, const InnerSolver& solver,
                       const LoopObserver& observer) {
  spec.validate();
  cfg.validate();
  adam.validate();

  IdrmConfig rcfg = cfg;
  if (cfg.alpha_auto)
    rcfg.alpha = compute_exponents(spec.p_exponent, spec.rho_exponent).alpha;

  const bool curl = spec.n_components == 3;
  if (curl) {
    if (net0.arch().input_dim != 3 || net0.arch().output_dim != 3)
      throw ConfigError(
          "run_idrm: 3-component problems use the divergence-free curl "
          "ansatz; the net must be a 3 -> 3 potential");
  } else {
    if (net0.arch().input_dim != spec.domain.dim() ||
        net0.arch().output_dim != spec.n_components)
      throw ConfigError("run_idrm: net arch " +
                        std::to_string(net0.arch().input_dim) + " -> " +
                        std::to_string(net0.arch().output_dim) +
                        " does not match problem (" +
                        std::to_string(spec.domain.dim()) + " -> " +
                        std::to_string(spec.n_components) + ")");
  }

  IdrmRunResult result;
  result.curl_ansatz = curl;
  MlpNet net = net0;

  IdrmState state;
  state.lambda_k = rcfg.lambda0;
  state.sigma_k = rcfg.sigma0;

  const InnerSolver run_inner =
      solver ? solver
             : InnerSolver([](const LossClosure& f, MlpNet& n, const AdamConfig& a) {
                 return minimize(f, n, a);
               });

  long global_step = 0;
  for (int k = 0; k < rcfg.outer_loops; ++k) {
    state.k = k;
    state.anchor = freeze(net, curl);
    const LossQuadrature quad = batches.train(k);

    SurrogateConfig scfg;
    scfg.lambda_k = state.lambda_k;
    scfg.mu = rcfg.mu;
    scfg.sigma = state.sigma_k;
    scfg.p_exponent = spec.p_exponent;
    scfg.antithetic_t = rcfg.antithetic_t;

    OuterSummary summary;
    summary.k = k;
    summary.lambda_k = state.lambda_k;
    summary.sigma_k = state.sigma_k;

    {
      const LossBreakdown bd0 =
          surrogate_loss(spec, *state.anchor, *freeze(net, curl), scfg, quad);
      summary.initial_total = bd0.total;
      summary.initial_interior = bd0.total - bd0.boundary_term;
    }

    const FieldPtr anchor = state.anchor;
    LossClosure closure = [&spec, anchor, curl, scfg, &quad](
                              const MlpNet& n, Eigen::VectorXd* grad) {
      if (!grad)
        return surrogate_loss(spec, *anchor, *freeze(n, curl), scfg, quad).total;
      return surrogate_loss_grad(spec, *anchor, n, curl, scfg, quad, *grad).total;
    };

    TrainTrace trace = run_inner(closure, net, adam);
    summary.inner_steps = static_cast<long>(trace.steps.size());
    for (const auto& s : trace.steps)
      result.trajectory.push_back({global_step + s.step, s.loss, s.grad_norm});
    global_step += summary.inner_steps;

    // Dual-potential estimate on the evaluation quadrature (fresh batch when
    // resampling, interior terms only).
    const LossQuadrature eval_quad = batches.eval(k);
    const LossBreakdown bd =
        surrogate_loss(spec, *state.anchor, *freeze(net, curl), scfg, eval_quad);
    summary.final_breakdown = bd;
    summary.final_total = trace.steps.empty() ? bd.total : trace.final_loss;
    state.phi_star = dual_potential_estimate(bd);
    summary.phi_star = state.phi_star;

    if (trace.nan_truncated) {
      result.aborted_nan = true;
      state.history.push_back(summary);
      if (observer) observer(state.history.back(), net);
      break;
    }

    bool plateau = false;
    const double next_lambda = update_lambda(state, rcfg, &plateau);
    summary.plateau = plateau;
    state.history.push_back(summary);
    if (observer) observer(state.history.back(), net);

    if (rcfg.eps_tol > 0 && state.phi_star <= rcfg.eps_tol) break;
    state.lambda_k = next_lambda;
    state.sigma_k *= rcfg.sigma_growth;
  }

  result.history = state.history;
  result.final_net = net;
  result.lambda_final = state.lambda_k;
  return result;
}

TimeMarchResult run_time_marching(const StepFamily& family, FieldPtr u0,
                                  double T, int n_steps, const MlpNet& net0,
                                  const IdrmConfig& cfg, const AdamConfig& adam,
                                  long n_interior, long n_boundary,
                                  uint64_t seed) {
  if (!(T > 0)) throw ConfigError("run_time_marching: T must be > 0");
  if (n_steps < 1) throw ConfigError("run_time_marching: n_steps must be >= 1");
  if (!u0) throw ConfigError("run_time_marching: analytic initial state required");
  const double dt = T / static_cast<double>(n_steps);

  TimeMarchResult out;
  FieldPtr u_prev = u0;
  MlpNet net = net0;
  for (int k = 0; k < n_steps; ++k) {
    const double t_next = dt * static_cast<double>(k + 1);
    const ProblemSpec spec = family(dt, t_next, u_prev);
    const BatchProvider batches =
        mc_provider(spec.domain, n_interior, n_boundary,
                    derive_seed(seed, "level", k), cfg.resample_every_outer,
                    cfg.antithetic_t);
    IdrmRunResult res;
    try {
      res = run_idrm(spec, net, cfg, adam, batches);
    } catch (const NumericError& e) {
      throw NumericError(std::string(e.what()) + " (time level " +
                             std::to_string(k + 1) + ", t = " +
                             std::to_string(t_next) + ")",
                         e.point_index);
    }
    net = res.final_net;
    u_prev = std::make_shared<MlpField>(net);
    out.levels.push_back(std::move(res));
    out.times.push_back(t_next);
  }
  return out;
}

TimeMarchResult run_time_marching(double T, int n_steps, const MlpNet& net0,
                                  const IdrmConfig& cfg, const AdamConfig& adam,
                                  long n_interior, long n_boundary,
                                  uint64_t seed) {
  return run_time_marching(
      [](double dt, double t_next, FieldPtr u_prev) {
        return make_quasilinear_step(dt, t_next, u_prev);
      },
      quasilinear_exact_field(0.0), T, n_steps, net0, cfg, adam, n_interior,
      n_boundary, seed);
}

}  // namespace idrm
