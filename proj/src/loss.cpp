#include "idrm/loss.hpp"

#include <cmath>

#include "idrm/dual.hpp"
#include "idrm/parallel.hpp"

namespace idrm {

namespace {

constexpr long kChunk = 256;

struct InteriorPartial {
  double s1 = 0, s2 = 0, s3 = 0;
  Eigen::VectorXd g13, g2;
};

// Per-point interior densities and their seeds with respect to the candidate
// field's (value, gradient). Slot layout of the dual width m*(1+d):
// index c for value component c, index m + c*d + k for gradient entry (c,k).
struct PointDensities {
  double i1 = 0, i2 = 0, i3 = 0;
  Eigen::VectorXd d13_val;   // seeds of i1 + i3
  Eigen::MatrixXd d13_grad;
  Eigen::VectorXd d2_val;    // seeds of i2
  Eigen::MatrixXd d2_grad;
};

void point_densities(const ProblemSpec& spec, const Eigen::VectorXd& x,
                     const EvalResult& cand, const EvalResult& anch, double t1,
                     double t2, const SurrogateConfig& cfg, bool want_seeds,
                     bool want_i2, PointDensities& out) {
  const int m = spec.n_components;
  const int d = spec.domain.dim();
  const int width = want_seeds ? m * (1 + d) : 0;
  const double lam = cfg.lambda_k;

  const Eigen::VectorXd wv = cand.value - anch.value;
  const Eigen::MatrixXd wg = cand.grad - anch.grad;

  std::vector<Ad> sv(m), tv(m), sg(m * d), tg(m * d);
  AdSlot state{sv.data(), sg.data(), m, d};
  AdSlot test{tv.data(), tg.data(), m, d};

  // I1 via the paired t-nodes; the state slot carries the scaled increment.
  Ad i1 = Ad::constant(0.0, width);
  for (double t : {t1, t2}) {
    const double s = t * lam;
    for (int c = 0; c < m; ++c) {
      sv[c] = Ad::variable(s * wv[c], width, c, s);
      tv[c] = Ad::variable(wv[c], width, c, 1.0);
      for (int k = 0; k < d; ++k) {
        sg[c * d + k] = Ad::variable(s * wg(c, k), width, m + c * d + k, s);
        tg[c * d + k] = Ad::variable(wg(c, k), width, m + c * d + k, 1.0);
      }
    }
    i1 = i1 + spec.pairing(x, state, test) * 0.5;
  }

  // I3: anchor in the state slot (constant), increment in the test slot,
  // minus the source action f0.w + f1 : grad w.
  for (int c = 0; c < m; ++c) {
    sv[c] = Ad::constant(anch.value[c], width);
    tv[c] = Ad::variable(wv[c], width, c, 1.0);
    for (int k = 0; k < d; ++k) {
      sg[c * d + k] = Ad::constant(anch.grad(c, k), width);
      tg[c * d + k] = Ad::variable(wg(c, k), width, m + c * d + k, 1.0);
    }
  }
  Ad i3 = spec.pairing(x, state, test);
  const Eigen::VectorXd f0 = spec.source_f0(x);
  const Eigen::MatrixXd f1 = spec.source_f1(x);
  for (int c = 0; c < m; ++c) {
    i3 = i3 - f0[c] * tv[c];
    for (int k = 0; k < d; ++k) i3 = i3 - f1(c, k) * tg[c * d + k];
  }

  out.i1 = i1.v;
  out.i3 = i3.v;
  if (want_seeds) {
    out.d13_val.resize(m);
    out.d13_grad.resize(m, d);
    for (int c = 0; c < m; ++c) {
      out.d13_val[c] = i1.d[c] + i3.d[c];
      for (int k = 0; k < d; ++k)
        out.d13_grad(c, k) = i1.d[m + c * d + k] + i3.d[m + c * d + k];
    }
  }

  out.i2 = 0;
  if (want_i2) {
    const double p = cfg.p_exponent;
    const double v2 = wv.squaredNorm();
    const double g2 = wg.squaredNorm();
    out.i2 = std::pow(v2, p / 2.0) + std::pow(g2, p / 2.0);
    if (want_seeds) {
      // d/dw |w|^p = p |w|^(p-2) w, zero at w = 0 (p > 1).
      const double cv = v2 > 0 ? p * std::pow(v2, (p - 2.0) / 2.0) : 0.0;
      const double cg = g2 > 0 ? p * std::pow(g2, (p - 2.0) / 2.0) : 0.0;
      out.d2_val = cv * wv;
      out.d2_grad = cg * wg;
    }
  }
}

struct CurlCtx {
  bool enabled = false;
  Eigen::MatrixXd dpsi_grad, dpsi_hess;
};

// Evaluates the candidate at x, retaining the workspace for the reverse pass.
EvalResult eval_candidate(const MlpNet& net, bool curl, const Eigen::VectorXd& x,
                          Workspace& ws) {
  return curl ? curl_field(net, x, ws) : eval_with_grad(net, x, ws);
}

void backprop_candidate(const MlpNet& net, bool curl, Workspace& ws,
                        const Eigen::VectorXd& dval, const Eigen::MatrixXd& dgrad,
                        CurlCtx& ctx, Eigen::VectorXd& acc) {
  if (curl) {
    curl_seeds_to_potential(dval, dgrad, ctx.dpsi_grad, ctx.dpsi_hess);
    backprop_params2(net, ws, Eigen::VectorXd::Zero(3), ctx.dpsi_grad,
                     ctx.dpsi_hess, acc);
  } else {
    backprop_params(net, ws, dval, dgrad, acc);
  }
}

void check_finite(double v, const char* term, long i) {
  if (!std::isfinite(v))
    throw NumericError(std::string("surrogate_loss: non-finite ") + term +
                           " at interior point " + std::to_string(i),
                       i);
}

LossBreakdown assemble(const ProblemSpec& spec, const SurrogateConfig& cfg,
                       double s1, double s2, double s3, double sb) {
  LossBreakdown bd;
  bd.i1_term = s1;
  bd.i2_term = s2;
  bd.i3_term = s3;
  bd.boundary_term = cfg.sigma * sb;
  const double lam = cfg.lambda_k;
  bd.total = lam * bd.i1_term + lam * bd.i3_term + bd.boundary_term;
  if (cfg.mu != 0.0)
    bd.total += cfg.mu * lam * lam *
                std::pow(std::max(s2, 0.0), 2.0 / cfg.p_exponent);
  (void)spec;
  return bd;
}

}  // namespace

LossQuadrature loss_quadrature(const SampleBatch& batch, bool antithetic_t) {
  LossQuadrature q;
  const long n = batch.interior.rows();
  const long nb = batch.boundary.rows();
  q.interior_x = batch.interior;
  q.interior_w = Eigen::VectorXd::Constant(n, batch.volume / static_cast<double>(n));
  q.t1 = batch.t;
  q.t2 = antithetic_t ? Eigen::VectorXd(Eigen::VectorXd::Ones(n) - batch.t) : batch.t;
  q.boundary_x = batch.boundary;
  q.boundary_w =
      Eigen::VectorXd::Constant(nb, nb > 0 ? batch.surface / static_cast<double>(nb) : 0.0);
  return q;
}

LossQuadrature loss_quadrature(const GridQuad& interior,
                               const Eigen::MatrixXd& boundary_x,
                               const Eigen::VectorXd& boundary_w) {
  LossQuadrature q;
  const long n = interior.size();
  const int d = static_cast<int>(interior.axis_nodes.size());
  q.interior_x.resize(n, d);
  q.interior_w.resize(n);
  Eigen::VectorXd x;
  double w;
  for (long i = 0; i < n; ++i) {
    interior.node(i, x, w);
    q.interior_x.row(i) = x.transpose();
    q.interior_w[i] = w;
  }
  // 2-point Gauss nodes on (0,1); exact for the catalog pairings' polynomial
  // t-dependence.
  const double off = 0.5 / std::sqrt(3.0);
  q.t1 = Eigen::VectorXd::Constant(n, 0.5 - off);
  q.t2 = Eigen::VectorXd::Constant(n, 0.5 + off);
  q.boundary_x = boundary_x;
  q.boundary_w = boundary_w;
  return q;
}

LossBreakdown surrogate_loss(const ProblemSpec& spec, const Field& anchor,
                             const Field& candidate, const SurrogateConfig& cfg,
                             const LossQuadrature& quad) {
  const long n = quad.interior_x.rows();
  const bool want_i2 = cfg.mu != 0.0;
  const long nc = chunk_count(n, kChunk);
  std::vector<InteriorPartial> part(nc);
  for_chunks(n, kChunk, [&](long c, long lo, long hi) {
    PointDensities pd;
    InteriorPartial acc;
    for (long i = lo; i < hi; ++i) {
      const Eigen::VectorXd x = quad.interior_x.row(i).transpose();
      const EvalResult cand = candidate.eval(x);
      const EvalResult anch = anchor.eval(x);
      point_densities(spec, x, cand, anch, quad.t1[i], quad.t2[i], cfg, false,
                      want_i2, pd);
      check_finite(pd.i1, "I1", i);
      check_finite(pd.i3, "I3", i);
      if (want_i2) check_finite(pd.i2, "I2", i);
      const double w = quad.interior_w[i];
      acc.s1 += w * pd.i1;
      acc.s2 += w * pd.i2;
      acc.s3 += w * pd.i3;
    }
    part[c] = std::move(acc);
  });
  double s1 = 0, s2 = 0, s3 = 0;
  for (const auto& p : part) {
    s1 += p.s1;
    s2 += p.s2;
    s3 += p.s3;
  }

  double sb = 0;
  if (cfg.sigma != 0.0) {
    for (long i = 0; i < quad.boundary_x.rows(); ++i) {
      const Eigen::VectorXd x = quad.boundary_x.row(i).transpose();
      const Eigen::VectorXd u = candidate.eval(x).value;
      const Eigen::VectorXd g = spec.boundary_g ? spec.boundary_g(x)
                                                : Eigen::VectorXd::Zero(u.size());
      const double misfit = (u - g).squaredNorm();
      if (!std::isfinite(misfit))
        throw NumericError("surrogate_loss: non-finite boundary misfit at point " +
                               std::to_string(i),
                           i);
      sb += quad.boundary_w[i] * misfit;
    }
  }
  return assemble(spec, cfg, s1, s2, s3, sb);
}

LossBreakdown surrogate_loss(const ProblemSpec& spec, const Field& anchor,
                             const Field& candidate, const SurrogateConfig& cfg,
                             const SampleBatch& batch) {
  return surrogate_loss(spec, anchor, candidate, cfg,
                        loss_quadrature(batch, cfg.antithetic_t));
}

LossBreakdown surrogate_loss_grad(const ProblemSpec& spec, const Field& anchor,
                                  const MlpNet& net, bool curl_ansatz,
                                  const SurrogateConfig& cfg,
                                  const LossQuadrature& quad,
                                  Eigen::VectorXd& grad) {
  const long n = quad.interior_x.rows();
  const bool want_i2 = cfg.mu != 0.0;
  const int np = net.param_count();
  const long nc = chunk_count(n, kChunk);
  std::vector<InteriorPartial> part(nc);
  for_chunks(n, kChunk, [&](long c, long lo, long hi) {
    Workspace ws;
    CurlCtx ctx;
    ctx.enabled = curl_ansatz;
    PointDensities pd;
    InteriorPartial acc;
    acc.g13 = Eigen::VectorXd::Zero(np);
    if (want_i2) acc.g2 = Eigen::VectorXd::Zero(np);
    for (long i = lo; i < hi; ++i) {
      const Eigen::VectorXd x = quad.interior_x.row(i).transpose();
      const EvalResult cand = eval_candidate(net, curl_ansatz, x, ws);
      const EvalResult anch = anchor.eval(x);
      point_densities(spec, x, cand, anch, quad.t1[i], quad.t2[i], cfg, true,
                      want_i2, pd);
      check_finite(pd.i1, "I1", i);
      check_finite(pd.i3, "I3", i);
      const double w = quad.interior_w[i];
      acc.s1 += w * pd.i1;
      acc.s3 += w * pd.i3;
      backprop_candidate(net, curl_ansatz, ws, (w * pd.d13_val).eval(),
                         (w * pd.d13_grad).eval(), ctx, acc.g13);
      if (want_i2) {
        check_finite(pd.i2, "I2", i);
        acc.s2 += w * pd.i2;
        backprop_candidate(net, curl_ansatz, ws, (w * pd.d2_val).eval(),
                           (w * pd.d2_grad).eval(), ctx, acc.g2);
      }
    }
    part[c] = std::move(acc);
  });
  double s1 = 0, s2 = 0, s3 = 0;
  Eigen::VectorXd g13 = Eigen::VectorXd::Zero(np);
  Eigen::VectorXd g2 = Eigen::VectorXd::Zero(np);
  for (const auto& p : part) {
    s1 += p.s1;
    s2 += p.s2;
    s3 += p.s3;
    g13 += p.g13;
    if (want_i2) g2 += p.g2;
  }

  double sb = 0;
  Eigen::VectorXd gb = Eigen::VectorXd::Zero(np);
  if (cfg.sigma != 0.0 && quad.boundary_x.rows() > 0) {
    const long nb = quad.boundary_x.rows();
    const long nbc = chunk_count(nb, kChunk);
    std::vector<std::pair<double, Eigen::VectorXd>> bpart(
        nbc, {0.0, Eigen::VectorXd::Zero(np)});
    for_chunks(nb, kChunk, [&](long c, long lo, long hi) {
      Workspace ws;
      CurlCtx ctx;
      for (long i = lo; i < hi; ++i) {
        const Eigen::VectorXd x = quad.boundary_x.row(i).transpose();
        const EvalResult cand = eval_candidate(net, curl_ansatz, x, ws);
        const Eigen::VectorXd g = spec.boundary_g
                                      ? spec.boundary_g(x)
                                      : Eigen::VectorXd::Zero(cand.value.size());
        const Eigen::VectorXd diff = cand.value - g;
        const double misfit = diff.squaredNorm();
        if (!std::isfinite(misfit))
          throw NumericError(
              "surrogate_loss: non-finite boundary misfit at point " +
                  std::to_string(i),
              i);
        bpart[c].first += quad.boundary_w[i] * misfit;
        backprop_candidate(net, curl_ansatz, ws,
                           (2.0 * quad.boundary_w[i] * diff).eval(),
                           Eigen::MatrixXd::Zero(diff.size(), x.size()), ctx,
                           bpart[c].second);
      }
    });
    for (const auto& p : bpart) {
      sb += p.first;
      gb += p.second;
    }
  }

  const double lam = cfg.lambda_k;
  grad = lam * g13 + cfg.sigma * gb;
  if (want_i2 && s2 > 0.0)
    grad += cfg.mu * lam * lam * (2.0 / cfg.p_exponent) *
            std::pow(s2, 2.0 / cfg.p_exponent - 1.0) * g2;
  return assemble(spec, cfg, s1, s2, s3, sb);
}

double pinn_loss(const ProblemSpec& spec, const MlpNet& net,
                 const LossQuadrature& quad, double sigma) {
  if (!spec.strong)
    throw ConfigError(spec.name + ": no strong form available for PINN");
  const int d = spec.domain.dim();
  double interior = 0;
  Workspace ws;
  for (long i = 0; i < quad.interior_x.rows(); ++i) {
    const Eigen::VectorXd x = quad.interior_x.row(i).transpose();
    const EvalResult2 e = eval_with_hessian(net, x, ws);
    const Eigen::MatrixXd H =
        Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                       Eigen::RowMajor>>(e.hess.row(0).data(), d, d);
    const double r = spec.strong->residual(x, e.value[0], e.grad.row(0).transpose(), H);
    if (!std::isfinite(r))
      throw NumericError("pinn_loss: non-finite residual at point " +
                             std::to_string(i),
                         i);
    interior += quad.interior_w[i] * r * r;
  }
  double boundary = 0;
  for (long i = 0; i < quad.boundary_x.rows(); ++i) {
    const Eigen::VectorXd x = quad.boundary_x.row(i).transpose();
    const EvalResult e = eval_with_grad(net, x);
    const Eigen::VectorXd g =
        spec.boundary_g ? spec.boundary_g(x) : Eigen::VectorXd::Zero(1);
    boundary += quad.boundary_w[i] * (e.value - g).squaredNorm();
  }
  return interior + sigma * boundary;
}

double pinn_loss(const ProblemSpec& spec, const MlpNet& net,
                 const SampleBatch& batch, double sigma) {
  return pinn_loss(spec, net, loss_quadrature(batch, false), sigma);
}

double pinn_loss_grad(const ProblemSpec& spec, const MlpNet& net,
                      const LossQuadrature& quad, double sigma,
                      Eigen::VectorXd& grad) {
  if (!spec.strong)
    throw ConfigError(spec.name + ": no strong form available for PINN");
  const int d = spec.domain.dim();
  const int np = net.param_count();
  const long n = quad.interior_x.rows();
  const long nc = chunk_count(n, kChunk);
  std::vector<std::pair<double, Eigen::VectorXd>> part(
      nc, {0.0, Eigen::VectorXd::Zero(np)});
  for_chunks(n, kChunk, [&](long c, long lo, long hi) {
    Workspace ws;
    double ru;
    Eigen::VectorXd rg(d);
    Eigen::MatrixXd rH(d, d);
    for (long i = lo; i < hi; ++i) {
      const Eigen::VectorXd x = quad.interior_x.row(i).transpose();
      const EvalResult2 e = eval_with_hessian(net, x, ws);
      const Eigen::MatrixXd H = Eigen::Map<const Eigen::Matrix<
          double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
          e.hess.row(0).data(), d, d);
      const Eigen::VectorXd g = e.grad.row(0).transpose();
      const double r = spec.strong->residual(x, e.value[0], g, H);
      if (!std::isfinite(r))
        throw NumericError("pinn_loss: non-finite residual at point " +
                               std::to_string(i),
                           i);
      part[c].first += quad.interior_w[i] * r * r;
      spec.strong->seeds(x, e.value[0], g, H, ru, rg, rH);
      const double scale = 2.0 * quad.interior_w[i] * r;
      Eigen::VectorXd dval(1);
      dval[0] = scale * ru;
      Eigen::MatrixXd dgrad = scale * rg.transpose();
      Eigen::MatrixXd dhess(1, d * d);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b) dhess(0, a * d + b) = scale * rH(a, b);
      backprop_params2(net, ws, dval, dgrad, dhess, part[c].second);
    }
  });
  double interior = 0;
  grad = Eigen::VectorXd::Zero(np);
  for (const auto& p : part) {
    interior += p.first;
    grad += p.second;
  }

  double boundary = 0;
  if (sigma != 0.0) {
    Workspace ws;
    for (long i = 0; i < quad.boundary_x.rows(); ++i) {
      const Eigen::VectorXd x = quad.boundary_x.row(i).transpose();
      const EvalResult e = eval_with_grad(net, x, ws);
      const Eigen::VectorXd g =
          spec.boundary_g ? spec.boundary_g(x) : Eigen::VectorXd::Zero(1);
      const Eigen::VectorXd diff = e.value - g;
      boundary += quad.boundary_w[i] * diff.squaredNorm();
      backprop_params(net, ws, (2.0 * sigma * quad.boundary_w[i] * diff).eval(),
                      Eigen::MatrixXd::Zero(1, d), grad);
    }
  }
  return interior + sigma * boundary;
}

double dual_potential_estimate(const LossBreakdown& last_inner_loss) {
  return std::max(0.0, -(last_inner_loss.total - last_inner_loss.boundary_term));
}

}  // namespace idrm
