#include "idrm/problem.hpp"

#include <cmath>
#include <limits>

#include "idrm/problem_extra.hpp"

namespace idrm {

namespace {

constexpr double kPi = 3.14159265358979323846;

Ad dot_grad(const AdSlot& a, const AdSlot& b) {
  Ad s = Ad::constant(0.0, a.grad[0].n);
  for (int c = 0; c < a.m; ++c)
    for (int k = 0; k < a.d; ++k) s = s + a.g(c, k) * b.g(c, k);
  return s;
}

// squared Euclidean norm of a gradient slot
Ad grad_norm2(const AdSlot& a) {
  Ad s = Ad::constant(0.0, a.grad[0].n);
  for (int c = 0; c < a.m; ++c)
    for (int k = 0; k < a.d; ++k) s = s + a.g(c, k) * a.g(c, k);
  return s;
}

}  // namespace

void ProblemSpec::validate() const {
  domain.validate();
  if (n_components < 1) throw ConfigError(name + ": n_components must be >= 1");
  if (!(p_exponent > 1.0))
    throw ConfigError(name + ": p_exponent must lie in (1, inf)");
  if (!(rho_exponent >= 2.0))
    throw ConfigError(name + ": rho_exponent must be >= 2");
  if (!pairing) throw ConfigError(name + ": pairing is required");
}

Eigen::VectorXd ProblemSpec::source_f0(const Eigen::VectorXd& x) const {
  if (f0) return f0(x);
  return Eigen::VectorXd::Zero(n_components);
}

Eigen::MatrixXd ProblemSpec::source_f1(const Eigen::VectorXd& x) const {
  if (f1) return f1(x);
  return Eigen::MatrixXd::Zero(n_components, domain.dim());
}

double pairing_eval(const ProblemSpec& spec, const Eigen::VectorXd& x,
                    const Eigen::VectorXd& state_val, const Eigen::MatrixXd& state_grad,
                    const Eigen::VectorXd& test_val, const Eigen::MatrixXd& test_grad) {
  const int m = spec.n_components;
  const int d = spec.domain.dim();
  if (state_val.size() != m || test_val.size() != m || state_grad.rows() != m ||
      test_grad.rows() != m || state_grad.cols() != d || test_grad.cols() != d ||
      x.size() != d)
    throw ConfigError(spec.name + ": pairing_eval dimension mismatch (expect " +
                      std::to_string(m) + " components, dim " + std::to_string(d) + ")");
  std::vector<Ad> sv(m), tv(m), sg(m * d), tg(m * d);
  for (int c = 0; c < m; ++c) {
    sv[c] = Ad::constant(state_val[c], 0);
    tv[c] = Ad::constant(test_val[c], 0);
    for (int k = 0; k < d; ++k) {
      sg[c * d + k] = Ad::constant(state_grad(c, k), 0);
      tg[c * d + k] = Ad::constant(test_grad(c, k), 0);
    }
  }
  AdSlot state{sv.data(), sg.data(), m, d};
  AdSlot test{tv.data(), tg.data(), m, d};
  const double v = spec.pairing(x, state, test).v;
  if (!std::isfinite(v)) {
    std::string loc = "(";
    for (int k = 0; k < d; ++k)
      loc += std::to_string(x[k]) + (k + 1 < d ? "," : ")");
    throw NumericError(spec.name + ": non-finite pairing at x = " + loc +
                       (spec.p_exponent < 2 && !spec.regularization
                            ? " (p < 2 singularity, no regularization set)"
                            : ""));
  }
  return v;
}

// ---------------------------------------------------------------------------
// Example: stationary convection-diffusion on (0,1)^10.
//   -Laplace(u) + d_1 u + (pi^2/4) u = f,  u* = sum_i min(sin(pi x_i / 2), 0.9)
// The clamped sine leaves u* outside H^2; sources are supplied in weak form
// (f0 = a0(u*), f1 = grad u*) so only first derivatives of u* appear. Ties of
// the min resolve to the sine branch.
// ---------------------------------------------------------------------------

namespace {

constexpr double kConvC = kPi * kPi / 4.0;

void conv_diffusion_exact(const Eigen::VectorXd& x, Eigen::VectorXd& val,
                          Eigen::MatrixXd& grad) {
  double s = 0.0;
  for (int i = 0; i < x.size(); ++i) {
    const double si = std::sin(kPi / 2.0 * x[i]);
    if (si <= 0.9) {
      s += si;
      grad(0, i) = kPi / 2.0 * std::cos(kPi / 2.0 * x[i]);
    } else {
      s += 0.9;
      grad(0, i) = 0.0;
    }
  }
  val[0] = s;
}

}  // namespace

ProblemSpec make_conv_diffusion_10d() {
  ProblemSpec spec;
  spec.name = "conv-diffusion-10d";
  spec.domain = Domain::unit_cube(10);
  spec.n_components = 1;
  spec.p_exponent = 2.0;
  spec.rho_exponent = 2.0;
  spec.pairing = [](const Eigen::VectorXd&, const AdSlot& state, const AdSlot& test) {
    Ad p = dot_grad(state, test);
    return p + test.val[0] * (state.g(0, 0) + kConvC * state.val[0]);
  };
  auto exact = std::make_shared<AnalyticField>(10, 1, conv_diffusion_exact);
  spec.exact = exact;
  spec.f0 = [exact](const Eigen::VectorXd& x) {
    EvalResult e = exact->eval(x);
    Eigen::VectorXd f(1);
    f[0] = e.grad(0, 0) + kConvC * e.value[0];
    return f;
  };
  spec.f1 = [exact](const Eigen::VectorXd& x) { return exact->eval(x).grad; };
  spec.boundary_g = [exact](const Eigen::VectorXd& x) { return exact->eval(x).value; };

  StrongForm strong;
  strong.residual = [exact](const Eigen::VectorXd& x, double u, const Eigen::VectorXd& g,
                            const Eigen::MatrixXd& H) {
    // a.e. strong source assembled from the smooth branches of u*.
    double f = 0.0;
    for (int i = 0; i < x.size(); ++i) {
      const double si = std::sin(kPi / 2.0 * x[i]);
      if (si <= 0.9) f += kPi * kPi / 4.0 * si;
    }
    EvalResult e = exact->eval(x);
    f += e.grad(0, 0) + kConvC * e.value[0];
    return -H.trace() + g[0] + kConvC * u - f;
  };
  strong.seeds = [](const Eigen::VectorXd& x, double, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd&, double& ru, Eigen::VectorXd& rg,
                    Eigen::MatrixXd& rH) {
    ru = kConvC;
    rg = Eigen::VectorXd::Zero(g.size());
    rg[0] = 1.0;
    rH = -Eigen::MatrixXd::Identity(x.size(), x.size());
  };
  spec.strong = strong;
  return spec;
}

// ---------------------------------------------------------------------------
// Example: p-Laplace with convection on (0,1)^10.
//   -div(|grad u|^{p-2} grad u) + d_1 u = f
// p = 2.5: u* = (1 - r^2) / 50^(1/3), f = (2/5)(d + 1/2) r^(1/2) - (2/5)^(2/3) x_1.
// p = 1.5: u* = 1 - r, f = (9 - x_1)/r, delta = 0.01 difference pairing.
// ---------------------------------------------------------------------------

ProblemSpec make_plaplace_custom(double p, std::optional<double> delta,
                                 bool convection) {
  ProblemSpec spec;
  spec.name = "plaplace-custom";
  spec.domain = Domain::unit_cube(10);
  spec.n_components = 1;
  spec.p_exponent = p;
  spec.rho_exponent = 2.0;
  if (delta) spec.regularization = Regularization{*delta};
  if (delta) {
    const double dlt = *delta;
    spec.pairing = [p, dlt, convection](const Eigen::VectorXd&, const AdSlot& state,
                                        const AdSlot& test) {
      const int width = state.val[0].n;
      Ad shifted = Ad::constant(0.0, width);
      for (int k = 0; k < state.d; ++k) {
        Ad gk = state.g(0, k) + dlt * test.g(0, k);
        shifted = shifted + gk * gk;
      }
      Ad base = grad_norm2(state);
      Ad diff = (pow(shifted, p / 2.0) - pow(base, p / 2.0)) * (1.0 / (p * dlt));
      if (convection) diff = diff + test.val[0] * state.g(0, 0);
      return diff;
    };
  } else {
    spec.pairing = [p, convection](const Eigen::VectorXd&, const AdSlot& state,
                                   const AdSlot& test) {
      Ad s2 = grad_norm2(state);
      Ad flux = pow(s2, (p - 2.0) / 2.0) * dot_grad(state, test);
      if (convection) flux = flux + test.val[0] * state.g(0, 0);
      return flux;
    };
  }
  return spec;
}

ProblemSpec make_plaplace_25() {
  ProblemSpec spec = make_plaplace_custom(2.5, std::nullopt);
  spec.name = "plaplace-2.5";
  const double c = 1.0 / std::cbrt(50.0);
  auto exact_fn = [c](const Eigen::VectorXd& x, Eigen::VectorXd& val,
                      Eigen::MatrixXd& grad) {
    val[0] = c * (1.0 - x.squaredNorm());
    grad.row(0) = -2.0 * c * x.transpose();
  };
  auto exact = std::make_shared<AnalyticField>(10, 1, exact_fn);
  spec.exact = exact;
  // The exact-solution residual of the flux term carries the dimension factor
  // (2/5)(d + 1/2); with d = 10 the source reads (21/5) r^(1/2) - (2/5)^(2/3) x_1.
  spec.f0 = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd f(1);
    const double r = x.norm();
    f[0] = 0.4 * 10.5 * std::sqrt(r) - std::pow(0.4, 2.0 / 3.0) * x[0];
    return f;
  };
  spec.boundary_g = [exact](const Eigen::VectorXd& x) { return exact->eval(x).value; };
  return spec;
}

ProblemSpec make_plaplace_15() {
  ProblemSpec spec = make_plaplace_custom(1.5, 0.01);
  spec.name = "plaplace-1.5";
  auto exact_fn = [](const Eigen::VectorXd& x, Eigen::VectorXd& val,
                     Eigen::MatrixXd& grad) {
    const double r = x.norm();
    val[0] = 1.0 - r;
    if (r > 0) grad.row(0) = -x.transpose() / r;
  };
  auto exact = std::make_shared<AnalyticField>(10, 1, exact_fn);
  spec.exact = exact;
  spec.f0 = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd f(1);
    const double r = x.norm();
    f[0] = r > 0 ? (9.0 - x[0]) / r : 0.0;
    return f;
  };
  spec.boundary_g = [exact](const Eigen::VectorXd& x) { return exact->eval(x).value; };

  // Strong form with the regularized flux (|g|^2 + delta^2)^((p-2)/2) g.
  const double p = 1.5, dlt = 0.01;
  StrongForm strong;
  auto f_of = spec.f0;
  strong.residual = [p, dlt, f_of](const Eigen::VectorXd& x, double, const Eigen::VectorXd& g,
                                   const Eigen::MatrixXd& H) {
    const double q = g.squaredNorm() + dlt * dlt;
    const double psi = std::pow(q, (p - 2.0) / 2.0);
    const double gHg = g.dot(H * g);
    return -(psi * H.trace() + (p - 2.0) * std::pow(q, (p - 4.0) / 2.0) * gHg) +
           g[0] - f_of(x)[0];
  };
  strong.seeds = [p, dlt](const Eigen::VectorXd& x, double, const Eigen::VectorXd& g,
                          const Eigen::MatrixXd& H, double& ru, Eigen::VectorXd& rg,
                          Eigen::MatrixXd& rH) {
    const int d = static_cast<int>(x.size());
    const double q = g.squaredNorm() + dlt * dlt;
    const double q1 = std::pow(q, (p - 2.0) / 2.0);
    const double q2 = std::pow(q, (p - 4.0) / 2.0);
    const double q3 = std::pow(q, (p - 6.0) / 2.0);
    const double trH = H.trace();
    const double gHg = g.dot(H * g);
    ru = 0.0;
    rg = Eigen::VectorXd::Zero(d);
    rg.noalias() -= (p - 2.0) * q2 * trH * g;
    rg.noalias() -= (p - 2.0) * ((p - 4.0) * q3 * gHg * g + q2 * (H + H.transpose()) * g);
    rg[0] += 1.0;
    rH = -q1 * Eigen::MatrixXd::Identity(d, d);
    rH.noalias() -= (p - 2.0) * q2 * g * g.transpose();
  };
  spec.strong = strong;
  return spec;
}

// ---------------------------------------------------------------------------
// Example: backward-Euler step of the quasilinear diffusion problem
//   u_t = div(u grad u) + f on (0,1)^10, u*(x,t) = (sum x_i + 1 + t + sin(5 pi t)/5)^(1/2).
// Step problem: -dt div(u grad u) + u = dt f(., t_next) + u_prev, i.e.
// a1 = dt u grad u, a0 = u.
// ---------------------------------------------------------------------------

double quasilinear_exact_value(const Eigen::VectorXd& x, double t) {
  return std::sqrt(x.sum() + 1.0 + t + 0.2 * std::sin(5.0 * kPi * t));
}

FieldPtr quasilinear_exact_field(double t) {
  return std::make_shared<AnalyticField>(
      10, 1,
      [t](const Eigen::VectorXd& x, Eigen::VectorXd& val, Eigen::MatrixXd& grad) {
        const double u = quasilinear_exact_value(x, t);
        val[0] = u;
        grad.row(0).setConstant(1.0 / (2.0 * u));
      });
}

double quasilinear_forcing(const Eigen::VectorXd& x, double t) {
  // u^2 = S + 1 + t + sin(5 pi t)/5, so u grad u = 1/2 per axis and
  // div(u grad u) = 0; f reduces to u_t.
  const double u = quasilinear_exact_value(x, t);
  return (1.0 + kPi * std::cos(5.0 * kPi * t)) / (2.0 * u);
}

ProblemSpec make_quasilinear_step(double dt, double t_next, FieldPtr u_prev) {
  if (dt <= 0) throw ConfigError("quasilinear step: dt must be positive");
  if (!u_prev) throw ConfigError("quasilinear step: u_prev required");
  ProblemSpec spec;
  spec.name = "quasilinear-heat-10d";
  spec.domain = Domain::unit_cube(10);
  spec.n_components = 1;
  spec.p_exponent = 2.0;
  spec.rho_exponent = 2.0;
  spec.pairing = [dt](const Eigen::VectorXd&, const AdSlot& state, const AdSlot& test) {
    return test.val[0] * state.val[0] + dt * state.val[0] * dot_grad(state, test);
  };
  spec.f0 = [dt, t_next, u_prev](const Eigen::VectorXd& x) {
    Eigen::VectorXd f(1);
    f[0] = dt * quasilinear_forcing(x, t_next) + u_prev->eval(x).value[0];
    return f;
  };
  auto exact = quasilinear_exact_field(t_next);
  spec.exact = exact;
  spec.boundary_g = [exact](const Eigen::VectorXd& x) { return exact->eval(x).value; };
  return spec;
}

// ---------------------------------------------------------------------------
// Example: steady Navier-Stokes on (0,1)^3 with viscosity 0.1.
// Velocity u* = curl(psi) with psi = (s, s, s), s = x1 x2 x3^(2/3); weakly
// singular on the x3 = 0 face. Sources in weak form: f0 = (u*.grad)u*,
// f1 = visc * grad u*, which eliminates the pressure against divergence-free
// test fields.
// ---------------------------------------------------------------------------

namespace {

constexpr double kViscosity = 0.1;

void navier_stokes_exact(const Eigen::VectorXd& x, Eigen::VectorXd& val,
                         Eigen::MatrixXd& grad) {
  const double x1 = x[0], x2 = x[1], x3 = x[2];
  const double z = std::pow(x3, 2.0 / 3.0);     // x3^(2/3)
  const double w = std::pow(x3, -1.0 / 3.0);    // x3^(-1/3)
  const double w4 = std::pow(x3, -4.0 / 3.0);   // x3^(-4/3)
  val[0] = x1 * z - (2.0 / 3.0) * x1 * x2 * w;
  val[1] = (2.0 / 3.0) * x1 * x2 * w - x2 * z;
  val[2] = (x2 - x1) * z;
  grad(0, 0) = z - (2.0 / 3.0) * x2 * w;
  grad(0, 1) = -(2.0 / 3.0) * x1 * w;
  grad(0, 2) = (2.0 / 3.0) * x1 * w + (2.0 / 9.0) * x1 * x2 * w4;
  grad(1, 0) = (2.0 / 3.0) * x2 * w;
  grad(1, 1) = (2.0 / 3.0) * x1 * w - z;
  grad(1, 2) = -(2.0 / 9.0) * x1 * x2 * w4 - (2.0 / 3.0) * x2 * w;
  grad(2, 0) = -z;
  grad(2, 1) = z;
  grad(2, 2) = (2.0 / 3.0) * (x2 - x1) * w;
}

}  // namespace

ProblemSpec make_navier_stokes_3d() {
  ProblemSpec spec;
  spec.name = "navier-stokes-3d";
  spec.domain = Domain::unit_cube(3);
  spec.n_components = 3;
  spec.p_exponent = 2.0;
  spec.rho_exponent = 2.0;
  spec.pairing = [](const Eigen::VectorXd&, const AdSlot& state, const AdSlot& test) {
    const int width = state.val[0].n;
    Ad acc = kViscosity * dot_grad(state, test);
    for (int c = 0; c < 3; ++c) {
      Ad conv = Ad::constant(0.0, width);
      for (int j = 0; j < 3; ++j) conv = conv + state.val[j] * state.g(c, j);
      acc = acc + test.val[c] * conv;
    }
    return acc;
  };
  auto exact = std::make_shared<AnalyticField>(3, 3, navier_stokes_exact);
  spec.exact = exact;
  spec.f0 = [exact](const Eigen::VectorXd& x) {
    EvalResult e = exact->eval(x);
    Eigen::VectorXd f(3);
    for (int c = 0; c < 3; ++c) f[c] = e.grad.row(c).dot(e.value);
    return f;
  };
  spec.f1 = [exact](const Eigen::VectorXd& x) {
    return Eigen::MatrixXd(kViscosity * exact->eval(x).grad);
  };
  spec.boundary_g = [exact](const Eigen::VectorXd& x) { return exact->eval(x).value; };
  return spec;
}

// ---------------------------------------------------------------------------
// 1-D shadow problem -u'' + u = f on (0,1), u* = sin(pi x).
// ---------------------------------------------------------------------------

ProblemSpec make_linear_1d() {
  ProblemSpec spec;
  spec.name = "linear-1d";
  spec.domain = Domain::unit_cube(1);
  spec.n_components = 1;
  spec.p_exponent = 2.0;
  spec.rho_exponent = 2.0;
  spec.pairing = [](const Eigen::VectorXd&, const AdSlot& state, const AdSlot& test) {
    return state.g(0, 0) * test.g(0, 0) + state.val[0] * test.val[0];
  };
  auto exact_fn = [](const Eigen::VectorXd& x, Eigen::VectorXd& val,
                     Eigen::MatrixXd& grad) {
    val[0] = std::sin(kPi * x[0]);
    grad(0, 0) = kPi * std::cos(kPi * x[0]);
  };
  auto exact = std::make_shared<AnalyticField>(1, 1, exact_fn);
  spec.exact = exact;
  spec.f0 = [](const Eigen::VectorXd& x) {
    Eigen::VectorXd f(1);
    f[0] = (kPi * kPi + 1.0) * std::sin(kPi * x[0]);
    return f;
  };
  spec.boundary_g = [](const Eigen::VectorXd&) { return Eigen::VectorXd::Zero(1); };
  StrongForm strong;
  strong.residual = [](const Eigen::VectorXd& x, double u, const Eigen::VectorXd&,
                       const Eigen::MatrixXd& H) {
    return -H(0, 0) + u - (kPi * kPi + 1.0) * std::sin(kPi * x[0]);
  };
  strong.seeds = [](const Eigen::VectorXd&, double, const Eigen::VectorXd& g,
                    const Eigen::MatrixXd&, double& ru, Eigen::VectorXd& rg,
                    Eigen::MatrixXd& rH) {
    ru = 1.0;
    rg = Eigen::VectorXd::Zero(g.size());
    rH = -Eigen::MatrixXd::Identity(1, 1);
  };
  spec.strong = strong;
  return spec;
}

std::vector<std::string> catalog_names() {
  return {"conv-diffusion-10d", "plaplace-2.5", "plaplace-1.5",
          "quasilinear-heat-10d", "navier-stokes-3d"};
}

ProblemSpec catalog(const std::string& name) {
  if (name == "conv-diffusion-10d") return make_conv_diffusion_10d();
  if (name == "plaplace-2.5") return make_plaplace_25();
  if (name == "plaplace-1.5") return make_plaplace_15();
  if (name == "quasilinear-heat-10d")
    return make_quasilinear_step(0.05, 0.05, quasilinear_exact_field(0.0));
  if (name == "navier-stokes-3d") return make_navier_stokes_3d();
  std::string known;
  for (const auto& n : catalog_names()) known += " " + n;
  throw ConfigError("unknown problem '" + name + "'; valid names:" + known);
}

// ---------------------------------------------------------------------------
// Assumption checkers.
// ---------------------------------------------------------------------------

EvalResult BubbleField::eval(const Eigen::VectorXd& x) const {
  EvalResult inner = inner_->eval(x);
  const int d = dim(), m = components();
  double B = 1.0;
  Eigen::VectorXd b(d), db(d);
  for (int i = 0; i < d; ++i) {
    const double len = domain_.upper[i] - domain_.lower[i];
    const double lo = x[i] - domain_.lower[i], hi = domain_.upper[i] - x[i];
    b[i] = 4.0 * lo * hi / (len * len);
    db[i] = 4.0 * (hi - lo) / (len * len);
    B *= b[i];
  }
  EvalResult out;
  out.value = B * inner.value;
  out.grad.resize(m, d);
  for (int j = 0; j < d; ++j) {
    double rest = 1.0;
    for (int i = 0; i < d; ++i)
      if (i != j) rest *= b[i];
    const double dB = db[j] * rest;
    for (int c = 0; c < m; ++c)
      out.grad(c, j) = B * inner.grad(c, j) + dB * inner.value[c];
  }
  return out;
}

MonotonicityReport check_monotonicity(const ProblemSpec& spec, long n_pairs,
                                      const SampleBatch& quad, double radius,
                                      uint64_t seed) {
  if (n_pairs < 1) throw ConfigError("check_monotonicity: n_pairs must be >= 1");
  const int d = spec.domain.dim();
  const int m = spec.n_components;
  const long n = quad.interior.rows();
  const double wq = quad.volume / static_cast<double>(n);
  const double p = spec.p_exponent;

  auto draw_field = [&](uint64_t s) -> FieldPtr {
    NetArch arch;
    arch.input_dim = d;
    arch.layer_widths = {8, 8};
    arch.output_dim = m;
    MlpNet net = MlpNet::glorot(arch, s);
    FieldPtr f;
    if (m == 3 && d == 3)
      f = std::make_shared<CurlMlpField>(net);
    else if (spec.dirichlet)
      f = std::make_shared<BubbleField>(std::make_shared<MlpField>(net), spec.domain);
    else
      f = std::make_shared<MlpField>(net);
    // Scale to the requested norm radius; scaling the field scales its
    // W^{1,p} norm linearly.
    double norm_p = 0.0;
    for (long i = 0; i < n; ++i) {
      EvalResult e = f->eval(quad.interior.row(i).transpose());
      norm_p += wq * (std::pow(e.value.squaredNorm(), p / 2.0) +
                      std::pow(e.grad.squaredNorm(), p / 2.0));
    }
    const double norm = std::pow(norm_p, 1.0 / p);
    SplitMix64 rr(derive_seed(s, "scale"));
    const double target = radius * (0.2 + 0.8 * rr.uniform_open());
    const double scale = norm > 0 ? target / norm : 1.0;
    struct Scaled : Field {
      FieldPtr base;
      double c;
      int dim() const override { return base->dim(); }
      int components() const override { return base->components(); }
      EvalResult eval(const Eigen::VectorXd& x) const override {
        EvalResult e = base->eval(x);
        e.value *= c;
        e.grad *= c;
        return e;
      }
    };
    auto sc = std::make_shared<Scaled>();
    sc->base = f;
    sc->c = scale;
    return sc;
  };

  MonotonicityReport rep;
  rep.pairs_tested = n_pairs;
  for (long pair = 0; pair < n_pairs; ++pair) {
    FieldPtr u = draw_field(derive_seed(seed, "u", pair));
    FieldPtr v = draw_field(derive_seed(seed, "v", pair));
    double pairing_diff = 0.0;
    double wnorm_p = 0.0;
    for (long i = 0; i < n; ++i) {
      const Eigen::VectorXd x = quad.interior.row(i).transpose();
      EvalResult eu = u->eval(x), ev = v->eval(x);
      const Eigen::VectorXd wval = eu.value - ev.value;
      const Eigen::MatrixXd wgrad = eu.grad - ev.grad;
      pairing_diff +=
          wq * (pairing_eval(spec, x, eu.value, eu.grad, wval, wgrad) -
                pairing_eval(spec, x, ev.value, ev.grad, wval, wgrad));
      wnorm_p += wq * (std::pow(wval.squaredNorm(), p / 2.0) +
                       std::pow(wgrad.squaredNorm(), p / 2.0));
    }
    if (wnorm_p == 0.0) {
      rep.skipped++;
      continue;
    }
    if (pairing_diff < 0.0) rep.violations++;
    const double ratio =
        pairing_diff / std::pow(wnorm_p, spec.rho_exponent / p);
    rep.min_ratio = std::min(rep.min_ratio, ratio);
  }
  return rep;
}

namespace {

Eigen::VectorXd gaussian_vec(SplitMix64& rng, int d) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) {
    // Box-Muller on open-interval uniforms.
    const double u1 = rng.uniform_open(), u2 = rng.uniform_open();
    v[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }
  return v;
}

Eigen::VectorXd p_flux(const Eigen::VectorXd& a, double p) {
  const double n2 = a.squaredNorm();
  if (n2 == 0.0) return Eigen::VectorXd::Zero(a.size());
  return std::pow(n2, (p - 2.0) / 2.0) * a;
}

}  // namespace

long count_continuity_violations(double p, int dim, long n_pairs, uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, "conti"));
  long violations = 0;
  for (long i = 0; i < n_pairs; ++i) {
    const Eigen::VectorXd a = gaussian_vec(rng, dim);
    const Eigen::VectorXd b = gaussian_vec(rng, dim);
    const double lhs = (p_flux(b, p) - p_flux(a, p)).norm();
    const double rhs = std::pow(2.0, 2.0 - p) * std::pow((b - a).norm(), p - 1.0);
    if (lhs > rhs) violations++;
  }
  return violations;
}

long count_monotonicity_violations(double p, int dim, long n_pairs, uint64_t seed) {
  SplitMix64 rng(derive_seed(seed, "mono"));
  long violations = 0;
  for (long i = 0; i < n_pairs; ++i) {
    const Eigen::VectorXd a = gaussian_vec(rng, dim);
    const Eigen::VectorXd b = gaussian_vec(rng, dim);
    const Eigen::VectorXd diff = b - a;
    const double lhs = (p_flux(b, p) - p_flux(a, p)).dot(diff);
    const double rhs =
        (p - 1.0) * diff.squaredNorm() *
        std::pow(1.0 + a.squaredNorm() + b.squaredNorm(), (p - 2.0) / 2.0);
    if (lhs < rhs) violations++;
  }
  return violations;
}

}  // namespace idrm
