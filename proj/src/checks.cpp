#include <cmath>
#include <sstream>

#include "idrm/report.hpp"

namespace idrm {

namespace {

MlpNet random_net(int d, std::vector<int> hidden, int m, uint64_t seed) {
  NetArch arch;
  arch.input_dim = d;
  arch.layer_widths = std::move(hidden);
  arch.output_dim = m;
  MlpNet net = MlpNet::glorot(arch, seed);
  // Nonzero biases exercise every term in the recursion.
  SplitMix64 rng(derive_seed(seed, "bias"));
  for (int l = 0; l < net.n_affine(); ++l)
    for (Eigen::Index i = 0; i < net.bias(l).size(); ++i)
      net.bias(l)[i] = 0.4 * (2.0 * rng.uniform_open() - 1.0);
  return net;
}

double rel_gap(double got, double want) {
  return std::abs(got - want) / std::max(std::abs(want), 1e-9);
}

CheckResult check_spatial_gradient(uint64_t seed) {
  double worst = 0;
  for (int trial = 0; trial < 20; ++trial) {
    MlpNet net = random_net(4, {9, 7}, 2, derive_seed(seed, "sg", trial));
    SplitMix64 rng(derive_seed(seed, "sgx", trial));
    Eigen::VectorXd x(4);
    for (int i = 0; i < 4; ++i) x[i] = 2.0 * rng.uniform_open() - 1.0;
    const EvalResult ev = eval_with_grad(net, x);
    const double h = 1e-5;
    for (int i = 0; i < 4; ++i) {
      Eigen::VectorXd xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const Eigen::VectorXd up = eval_with_grad(net, xp).value;
      const Eigen::VectorXd um = eval_with_grad(net, xm).value;
      for (int c = 0; c < 2; ++c) {
        const double fd = (up[c] - um[c]) / (2.0 * h);
        worst = std::max(worst, rel_gap(ev.grad(c, i), fd));
      }
    }
  }
  std::ostringstream os;
  os << "max rel gap vs central differences: " << worst;
  return {"spatial-gradient", worst <= 1e-7, os.str()};
}

CheckResult check_param_gradient(uint64_t seed) {
  double worst = 0;
  for (int trial = 0; trial < 4; ++trial) {
    MlpNet net = random_net(3, {6}, 1, derive_seed(seed, "pg", trial));
    SplitMix64 rng(derive_seed(seed, "pgx", trial));
    std::vector<Eigen::VectorXd> pts;
    for (int i = 0; i < 5; ++i) {
      Eigen::VectorXd x(3);
      for (int j = 0; j < 3; ++j) x[j] = rng.uniform_open();
      pts.push_back(x);
    }
    auto value = [](long, const EvalResult& e) {
      return e.value[0] * e.value[0] + e.grad.row(0).squaredNorm();
    };
    auto seeds_fn = [](long, const EvalResult& e) {
      Seeds s;
      s.dval = 2.0 * e.value;
      s.dgrad = 2.0 * e.grad;
      return s;
    };
    const Eigen::VectorXd grad =
        param_grad_of_functional(net, pts, value, seeds_fn);
    Eigen::VectorXd theta = net.flatten();
    const double h = 1e-6;
    for (int k = 0; k < theta.size(); k += 3) {
      auto eval_at = [&](double tk) {
        Eigen::VectorXd t = theta;
        t[k] = tk;
        MlpNet n2 = net;
        n2.unflatten(t);
        double s = 0;
        for (size_t i = 0; i < pts.size(); ++i)
          s += value(static_cast<long>(i), eval_with_grad(n2, pts[i]));
        return s;
      };
      const double fd = (eval_at(theta[k] + h) - eval_at(theta[k] - h)) / (2 * h);
      worst = std::max(worst, rel_gap(grad[k], fd));
    }
  }
  std::ostringstream os;
  os << "max rel gap vs central differences over theta: " << worst;
  return {"parameter-gradient", worst <= 1e-6, os.str()};
}

CheckResult check_curl_divergence(uint64_t seed) {
  double worst = 0;
  MlpNet psi = random_net(3, {10, 10}, 3, derive_seed(seed, "curl"));
  SplitMix64 rng(derive_seed(seed, "curlx"));
  for (int i = 0; i < 200; ++i) {
    Eigen::VectorXd x(3);
    for (int j = 0; j < 3; ++j) x[j] = rng.uniform_open();
    const EvalResult v = curl_field(psi, x);
    worst = std::max(worst, std::abs(v.grad.trace()));
  }
  std::ostringstream os;
  os << "max |div curl| over 200 points: " << worst;
  return {"curl-divergence", worst <= 1e-12, os.str()};
}

CheckResult check_annihilation(uint64_t seed) {
  const ProblemSpec spec = make_conv_diffusion_10d();
  MlpNet net = random_net(10, {8, 8}, 1, derive_seed(seed, "ann"));
  const SampleBatch batch = sample_batch(spec.domain, 64, 16, derive_seed(seed, "annb"));
  SurrogateConfig cfg;
  cfg.lambda_k = 1.3;
  cfg.mu = 0.5;
  cfg.sigma = 7.0;
  cfg.p_exponent = spec.p_exponent;
  const MlpField f(net);
  const LossBreakdown bd = surrogate_loss(spec, f, f, cfg, batch);
  const bool pass = bd.i1_term == 0.0 && bd.i2_term == 0.0 && bd.i3_term == 0.0;
  std::ostringstream os;
  os << "interior terms at net == anchor: i1 = " << bd.i1_term
     << ", i2 = " << bd.i2_term << ", i3 = " << bd.i3_term;
  return {"zero-increment-annihilation", pass, os.str()};
}

CheckResult check_ritz_equivalence(uint64_t seed) {
  // Symmetric linear pairing (no convection): grad.grad + c u v.
  ProblemSpec spec = make_conv_diffusion_10d();
  spec.pairing = [](const Eigen::VectorXd&, const AdSlot& state, const AdSlot& test) {
    Ad acc = Ad::constant(0.0, state.val[0].n);
    for (int k = 0; k < state.d; ++k) acc = acc + state.g(0, k) * test.g(0, k);
    constexpr double c = 3.14159265358979323846 * 3.14159265358979323846 / 4.0;
    return acc + c * state.val[0] * test.val[0];
  };
  const SampleBatch batch =
      sample_batch(spec.domain, 256, 16, derive_seed(seed, "ritzb"));
  SurrogateConfig cfg;
  cfg.lambda_k = 1.0;
  cfg.mu = 0.0;
  cfg.sigma = 0.0;
  cfg.p_exponent = 2.0;
  cfg.antithetic_t = true;

  auto ritz = [&](const Field& f) {
    double acc = 0;
    const double w = batch.volume / static_cast<double>(batch.interior.rows());
    constexpr double c = 3.14159265358979323846 * 3.14159265358979323846 / 4.0;
    for (long i = 0; i < batch.interior.rows(); ++i) {
      const Eigen::VectorXd x = batch.interior.row(i).transpose();
      const EvalResult e = f.eval(x);
      acc += w * (0.5 * (e.grad.row(0).squaredNorm() + c * e.value[0] * e.value[0]) -
                  spec.source_f0(x)[0] * e.value[0] -
                  (spec.source_f1(x).array() * e.grad.array()).sum());
    }
    return acc;
  };

  double worst = 0;
  for (int trial = 0; trial < 5; ++trial) {
    const MlpField u(random_net(10, {7, 7}, 1, derive_seed(seed, "ru", trial)));
    const MlpField v(random_net(10, {7, 7}, 1, derive_seed(seed, "rv", trial)));
    const MlpField anchor(random_net(10, {7, 7}, 1, derive_seed(seed, "ra", trial)));
    const double dL = surrogate_loss(spec, anchor, u, cfg, batch).total -
                      surrogate_loss(spec, anchor, v, cfg, batch).total;
    const double dR = ritz(u) - ritz(v);
    worst = std::max(worst, std::abs(dL - dR));
  }
  std::ostringstream os;
  os << "max |dL - dRitz| over 5 pairs: " << worst;
  return {"ritz-equivalence", worst <= 1e-10, os.str()};
}

CheckResult check_pointwise_inequalities(uint64_t seed) {
  long bad = 0;
  for (double p : {1.5, 2.0}) {
    bad += count_continuity_violations(p, 10, 10000, derive_seed(seed, "c", p * 10));
    bad += count_monotonicity_violations(p, 10, 10000, derive_seed(seed, "m", p * 10));
  }
  std::ostringstream os;
  os << "violations over 4 x 10^4 pairs: " << bad;
  return {"pointwise-inequalities", bad == 0, os.str()};
}

CheckResult check_exponents(uint64_t) {
  const Exponents e22 = compute_exponents(2.0, 2.0);
  const Exponents e18 = compute_exponents(1.8, 2.0);
  const bool pass = e22.alpha == 0.0 && e22.beta == 1.0 &&
                    std::abs(e18.alpha - (-1.408 / 1.584)) <= 1e-12 &&
                    std::abs(e18.beta - 2.0) <= 1e-12;
  std::ostringstream os;
  os << "alpha(2,2) = " << e22.alpha << ", beta(2,2) = " << e22.beta
     << ", alpha(1.8,2) = " << e18.alpha << ", beta(1.8,2) = " << e18.beta;
  return {"exponent-formulas", pass, os.str()};
}

CheckResult check_catalog_monotonicity(uint64_t seed) {
  const SampleBatch batch = sample_batch(Domain::unit_cube(10), 512, 16,
                                         derive_seed(seed, "monob"));
  long violations = 0;
  for (const char* name : {"conv-diffusion-10d", "plaplace-2.5", "plaplace-1.5"}) {
    const MonotonicityReport rep =
        check_monotonicity(catalog(name), 20, batch, 1.0, derive_seed(seed, name));
    violations += rep.violations;
  }
  std::ostringstream os;
  os << "negative pairings over 3 x 20 pairs: " << violations;
  return {"catalog-monotonicity", violations == 0, os.str()};
}

}  // namespace

std::vector<CheckResult> self_check(uint64_t seed) {
  return {check_spatial_gradient(seed), check_param_gradient(seed),
          check_curl_divergence(seed),  check_annihilation(seed),
          check_ritz_equivalence(seed), check_pointwise_inequalities(seed),
          check_exponents(seed),        check_catalog_monotonicity(seed)};
}

}  // namespace idrm
