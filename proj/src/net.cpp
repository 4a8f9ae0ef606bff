#include "idrm/net.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>

#include "idrm/parallel.hpp"
#include "idrm/rng.hpp"

namespace idrm {

void NetArch::validate() const {
  if (input_dim < 1) throw ConfigError("NetArch: input_dim must be >= 1");
  if (output_dim < 1) throw ConfigError("NetArch: output_dim must be >= 1");
  if (layer_widths.empty())
    throw ConfigError("NetArch: layer_widths must be non-empty");
  for (int w : layer_widths)
    if (w < 1) throw ConfigError("NetArch: hidden widths must be >= 1");
  if (param_bound && *param_bound < 0)
    throw ConfigError("NetArch: param_bound must be nonnegative");
}

std::vector<int> NetArch::dims() const {
  std::vector<int> d;
  d.reserve(layer_widths.size() + 2);
  d.push_back(input_dim);
  d.insert(d.end(), layer_widths.begin(), layer_widths.end());
  d.push_back(output_dim);
  return d;
}

MlpNet::MlpNet(NetArch arch) : arch_(std::move(arch)) {
  arch_.validate();
  const auto dims = arch_.dims();
  const int L = arch_.n_affine();
  weights_.resize(L);
  biases_.resize(L);
  offsets_.resize(L);
  int off = 0;
  for (int l = 0; l < L; ++l) {
    weights_[l] = Eigen::MatrixXd::Zero(dims[l + 1], dims[l]);
    biases_[l] = Eigen::VectorXd::Zero(dims[l + 1]);
    offsets_[l] = off;
    off += dims[l + 1] * dims[l] + dims[l + 1];
  }
  n_params_ = off;
}

MlpNet MlpNet::glorot(NetArch arch, uint64_t seed) {
  MlpNet net(std::move(arch));
  SplitMix64 rng(seed);
  for (int l = 0; l < net.n_affine(); ++l) {
    auto& A = net.weights_[l];
    const double a = std::sqrt(6.0 / static_cast<double>(A.rows() + A.cols()));
    for (Eigen::Index r = 0; r < A.rows(); ++r)
      for (Eigen::Index c = 0; c < A.cols(); ++c)
        A(r, c) = a * (2.0 * rng.uniform_open() - 1.0);
  }
  if (net.arch_.param_bound) net.clamp_params(*net.arch_.param_bound);
  return net;
}

Eigen::VectorXd MlpNet::flatten() const {
  Eigen::VectorXd theta(n_params_);
  int off = 0;
  for (int l = 0; l < n_affine(); ++l) {
    const auto& A = weights_[l];
    for (Eigen::Index r = 0; r < A.rows(); ++r)
      for (Eigen::Index c = 0; c < A.cols(); ++c) theta[off++] = A(r, c);
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r)
      theta[off++] = biases_[l][r];
  }
  return theta;
}

void MlpNet::unflatten(const Eigen::VectorXd& theta) {
  if (theta.size() != n_params_)
    throw ConfigError("MlpNet::unflatten: expected " +
                      std::to_string(n_params_) + " parameters, got " +
                      std::to_string(theta.size()));
  int off = 0;
  for (int l = 0; l < n_affine(); ++l) {
    auto& A = weights_[l];
    for (Eigen::Index r = 0; r < A.rows(); ++r)
      for (Eigen::Index c = 0; c < A.cols(); ++c) A(r, c) = theta[off++];
    for (Eigen::Index r = 0; r < biases_[l].size(); ++r)
      biases_[l][r] = theta[off++];
  }
}

void MlpNet::clamp_params(double bound) {
  for (int l = 0; l < n_affine(); ++l) {
    weights_[l] = weights_[l].cwiseMax(-bound).cwiseMin(bound);
    biases_[l] = biases_[l].cwiseMax(-bound).cwiseMin(bound);
  }
}

bool MlpNet::params_finite() const {
  for (int l = 0; l < n_affine(); ++l)
    if (!weights_[l].allFinite() || !biases_[l].allFinite()) return false;
  return true;
}

namespace {

void check_input_dim(const MlpNet& net, const Eigen::VectorXd& x) {
  if (x.size() != net.arch().input_dim)
    throw ConfigError("eval: input has dimension " + std::to_string(x.size()) +
                      ", network expects " +
                      std::to_string(net.arch().input_dim));
}

void ensure_layers(Workspace& ws, int L, bool second_order) {
  if (static_cast<int>(ws.y.size()) < L + 1) {
    ws.y.resize(L + 1);
    ws.M.resize(L + 1);
    ws.J.resize(L + 1);
  }
  if (second_order && static_cast<int>(ws.T.size()) < L + 1) {
    ws.T.resize(L + 1);
    ws.H.resize(L + 1);
  }
}

}  // namespace

EvalResult eval_with_grad(const MlpNet& net, const Eigen::VectorXd& x) {
  Workspace ws;
  return eval_with_grad(net, x, ws);
}

EvalResult eval_with_grad(const MlpNet& net, const Eigen::VectorXd& x,
                          Workspace& ws) {
  check_input_dim(net, x);
  const int L = net.n_affine();
  const int d = net.arch().input_dim;
  ensure_layers(ws, L, false);

  ws.y[0] = x;
  ws.J[0] = Eigen::MatrixXd::Identity(d, d);
  for (int l = 0; l < L - 1; ++l) {
    const auto& A = net.weight(l);
    ws.M[l + 1].noalias() = A * ws.J[l];
    Eigen::VectorXd z = A * ws.y[l] + net.bias(l);
    ws.y[l + 1] = z.array().tanh();
    const Eigen::ArrayXd s = 1.0 - ws.y[l + 1].array().square();
    ws.J[l + 1] = s.matrix().asDiagonal() * ws.M[l + 1];
  }
  EvalResult out;
  const auto& AL = net.weight(L - 1);
  out.value.noalias() = AL * ws.y[L - 1];
  out.value += net.bias(L - 1);
  out.grad.noalias() = AL * ws.J[L - 1];
  return out;
}

EvalResult2 eval_with_hessian(const MlpNet& net, const Eigen::VectorXd& x) {
  Workspace ws;
  return eval_with_hessian(net, x, ws);
}

EvalResult2 eval_with_hessian(const MlpNet& net, const Eigen::VectorXd& x,
                              Workspace& ws) {
  check_input_dim(net, x);
  const int L = net.n_affine();
  const int d = net.arch().input_dim;
  const int dd = d * d;
  ensure_layers(ws, L, true);

  ws.y[0] = x;
  ws.J[0] = Eigen::MatrixXd::Identity(d, d);
  ws.H[0] = Eigen::MatrixXd::Zero(d, dd);
  for (int l = 0; l < L - 1; ++l) {
    const auto& A = net.weight(l);
    const int n = static_cast<int>(A.rows());
    ws.M[l + 1].noalias() = A * ws.J[l];
    ws.T[l + 1].noalias() = A * ws.H[l];
    Eigen::VectorXd z = A * ws.y[l] + net.bias(l);
    ws.y[l + 1] = z.array().tanh();
    auto& H = ws.H[l + 1];
    H.resize(n, dd);
    for (int i = 0; i < n; ++i) {
      const double yi = ws.y[l + 1][i];
      const double si = 1.0 - yi * yi;
      const auto mi = ws.M[l + 1].row(i);
      for (int a = 0; a < d; ++a)
        for (int b = 0; b < d; ++b)
          H(i, a * d + b) =
              si * ws.T[l + 1](i, a * d + b) - 2.0 * yi * si * mi[a] * mi[b];
    }
    const Eigen::ArrayXd s = 1.0 - ws.y[l + 1].array().square();
    ws.J[l + 1] = s.matrix().asDiagonal() * ws.M[l + 1];
  }
  EvalResult2 out;
  const auto& AL = net.weight(L - 1);
  out.value.noalias() = AL * ws.y[L - 1];
  out.value += net.bias(L - 1);
  out.grad.noalias() = AL * ws.J[L - 1];
  out.hess.noalias() = AL * ws.H[L - 1];
  return out;
}

void backprop_params(const MlpNet& net, Workspace& ws,
                     const Eigen::VectorXd& dval, const Eigen::MatrixXd& dgrad,
                     Eigen::VectorXd& grad_accum) {
  const int L = net.n_affine();

  // Output affine layer: u = A y + b, G = A J.
  {
    const int l = L - 1;
    const auto& y = ws.y[l];
    const auto& J = ws.J[l];
    const int off = net.layer_offset(l);
    const int rows = static_cast<int>(net.weight(l).rows());
    const int cols = static_cast<int>(net.weight(l).cols());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        gA(grad_accum.data() + off, rows, cols);
    gA.noalias() += dval * y.transpose();
    gA.noalias() += dgrad * J.transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad_accum.data() + off + rows * cols, rows);
    gb += dval;
    ws.ybar.noalias() = net.weight(l).transpose() * dval;
    ws.Jbar.noalias() = net.weight(l).transpose() * dgrad;
  }

  for (int l = L - 2; l >= 0; --l) {
    const auto& y = ws.y[l + 1];
    const auto& M = ws.M[l + 1];
    const Eigen::ArrayXd s = 1.0 - y.array().square();
    // y feeds J = diag(s) M through s: ybar_i += -2 y_i <Jbar_i, M_i>.
    ws.ybar.array() +=
        -2.0 * y.array() * (ws.Jbar.array() * M.array()).rowwise().sum();
    ws.zbar = (ws.ybar.array() * s).matrix();
    ws.Mbar = s.matrix().asDiagonal() * ws.Jbar;

    const int off = net.layer_offset(l);
    const int rows = static_cast<int>(net.weight(l).rows());
    const int cols = static_cast<int>(net.weight(l).cols());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        gA(grad_accum.data() + off, rows, cols);
    gA.noalias() += ws.zbar * ws.y[l].transpose();
    gA.noalias() += ws.Mbar * ws.J[l].transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad_accum.data() + off + rows * cols, rows);
    gb += ws.zbar;

    if (l > 0) {
      ws.ybar.noalias() = net.weight(l).transpose() * ws.zbar;
      ws.Jbar.noalias() = net.weight(l).transpose() * ws.Mbar;
    }
  }
}

void backprop_params2(const MlpNet& net, Workspace& ws,
                      const Eigen::VectorXd& dval, const Eigen::MatrixXd& dgrad,
                      const Eigen::MatrixXd& dhess,
                      Eigen::VectorXd& grad_accum) {
  const int L = net.n_affine();
  const int d = net.arch().input_dim;

  {
    const int l = L - 1;
    const int off = net.layer_offset(l);
    const int rows = static_cast<int>(net.weight(l).rows());
    const int cols = static_cast<int>(net.weight(l).cols());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        gA(grad_accum.data() + off, rows, cols);
    gA.noalias() += dval * ws.y[l].transpose();
    gA.noalias() += dgrad * ws.J[l].transpose();
    gA.noalias() += dhess * ws.H[l].transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad_accum.data() + off + rows * cols, rows);
    gb += dval;
    ws.ybar.noalias() = net.weight(l).transpose() * dval;
    ws.Jbar.noalias() = net.weight(l).transpose() * dgrad;
    ws.Hbar.noalias() = net.weight(l).transpose() * dhess;
  }

  for (int l = L - 2; l >= 0; --l) {
    const auto& y = ws.y[l + 1];
    const auto& M = ws.M[l + 1];
    const auto& T = ws.T[l + 1];
    const int n = static_cast<int>(y.size());
    ws.sbar = Eigen::VectorXd::Zero(n);
    ws.Mbar = Eigen::MatrixXd::Zero(n, d);
    ws.Tbar.resize(n, d * d);

    // H_i = s_i T_i - 2 y_i s_i (m_i (x) m_i) with s = 1 - y^2.
    for (int i = 0; i < n; ++i) {
      const double yi = y[i];
      const double si = 1.0 - yi * yi;
      const auto mi = M.row(i);
      double hb_dot_t = 0.0, m_hb_m = 0.0;
      for (int a = 0; a < d; ++a) {
        double row_m = 0.0, col_m = 0.0;
        for (int b = 0; b < d; ++b) {
          const double hb = ws.Hbar(i, a * d + b);
          hb_dot_t += hb * T(i, a * d + b);
          m_hb_m += hb * mi[a] * mi[b];
          row_m += hb * mi[b];
          col_m += ws.Hbar(i, b * d + a) * mi[b];
        }
        ws.Mbar(i, a) += -2.0 * yi * si * (row_m + col_m);
      }
      ws.sbar[i] += hb_dot_t - 2.0 * yi * m_hb_m;
      ws.ybar[i] += -2.0 * si * m_hb_m;
      ws.Tbar.row(i) = si * ws.Hbar.row(i);
    }

    // J_i = s_i m_i.
    ws.sbar.array() += (ws.Jbar.array() * M.array()).rowwise().sum();
    ws.Mbar += (1.0 - y.array().square()).matrix().asDiagonal() * ws.Jbar;

    // s = 1 - y^2 and y = tanh(z).
    ws.ybar.array() += -2.0 * y.array() * ws.sbar.array();
    ws.zbar = (ws.ybar.array() * (1.0 - y.array().square())).matrix();

    const int off = net.layer_offset(l);
    const int rows = static_cast<int>(net.weight(l).rows());
    const int cols = static_cast<int>(net.weight(l).cols());
    Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>>
        gA(grad_accum.data() + off, rows, cols);
    gA.noalias() += ws.zbar * ws.y[l].transpose();
    gA.noalias() += ws.Mbar * ws.J[l].transpose();
    gA.noalias() += ws.Tbar * ws.H[l].transpose();
    Eigen::Map<Eigen::VectorXd> gb(grad_accum.data() + off + rows * cols, rows);
    gb += ws.zbar;

    if (l > 0) {
      ws.ybar.noalias() = net.weight(l).transpose() * ws.zbar;
      ws.Jbar.noalias() = net.weight(l).transpose() * ws.Mbar;
      ws.Hbar.noalias() = net.weight(l).transpose() * ws.Tbar;
    }
  }
}

ParamGradient param_grad_of_functional(
    const MlpNet& net, const std::vector<Eigen::VectorXd>& points,
    const std::function<double(long, const EvalResult&)>& term_value,
    const std::function<Seeds(long, const EvalResult&)>& term_seeds) {
  if (points.empty())
    throw ConfigError("param_grad_of_functional: points must be nonempty");
  const long n = static_cast<long>(points.size());
  const long chunk = 64;
  const long nc = chunk_count(n, chunk);
  std::vector<Eigen::VectorXd> partial(nc);
  for_chunks(n, chunk, [&](long c, long lo, long hi) {
    Workspace ws;
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(net.param_count());
    for (long i = lo; i < hi; ++i) {
      EvalResult ev = eval_with_grad(net, points[i], ws);
      if (!ev.value.allFinite() || !ev.grad.allFinite())
        throw NumericError(
            "param_grad_of_functional: non-finite evaluation at point " +
                std::to_string(i),
            i);
      const double v = term_value(i, ev);
      if (!std::isfinite(v))
        throw NumericError(
            "param_grad_of_functional: non-finite term at point " +
                std::to_string(i),
            i);
      Seeds sd = term_seeds(i, ev);
      backprop_params(net, ws, sd.dval, sd.dgrad, acc);
    }
    partial[c] = std::move(acc);
  });
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(net.param_count());
  for (const auto& p : partial) grad += p;
  return grad;
}

EvalResult curl_field(const MlpNet& potential, const Eigen::VectorXd& x) {
  Workspace ws;
  return curl_field(potential, x, ws);
}

EvalResult curl_field(const MlpNet& potential, const Eigen::VectorXd& x,
                      Workspace& ws) {
  if (potential.arch().input_dim != 3 || potential.arch().output_dim != 3)
    throw ConfigError("curl_field: potential must map R^3 -> R^3, got " +
                      std::to_string(potential.arch().input_dim) + " -> " +
                      std::to_string(potential.arch().output_dim));
  EvalResult2 psi = eval_with_hessian(potential, x, ws);
  EvalResult out;
  out.value.resize(3);
  out.grad.resize(3, 3);
  // v_c = eps_{cab} d_a psi_b; dv_c/dx_j = eps_{cab} H_b(a, j).
  static constexpr int A[3] = {1, 2, 0};
  static constexpr int B[3] = {2, 0, 1};
  for (int c = 0; c < 3; ++c) {
    const int a = A[c], b = B[c];
    out.value[c] = psi.grad(b, a) - psi.grad(a, b);
    for (int j = 0; j < 3; ++j)
      out.grad(c, j) = psi.hess(b, a * 3 + j) - psi.hess(a, b * 3 + j);
  }
  return out;
}

void curl_seeds_to_potential(const Eigen::VectorXd& dval,
                             const Eigen::MatrixXd& dgrad,
                             Eigen::MatrixXd& dpsi_grad,
                             Eigen::MatrixXd& dpsi_hess) {
  dpsi_grad = Eigen::MatrixXd::Zero(3, 3);
  dpsi_hess = Eigen::MatrixXd::Zero(3, 9);
  static constexpr int A[3] = {1, 2, 0};
  static constexpr int B[3] = {2, 0, 1};
  for (int c = 0; c < 3; ++c) {
    const int a = A[c], b = B[c];
    dpsi_grad(b, a) += dval[c];
    dpsi_grad(a, b) -= dval[c];
    for (int j = 0; j < 3; ++j) {
      dpsi_hess(b, a * 3 + j) += dgrad(c, j);
      dpsi_hess(a, b * 3 + j) -= dgrad(c, j);
    }
  }
}

namespace {
constexpr uint32_t kNetMagic = 0x4d4c5031;  // "MLP1"
}

void save_net(const MlpNet& net, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("save_net: cannot open " + path);
  auto put_u32 = [&](uint32_t v) { out.write(reinterpret_cast<char*>(&v), 4); };
  auto put_f64 = [&](double v) { out.write(reinterpret_cast<char*>(&v), 8); };
  put_u32(kNetMagic);
  put_u32(static_cast<uint32_t>(net.arch().input_dim));
  put_u32(static_cast<uint32_t>(net.arch().layer_widths.size()));
  for (int w : net.arch().layer_widths) put_u32(static_cast<uint32_t>(w));
  put_u32(static_cast<uint32_t>(net.arch().output_dim));
  put_u32(net.arch().param_bound ? 1u : 0u);
  put_f64(net.arch().param_bound.value_or(0.0));
  const Eigen::VectorXd theta = net.flatten();
  put_u32(static_cast<uint32_t>(theta.size()));
  out.write(reinterpret_cast<const char*>(theta.data()),
            static_cast<std::streamsize>(theta.size() * sizeof(double)));
  if (!out) throw ConfigError("save_net: write failed for " + path);
}

MlpNet load_net(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("load_net: cannot open " + path);
  auto get_u32 = [&] {
    uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), 4);
    return v;
  };
  auto get_f64 = [&] {
    double v = 0;
    in.read(reinterpret_cast<char*>(&v), 8);
    return v;
  };
  if (get_u32() != kNetMagic)
    throw ConfigError("load_net: " + path + " is not a serialized net");
  NetArch arch;
  arch.input_dim = static_cast<int>(get_u32());
  const uint32_t nh = get_u32();
  arch.layer_widths.resize(nh);
  for (uint32_t i = 0; i < nh; ++i)
    arch.layer_widths[i] = static_cast<int>(get_u32());
  arch.output_dim = static_cast<int>(get_u32());
  const bool has_bound = get_u32() != 0;
  const double bound = get_f64();
  if (has_bound) arch.param_bound = bound;
  MlpNet net(arch);
  const uint32_t n = get_u32();
  if (static_cast<int>(n) != net.param_count())
    throw ConfigError("load_net: parameter count mismatch in " + path);
  Eigen::VectorXd theta(n);
  in.read(reinterpret_cast<char*>(theta.data()),
          static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ConfigError("load_net: truncated file " + path);
  net.unflatten(theta);
  return net;
}

}  // namespace idrm
