#pragma once

#include <Eigen/Dense>
#include <functional>
#include <memory>

#include "idrm/net.hpp"

namespace idrm {

// A frozen field u: R^d -> R^m evaluable with its spatial Jacobian. Network
// snapshots, curl-wrapped potentials, analytic solutions and test ansatzes
// all implement this; losses treat anchors and exact solutions uniformly.
class Field {
 public:
  virtual ~Field() = default;
  virtual int dim() const = 0;
  virtual int components() const = 0;
  virtual EvalResult eval(const Eigen::VectorXd& x) const = 0;
};

using FieldPtr = std::shared_ptr<const Field>;

// Frozen MLP snapshot.
class MlpField : public Field {
 public:
  explicit MlpField(MlpNet net) : net_(std::move(net)) {}
  int dim() const override { return net_.arch().input_dim; }
  int components() const override { return net_.arch().output_dim; }
  EvalResult eval(const Eigen::VectorXd& x) const override {
    return eval_with_grad(net_, x);
  }
  const MlpNet& net() const { return net_; }

 private:
  MlpNet net_;
};

// Divergence-free field curl(psi) from a frozen 3->3 potential snapshot.
class CurlMlpField : public Field {
 public:
  explicit CurlMlpField(MlpNet potential) : net_(std::move(potential)) {}
  int dim() const override { return 3; }
  int components() const override { return 3; }
  EvalResult eval(const Eigen::VectorXd& x) const override {
    return curl_field(net_, x);
  }
  const MlpNet& net() const { return net_; }

 private:
  MlpNet net_;
};

// Closed-form field given by a callback filling value and Jacobian.
class AnalyticField : public Field {
 public:
  using Fn = std::function<void(const Eigen::VectorXd& x, Eigen::VectorXd& value,
                                Eigen::MatrixXd& grad)>;
  AnalyticField(int dim, int components, Fn fn)
      : dim_(dim), m_(components), fn_(std::move(fn)) {}
  int dim() const override { return dim_; }
  int components() const override { return m_; }
  EvalResult eval(const Eigen::VectorXd& x) const override {
    EvalResult r;
    r.value.setZero(m_);
    r.grad.setZero(m_, dim_);
    fn_(x, r.value, r.grad);
    return r;
  }

 private:
  int dim_, m_;
  Fn fn_;
};

// Identically zero field.
class ZeroField : public Field {
 public:
  ZeroField(int dim, int components) : dim_(dim), m_(components) {}
  int dim() const override { return dim_; }
  int components() const override { return m_; }
  EvalResult eval(const Eigen::VectorXd&) const override {
    EvalResult r;
    r.value.setZero(m_);
    r.grad.setZero(m_, dim_);
    return r;
  }

 private:
  int dim_, m_;
};

}  // namespace idrm
