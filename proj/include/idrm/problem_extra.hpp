#pragma once

#include <optional>

#include "idrm/problem.hpp"

namespace idrm {

// p-Laplace problem on (0,1)^10 with an arbitrary exponent, optional
// delta-difference regularization of the pairing and optional convection
// b = e1. Test-facing: the catalog entries plaplace-2.5 / plaplace-1.5 are
// the wired benchmark instances.
ProblemSpec make_plaplace_custom(double p, std::optional<double> delta,
                                 bool convection = true);

// Field windowed by the boundary bubble prod_i 4(x_i-lo)(up-x_i)/len_i^2, so
// the result has zero trace; used to sample the zero-trace space in
// monotonicity checks of Dirichlet problems.
class BubbleField : public Field {
 public:
  BubbleField(FieldPtr inner, Domain domain)
      : inner_(std::move(inner)), domain_(std::move(domain)) {}
  int dim() const override { return inner_->dim(); }
  int components() const override { return inner_->components(); }
  EvalResult eval(const Eigen::VectorXd& x) const override;

 private:
  FieldPtr inner_;
  Domain domain_;
};

}  // namespace idrm
