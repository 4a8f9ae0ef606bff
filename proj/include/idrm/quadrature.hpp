#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <vector>

#include "idrm/errors.hpp"
#include "idrm/rng.hpp"

namespace idrm {

// Axis-aligned hyperrectangle, the only supported geometry.
struct Domain {
  Eigen::VectorXd lower, upper;

  static Domain unit_cube(int dim) {
    Domain d;
    d.lower = Eigen::VectorXd::Zero(dim);
    d.upper = Eigen::VectorXd::Ones(dim);
    return d;
  }

  int dim() const { return static_cast<int>(lower.size()); }
  void validate() const;
  double volume() const;
  double surface() const;
  // Measure of one face orthogonal to `axis`.
  double face_area(int axis) const;
};

// Interior collocation points paired with auxiliary t-samples on (0,1),
// plus boundary points. Owns the |Omega|, |dOmega| scaling. Reproducible:
// same (domain, counts, seed) yields the identical batch.
struct SampleBatch {
  Eigen::MatrixXd interior;  // n_interior x d, strictly inside the domain
  Eigen::VectorXd t;         // auxiliary samples on (0,1), one per point
  Eigen::MatrixXd boundary;  // n_boundary x d, on faces
  double volume = 0;
  double surface = 0;
  uint64_t seed = 0;
};

// Interior points i.i.d. uniform on the domain, each paired with an
// independent uniform t in (0,1). Boundary points are stratified by face
// (area-proportional counts, largest-remainder rounding) and uniform within
// each face.
SampleBatch sample_batch(const Domain& domain, long n_interior, long n_boundary,
                         uint64_t seed);

// Tensor-product grid quadrature on a hyperrectangle.
struct GridQuad {
  std::vector<Eigen::VectorXd> axis_nodes;
  std::vector<Eigen::VectorXd> axis_weights;

  long size() const;
  // Decodes flat index into a point and its weight.
  void node(long idx, Eigen::VectorXd& x, double& w) const;
  double weight_sum() const;
};

// Composite trapezoidal rule with spacing h; h must divide every edge length
// to within 1e-12 (the error message suggests the nearest valid h).
GridQuad grid_quad(const Domain& domain, double h);

// Cell-centered (midpoint) variant with the same spacing contract. Nodes
// avoid the domain faces, which matters for integrands singular on a face.
GridQuad grid_quad_midpoint(const Domain& domain, double h);

struct McResult {
  double estimate = 0;
  double std_error = 0;
};

// Monte Carlo estimate |Omega| * mean(density over interior points) with the
// standard error |Omega| * sample_std / sqrt(N). Throws NumericError with the
// point index if the density turns non-finite.
McResult mc_integrate(const SampleBatch& batch,
                      const std::function<double(const Eigen::VectorXd&)>& density);

}  // namespace idrm
