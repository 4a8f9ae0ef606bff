#include "idrm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace idrm {

void Domain::validate() const {
  if (lower.size() != upper.size() || lower.size() == 0)
    throw ConfigError("Domain: lower/upper must be nonempty and equal length");
  for (int i = 0; i < dim(); ++i)
    if (!(lower[i] < upper[i]))
      throw ConfigError("Domain: lower < upper required on axis " +
                        std::to_string(i));
}

double Domain::volume() const {
  double v = 1.0;
  for (int i = 0; i < dim(); ++i) v *= upper[i] - lower[i];
  return v;
}

double Domain::face_area(int axis) const {
  double a = 1.0;
  for (int i = 0; i < dim(); ++i)
    if (i != axis) a *= upper[i] - lower[i];
  return a;
}

double Domain::surface() const {
  double s = 0.0;
  for (int i = 0; i < dim(); ++i) s += 2.0 * face_area(i);
  return s;
}

SampleBatch sample_batch(const Domain& domain, long n_interior,
                         long n_boundary, uint64_t seed) {
  domain.validate();
  if (n_interior < 1 || n_boundary < 1)
    throw ConfigError("sample_batch: counts must be >= 1");
  const int d = domain.dim();
  SampleBatch batch;
  batch.seed = seed;
  batch.volume = domain.volume();
  batch.surface = domain.surface();

  SplitMix64 rng(derive_seed(seed, "interior"));
  batch.interior.resize(n_interior, d);
  batch.t.resize(n_interior);
  for (long i = 0; i < n_interior; ++i) {
    for (int j = 0; j < d; ++j)
      batch.interior(i, j) =
          domain.lower[j] + rng.uniform_open() * (domain.upper[j] - domain.lower[j]);
    batch.t[i] = rng.uniform_open();
  }

  // Area-proportional counts per face, largest-remainder rounding.
  const int n_faces = 2 * d;
  std::vector<double> area(n_faces);
  for (int f = 0; f < n_faces; ++f) area[f] = domain.face_area(f / 2);
  const double total = std::accumulate(area.begin(), area.end(), 0.0);
  std::vector<long> count(n_faces);
  std::vector<std::pair<double, int>> frac(n_faces);
  long assigned = 0;
  for (int f = 0; f < n_faces; ++f) {
    const double share = static_cast<double>(n_boundary) * area[f] / total;
    count[f] = static_cast<long>(std::floor(share));
    frac[f] = {share - std::floor(share), f};
    assigned += count[f];
  }
  std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
    return a.first > b.first || (a.first == b.first && a.second < b.second);
  });
  for (long r = 0; r < n_boundary - assigned; ++r) count[frac[r].second]++;

  SplitMix64 brng(derive_seed(seed, "boundary"));
  batch.boundary.resize(n_boundary, d);
  long row = 0;
  for (int f = 0; f < n_faces; ++f) {
    const int axis = f / 2;
    const bool high = f % 2 == 1;
    for (long i = 0; i < count[f]; ++i, ++row) {
      for (int j = 0; j < d; ++j)
        batch.boundary(row, j) =
            domain.lower[j] + brng.uniform_open() * (domain.upper[j] - domain.lower[j]);
      batch.boundary(row, axis) = high ? domain.upper[axis] : domain.lower[axis];
    }
  }
  return batch;
}

namespace {

GridQuad make_grid(const Domain& domain, double h, bool midpoint) {
  domain.validate();
  if (h <= 0) throw ConfigError("grid_quad: h must be positive");
  GridQuad q;
  const int d = domain.dim();
  q.axis_nodes.resize(d);
  q.axis_weights.resize(d);
  for (int a = 0; a < d; ++a) {
    const double len = domain.upper[a] - domain.lower[a];
    const double cells = len / h;
    const long n_cells = static_cast<long>(std::llround(cells));
    if (n_cells < 1 || std::abs(cells - static_cast<double>(n_cells)) > 1e-12) {
      const long near = std::max<long>(1, static_cast<long>(std::llround(cells)));
      throw ConfigError("grid_quad: h = " + std::to_string(h) +
                        " does not divide edge " + std::to_string(len) +
                        "; nearest valid h = " +
                        std::to_string(len / static_cast<double>(near)));
    }
    if (midpoint) {
      q.axis_nodes[a].resize(n_cells);
      q.axis_weights[a] = Eigen::VectorXd::Constant(n_cells, h);
      for (long i = 0; i < n_cells; ++i)
        q.axis_nodes[a][i] = domain.lower[a] + (static_cast<double>(i) + 0.5) * h;
    } else {
      q.axis_nodes[a].resize(n_cells + 1);
      q.axis_weights[a] = Eigen::VectorXd::Constant(n_cells + 1, h);
      q.axis_weights[a][0] = h / 2.0;
      q.axis_weights[a][n_cells] = h / 2.0;
      for (long i = 0; i <= n_cells; ++i)
        q.axis_nodes[a][i] = domain.lower[a] + static_cast<double>(i) * h;
    }
  }
  return q;
}

}  // namespace

GridQuad grid_quad(const Domain& domain, double h) {
  return make_grid(domain, h, false);
}

GridQuad grid_quad_midpoint(const Domain& domain, double h) {
  return make_grid(domain, h, true);
}

long GridQuad::size() const {
  long n = 1;
  for (const auto& nodes : axis_nodes) n *= nodes.size();
  return n;
}

void GridQuad::node(long idx, Eigen::VectorXd& x, double& w) const {
  const int d = static_cast<int>(axis_nodes.size());
  x.resize(d);
  w = 1.0;
  for (int a = d - 1; a >= 0; --a) {
    const long n = axis_nodes[a].size();
    const long i = idx % n;
    idx /= n;
    x[a] = axis_nodes[a][i];
    w *= axis_weights[a][i];
  }
}

double GridQuad::weight_sum() const {
  double s = 1.0;
  for (const auto& w : axis_weights) s *= w.sum();
  return s;
}

McResult mc_integrate(const SampleBatch& batch,
                      const std::function<double(const Eigen::VectorXd&)>& density) {
  const long n = batch.interior.rows();
  double sum = 0, sumsq = 0;
  for (long i = 0; i < n; ++i) {
    const double v = density(batch.interior.row(i).transpose());
    if (!std::isfinite(v))
      throw NumericError("mc_integrate: non-finite density at point " +
                             std::to_string(i),
                         i);
    sum += v;
    sumsq += v * v;
  }
  McResult r;
  const double mean = sum / static_cast<double>(n);
  r.estimate = batch.volume * mean;
  if (n > 1) {
    const double var =
        std::max(0.0, (sumsq - static_cast<double>(n) * mean * mean) /
                          static_cast<double>(n - 1));
    r.std_error = batch.volume * std::sqrt(var / static_cast<double>(n));
  }
  return r;
}

}  // namespace idrm
