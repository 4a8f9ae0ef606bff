#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "idrm/idrm.hpp"

namespace idrm {

// Flat key = value configuration with [section] grouping; keys are stored as
// "section.key". CLI --override entries replace file/preset values.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::string& path);

// Built-in experiment presets, one per catalog benchmark.
std::vector<std::string> preset_names();
ConfigMap preset(const std::string& name);
bool is_preset(const std::string& name);

// Fully resolved experiment configuration.
struct ExperimentConfig {
  std::string problem;
  std::string method = "idrm";  // idrm | pinn
  uint64_t seed = 1;

  std::vector<int> hidden;
  std::optional<double> param_bound;

  long n_interior = 10000;
  long n_boundary = 800;
  double grid_h = 0.05;
  std::string grid_rule = "midpoint";  // midpoint | trapezoid

  IdrmConfig idrm;
  AdamConfig adam;

  long pinn_steps = 5000;
  double pinn_sigma = 100.0;
  long pinn_n_interior = 0;  // 0 = use n_interior

  double time_T = 0.5;
  int time_steps = 5;

  long n_eval = 50000;
  bool write_slice = true;

  ConfigMap echo;  // resolved key set, reproduces the run
};

// Validates and types a ConfigMap; lists every violation before throwing.
ExperimentConfig resolve_config(const ConfigMap& map);

struct LoopRecord {
  int k;
  double lambda_k, sigma_k, phi_star;
  double final_loss;
  LossBreakdown breakdown;
  std::vector<double> rel_l2;  // per component
};

struct RunReport {
  ExperimentConfig config;
  std::string prng = kPrngId;
  std::vector<LoopRecord> loops;
  std::vector<double> final_rel_l2;  // per component (terminal level for marching)
  std::vector<std::pair<double, double>> time_errors;  // (t, rel error) marching
  double wallclock_seconds = 0;
  bool aborted_nan = false;
  std::string trajectory_csv, loops_csv, slice_csv, net_bin;
};

// Relative L2 error per component of `approx` against `exact` on the given
// points/weights; errors out when an exact-norm estimate vanishes.
std::vector<double> relative_l2_error(const Field& approx, const Field& exact,
                                      const Eigen::MatrixXd& points,
                                      const Eigen::VectorXd& weights);

// Seeded Monte Carlo evaluation set (disjoint-by-tag from training batches).
Eigen::MatrixXd eval_points(const Domain& domain, long n, uint64_t seed);

// Runs the configured experiment and writes report.json, trajectory.csv,
// loops.csv, slice.csv and net.bin under out_dir.
RunReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir);

struct MethodResult {
  std::string method;
  bool ran = false;
  std::string skip_reason;
  std::vector<double> errors;  // per seed (first component)
  double median_error = 0;
};

// Runs each applicable method over the seeds; returns per-method medians.
// Works from the raw key/value map so method-specific keys (pinn.hidden,
// pinn.learning_rate) resolve per method. Incompatible method/problem
// combinations are skipped with a reason.
std::vector<MethodResult> compare_methods(const ConfigMap& base,
                                          const std::vector<std::string>& methods,
                                          const std::vector<uint64_t>& seeds,
                                          const std::string& out_dir);

// Versioned CSV reading used by the tooling; rejects unknown schema versions.
std::vector<std::vector<double>> read_versioned_csv(const std::string& path,
                                                    const std::string& expect_schema);

struct CheckResult {
  std::string name;
  bool pass;
  std::string detail;
};

// Fast invariant suite behind the `check` CLI verb: gradient checks,
// curl divergence, annihilation, Ritz equivalence, pointwise inequalities,
// exponent formulas, catalog monotonicity.
std::vector<CheckResult> self_check(uint64_t seed);

}  // namespace idrm
