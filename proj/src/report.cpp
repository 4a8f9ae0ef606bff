#include "idrm/report.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "idrm/problem_extra.hpp"

namespace idrm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::istringstream in(text);
  std::string line, section;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) +
                        ": expected key = value, got '" + line + "'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) +
                                       ": empty key");
    map[section.empty() ? key : section + "." + key] = value;
  }
  return map;
}

ConfigMap load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

// ---------------------------------------------------------------------------
// Presets mirroring the benchmark table settings.
// ---------------------------------------------------------------------------

std::vector<std::string> preset_names() {
  return {"conv-diffusion-10d", "plaplace-2.5", "plaplace-1.5",
          "quasilinear-heat-10d", "navier-stokes-3d"};
}

bool is_preset(const std::string& name) {
  const auto names = preset_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

ConfigMap preset(const std::string& name) {
  ConfigMap m;
  m["experiment.problem"] = name;
  m["experiment.method"] = "idrm";
  m["experiment.seed"] = "1";
  m["sampling.n_interior"] = "10000";
  m["sampling.n_boundary"] = "800";
  m["sampling.resample_every_outer"] = "true";
  m["idrm.lambda0"] = "1.0";
  m["idrm.c_s"] = "1.0";
  m["idrm.alpha"] = "0";
  m["idrm.eps_tol"] = "0";
  m["idrm.sigma_growth"] = "1.0";
  m["idrm.antithetic_t"] = "true";
  m["adam.beta1"] = "0.9";
  m["adam.beta2"] = "0.999";
  m["adam.epsilon"] = "1e-8";
  m["eval.n_eval"] = "50000";
  m["eval.slice"] = "true";
  if (name == "conv-diffusion-10d") {
    m["net.hidden"] = "20,20,20";
    m["idrm.mu"] = "0";
    m["idrm.sigma0"] = "100.0";
    m["idrm.outer_loops"] = "8";
    m["adam.learning_rate"] = "3.0e-3";
    m["adam.inner_steps"] = "500";
    m["pinn.steps"] = "5000";
    m["pinn.sigma"] = "100.0";
    m["pinn.learning_rate"] = "5.0e-3";
  } else if (name == "plaplace-2.5") {
    m["net.hidden"] = "50,50,50,50,50,50";
    m["idrm.mu"] = "0";
    m["idrm.sigma0"] = "100.0";
    m["idrm.outer_loops"] = "8";
    m["adam.learning_rate"] = "3.0e-3";
    m["adam.inner_steps"] = "500";
  } else if (name == "plaplace-1.5") {
    m["net.hidden"] = "16,32,32,16";
    m["idrm.mu"] = "2.0";
    m["idrm.sigma0"] = "40.0";
    m["idrm.outer_loops"] = "8";
    m["adam.learning_rate"] = "5.0e-3";
    m["adam.inner_steps"] = "350";
    m["pinn.steps"] = "2700";
    m["pinn.sigma"] = "40.0";
    m["pinn.hidden"] = "16,32,16";
    m["pinn.learning_rate"] = "5.0e-3";
  } else if (name == "quasilinear-heat-10d") {
    m["net.hidden"] = "20,40,40,20";
    m["idrm.mu"] = "0.01";
    m["idrm.sigma0"] = "100.0";
    m["idrm.outer_loops"] = "4";
    m["adam.learning_rate"] = "3.0e-3";
    m["adam.inner_steps"] = "300";
    m["time.T"] = "0.5";
    m["time.n_steps"] = "5";
  } else if (name == "navier-stokes-3d") {
    m["net.hidden"] = "10,10";
    m["idrm.mu"] = "0";
    m["idrm.sigma0"] = "10.0";
    m["idrm.sigma_growth"] = "1.5";
    m["idrm.outer_loops"] = "8";
    m["adam.learning_rate"] = "3.0e-3";
    m["adam.inner_steps"] = "500";
    m["sampling.grid_h"] = "0.05";
    m["sampling.grid_rule"] = "midpoint";
  } else {
    std::string known;
    for (const auto& n : preset_names()) known += " " + n;
    throw ConfigError("unknown preset '" + name + "'; valid presets:" + known);
  }
  return m;
}

// ---------------------------------------------------------------------------
// Typed resolution.
// ---------------------------------------------------------------------------

namespace {

struct Resolver {
  const ConfigMap& map;
  std::vector<std::string> errors;
  std::vector<std::string> consumed;

  std::optional<std::string> raw(const std::string& key) {
    consumed.push_back(key);
    const auto it = map.find(key);
    if (it == map.end()) return std::nullopt;
    return it->second;
  }
  std::string str(const std::string& key, const std::string& dflt) {
    return raw(key).value_or(dflt);
  }
  double num(const std::string& key, double dflt) {
    const auto v = raw(key);
    if (!v) return dflt;
    try {
      size_t pos = 0;
      const double x = std::stod(*v, &pos);
      if (pos != v->size()) throw std::invalid_argument("");
      return x;
    } catch (...) {
      errors.push_back(key + ": expected a number, got '" + *v + "'");
      return dflt;
    }
  }
  long integer(const std::string& key, long dflt) {
    const double x = num(key, static_cast<double>(dflt));
    if (x != std::floor(x))
      errors.push_back(key + ": expected an integer");
    return static_cast<long>(x);
  }
  bool boolean(const std::string& key, bool dflt) {
    const auto v = raw(key);
    if (!v) return dflt;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    errors.push_back(key + ": expected true/false, got '" + *v + "'");
    return dflt;
  }
  std::vector<int> widths(const std::string& key, const std::string& dflt) {
    std::string v = str(key, dflt);
    std::vector<int> out;
    std::stringstream ss(v);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      tok = trim(tok);
      if (tok.empty()) continue;
      try {
        out.push_back(std::stoi(tok));
      } catch (...) {
        errors.push_back(key + ": bad width '" + tok + "'");
      }
    }
    if (out.empty()) errors.push_back(key + ": no widths given");
    return out;
  }
};

}  // namespace

ExperimentConfig resolve_config(const ConfigMap& map) {
  Resolver r{map, {}, {}};
  ExperimentConfig cfg;
  cfg.problem = r.str("experiment.problem", "");
  cfg.method = r.str("experiment.method", "idrm");
  cfg.seed = static_cast<uint64_t>(r.integer("experiment.seed", 1));

  if (cfg.problem.empty())
    r.errors.push_back("experiment.problem: required (one of the catalog names)");
  else {
    const auto names = catalog_names();
    if (std::find(names.begin(), names.end(), cfg.problem) == names.end()) {
      std::string known;
      for (const auto& n : names) known += " " + n;
      r.errors.push_back("experiment.problem: unknown '" + cfg.problem +
                         "'; valid:" + known);
    }
  }
  if (cfg.method != "idrm" && cfg.method != "pinn")
    r.errors.push_back("experiment.method: expected idrm or pinn");

  cfg.hidden = r.widths("net.hidden", "20,20,20");
  const double pb = r.num("net.param_bound", 0.0);
  if (pb > 0) cfg.param_bound = pb;

  cfg.n_interior = r.integer("sampling.n_interior", 10000);
  cfg.n_boundary = r.integer("sampling.n_boundary", 800);
  cfg.idrm.resample_every_outer = r.boolean("sampling.resample_every_outer", true);
  cfg.grid_h = r.num("sampling.grid_h", 0.05);
  cfg.grid_rule = r.str("sampling.grid_rule", "midpoint");
  if (cfg.grid_rule != "midpoint" && cfg.grid_rule != "trapezoid")
    r.errors.push_back("sampling.grid_rule: expected midpoint or trapezoid");

  cfg.idrm.lambda0 = r.num("idrm.lambda0", 1.0);
  cfg.idrm.c_s = r.num("idrm.c_s", 1.0);
  const std::string alpha = r.str("idrm.alpha", "0");
  if (alpha == "auto") {
    cfg.idrm.alpha_auto = true;
  } else {
    try {
      cfg.idrm.alpha = std::stod(alpha);
    } catch (...) {
      r.errors.push_back("idrm.alpha: expected a number or 'auto'");
    }
  }
  cfg.idrm.mu = r.num("idrm.mu", 0.0);
  cfg.idrm.eps_tol = r.num("idrm.eps_tol", 0.0);
  cfg.idrm.outer_loops = static_cast<int>(r.integer("idrm.outer_loops", 8));
  cfg.idrm.sigma0 = r.num("idrm.sigma0", 100.0);
  cfg.idrm.sigma_growth = r.num("idrm.sigma_growth", 1.0);
  cfg.idrm.antithetic_t = r.boolean("idrm.antithetic_t", true);

  cfg.adam.learning_rate = r.num("adam.learning_rate", 3.0e-3);
  cfg.adam.beta1 = r.num("adam.beta1", 0.9);
  cfg.adam.beta2 = r.num("adam.beta2", 0.999);
  cfg.adam.epsilon = r.num("adam.epsilon", 1e-8);
  cfg.adam.max_steps = static_cast<int>(r.integer("adam.inner_steps", 500));
  const double clip = r.num("adam.grad_clip", 0.0);
  if (clip > 0) cfg.adam.grad_clip = clip;
  cfg.adam.project_param_bound = r.boolean("adam.project_param_bound", false);

  cfg.pinn_steps = r.integer("pinn.steps", 5000);
  cfg.pinn_sigma = r.num("pinn.sigma", 100.0);
  cfg.pinn_n_interior = r.integer("pinn.n_interior", 0);

  cfg.time_T = r.num("time.T", 0.5);
  cfg.time_steps = static_cast<int>(r.integer("time.n_steps", 5));

  cfg.n_eval = r.integer("eval.n_eval", 50000);
  cfg.write_slice = r.boolean("eval.slice", true);

  // PINN-specific net/lr overrides live under pinn.* and are consumed when
  // the method is pinn.
  if (cfg.method == "pinn") {
    if (map.count("pinn.hidden")) cfg.hidden = r.widths("pinn.hidden", "");
    cfg.adam.learning_rate =
        r.num("pinn.learning_rate", cfg.adam.learning_rate);
  } else {
    r.raw("pinn.hidden");
    r.raw("pinn.learning_rate");
  }

  for (const auto& [key, value] : map) {
    if (std::find(r.consumed.begin(), r.consumed.end(), key) == r.consumed.end())
      r.errors.push_back(key + ": unknown key");
    (void)value;
  }

  if (!r.errors.empty()) {
    std::string msg = "configuration errors:";
    for (const auto& e : r.errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }

  // Materialize every resolved value (defaults included) so the echo alone
  // reproduces the run.
  auto fnum = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  auto fwidths = [](const std::vector<int>& w) {
    std::string s;
    for (size_t i = 0; i < w.size(); ++i)
      s += (i ? "," : "") + std::to_string(w[i]);
    return s;
  };
  ConfigMap echo;
  echo["experiment.problem"] = cfg.problem;
  echo["experiment.method"] = cfg.method;
  echo["experiment.seed"] = std::to_string(cfg.seed);
  echo["net.hidden"] = fwidths(cfg.hidden);
  if (cfg.param_bound) echo["net.param_bound"] = fnum(*cfg.param_bound);
  echo["sampling.n_interior"] = std::to_string(cfg.n_interior);
  echo["sampling.n_boundary"] = std::to_string(cfg.n_boundary);
  echo["sampling.resample_every_outer"] =
      cfg.idrm.resample_every_outer ? "true" : "false";
  echo["sampling.grid_h"] = fnum(cfg.grid_h);
  echo["sampling.grid_rule"] = cfg.grid_rule;
  echo["idrm.lambda0"] = fnum(cfg.idrm.lambda0);
  echo["idrm.c_s"] = fnum(cfg.idrm.c_s);
  echo["idrm.alpha"] = cfg.idrm.alpha_auto ? "auto" : fnum(cfg.idrm.alpha);
  echo["idrm.mu"] = fnum(cfg.idrm.mu);
  echo["idrm.eps_tol"] = fnum(cfg.idrm.eps_tol);
  echo["idrm.outer_loops"] = std::to_string(cfg.idrm.outer_loops);
  echo["idrm.sigma0"] = fnum(cfg.idrm.sigma0);
  echo["idrm.sigma_growth"] = fnum(cfg.idrm.sigma_growth);
  echo["idrm.antithetic_t"] = cfg.idrm.antithetic_t ? "true" : "false";
  echo["adam.learning_rate"] = fnum(cfg.adam.learning_rate);
  echo["adam.beta1"] = fnum(cfg.adam.beta1);
  echo["adam.beta2"] = fnum(cfg.adam.beta2);
  echo["adam.epsilon"] = fnum(cfg.adam.epsilon);
  echo["adam.inner_steps"] = std::to_string(cfg.adam.max_steps);
  if (cfg.adam.grad_clip) echo["adam.grad_clip"] = fnum(*cfg.adam.grad_clip);
  echo["adam.project_param_bound"] =
      cfg.adam.project_param_bound ? "true" : "false";
  echo["pinn.steps"] = std::to_string(cfg.pinn_steps);
  echo["pinn.sigma"] = fnum(cfg.pinn_sigma);
  echo["pinn.n_interior"] = std::to_string(cfg.pinn_n_interior);
  echo["time.T"] = fnum(cfg.time_T);
  echo["time.n_steps"] = std::to_string(cfg.time_steps);
  echo["eval.n_eval"] = std::to_string(cfg.n_eval);
  echo["eval.slice"] = cfg.write_slice ? "true" : "false";
  cfg.echo = std::move(echo);
  return cfg;
}

// ---------------------------------------------------------------------------
// Metrics.
// ---------------------------------------------------------------------------

Eigen::MatrixXd eval_points(const Domain& domain, long n, uint64_t seed) {
  SplitMix64 rng(seed);
  const int d = domain.dim();
  Eigen::MatrixXd pts(n, d);
  for (long i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j)
      pts(i, j) = domain.lower[j] +
                  rng.uniform_open() * (domain.upper[j] - domain.lower[j]);
  return pts;
}

std::vector<double> relative_l2_error(const Field& approx, const Field& exact,
                                      const Eigen::MatrixXd& points,
                                      const Eigen::VectorXd& weights) {
  const int m = exact.components();
  Eigen::VectorXd num = Eigen::VectorXd::Zero(m);
  Eigen::VectorXd den = Eigen::VectorXd::Zero(m);
  for (long i = 0; i < points.rows(); ++i) {
    const Eigen::VectorXd x = points.row(i).transpose();
    const Eigen::VectorXd a = approx.eval(x).value;
    const Eigen::VectorXd e = exact.eval(x).value;
    const double w = weights.size() > 0 ? weights[i] : 1.0;
    for (int c = 0; c < m; ++c) {
      num[c] += w * (a[c] - e[c]) * (a[c] - e[c]);
      den[c] += w * e[c] * e[c];
    }
  }
  std::vector<double> out(m);
  for (int c = 0; c < m; ++c) {
    if (den[c] == 0.0)
      throw NumericError("relative_l2_error: exact-norm estimate is zero");
    out[c] = std::sqrt(num[c] / den[c]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Artifact writers.
// ---------------------------------------------------------------------------

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_trajectory_csv(const std::string& path,
                          const std::vector<TrainStep>& steps,
                          const std::vector<long>& loop_of_step) {
  std::ofstream out(path);
  out << "# idrm-trajectory v1\n";
  out << "step,loop,loss,grad_norm\n";
  for (size_t i = 0; i < steps.size(); ++i)
    out << steps[i].step << "," << (i < loop_of_step.size() ? loop_of_step[i] : 0)
        << "," << fmt(steps[i].loss) << "," << fmt(steps[i].grad_norm) << "\n";
}

void write_loops_csv(const std::string& path, const std::vector<LoopRecord>& loops) {
  std::ofstream out(path);
  out << "# idrm-loops v1\n";
  out << "iter,i1,i2,i3,boundary,total\n";
  for (const auto& l : loops)
    out << l.k << "," << fmt(l.breakdown.i1_term) << "," << fmt(l.breakdown.i2_term)
        << "," << fmt(l.breakdown.i3_term) << "," << fmt(l.breakdown.boundary_term)
        << "," << fmt(l.breakdown.total) << "\n";
}

void write_slice_csv(const std::string& path, const Field& pred,
                     const Field* exact, const Domain& domain) {
  std::ofstream out(path);
  out << "# idrm-slice v1\n";
  const int m = pred.components();
  out << "x1,x2";
  for (int c = 0; c < m; ++c) out << ",exact_" << c + 1;
  for (int c = 0; c < m; ++c) out << ",pred_" << c + 1;
  out << "\n";
  const int n = 101;
  Eigen::VectorXd x = 0.5 * (domain.lower + domain.upper);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      x[0] = domain.lower[0] +
             (domain.upper[0] - domain.lower[0]) * static_cast<double>(i) / (n - 1);
      x[1] = domain.lower[1] +
             (domain.upper[1] - domain.lower[1]) * static_cast<double>(j) / (n - 1);
      const Eigen::VectorXd pv = pred.eval(x).value;
      out << fmt(x[0]) << "," << fmt(x[1]);
      if (exact) {
        const Eigen::VectorXd ev = exact->eval(x).value;
        for (int c = 0; c < m; ++c) out << "," << fmt(ev[c]);
      } else {
        for (int c = 0; c < m; ++c) out << ",nan";
      }
      for (int c = 0; c < m; ++c) out << "," << fmt(pv[c]);
      out << "\n";
    }
  }
}

nlohmann::json report_json(const RunReport& rep) {
  nlohmann::json j;
  j["schema"] = "idrm-report v1";
  j["prng"] = rep.prng;
  j["seed_derivation"] =
      "streams derive from experiment.seed via derive_seed(seed, tag, k); "
      "tags: init, batch, phi-eval, eval, level";
  nlohmann::json cfg = nlohmann::json::object();
  for (const auto& [k, v] : rep.config.echo) cfg[k] = v;
  j["config"] = cfg;
  j["loops"] = nlohmann::json::array();
  for (const auto& l : rep.loops) {
    nlohmann::json jl;
    jl["k"] = l.k;
    jl["lambda"] = l.lambda_k;
    jl["sigma"] = l.sigma_k;
    jl["phi_star"] = l.phi_star;
    jl["final_loss"] = l.final_loss;
    jl["i1"] = l.breakdown.i1_term;
    jl["i2"] = l.breakdown.i2_term;
    jl["i3"] = l.breakdown.i3_term;
    jl["boundary"] = l.breakdown.boundary_term;
    if (!l.rel_l2.empty()) jl["relative_l2_error"] = l.rel_l2;
    j["loops"].push_back(jl);
  }
  if (!rep.time_errors.empty()) {
    j["time_errors"] = nlohmann::json::array();
    for (const auto& [t, e] : rep.time_errors)
      j["time_errors"].push_back({{"t", t}, {"relative_l2_error", e}});
  }
  j["final"] = {{"relative_l2_error", rep.final_rel_l2},
                {"wallclock_seconds", rep.wallclock_seconds},
                {"aborted_nan", rep.aborted_nan}};
  j["artifacts"] = {{"trajectory", rep.trajectory_csv},
                    {"loops", rep.loops_csv},
                    {"slice", rep.slice_csv},
                    {"net", rep.net_bin}};
  return j;
}

std::vector<long> loops_of_steps(const std::vector<OuterSummary>& history) {
  std::vector<long> loop_of_step;
  for (const auto& h : history)
    for (long s = 0; s < h.inner_steps; ++s) loop_of_step.push_back(h.k);
  return loop_of_step;
}

ProblemSpec build_problem(const ExperimentConfig& cfg) {
  return catalog(cfg.problem);
}

NetArch build_arch(const ExperimentConfig& cfg, const ProblemSpec& spec) {
  NetArch arch;
  const bool curl = spec.n_components == 3;
  arch.input_dim = curl ? 3 : spec.domain.dim();
  arch.output_dim = curl ? 3 : spec.n_components;
  arch.layer_widths = cfg.hidden;
  arch.param_bound = cfg.param_bound;
  return arch;
}

}  // namespace

std::vector<std::vector<double>> read_versioned_csv(const std::string& path,
                                                    const std::string& expect_schema) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError(path + ": empty file");
  if (trim(line) != "# " + expect_schema)
    throw ConfigError(path + ": unknown schema '" + line + "', expected '# " +
                      expect_schema + "'");
  std::getline(in, line);  // column header
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string tok;
    while (std::getline(ss, tok, ',')) row.push_back(std::stod(tok));
    rows.push_back(std::move(row));
  }
  return rows;
}

RunReport run_experiment(const ExperimentConfig& cfg, const std::string& out_dir) {
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(out_dir);

  RunReport rep;
  rep.config = cfg;
  rep.trajectory_csv = out_dir + "/trajectory.csv";
  rep.loops_csv = out_dir + "/loops.csv";
  rep.slice_csv = out_dir + "/slice.csv";
  rep.net_bin = out_dir + "/net.bin";

  const ProblemSpec spec = build_problem(cfg);
  const bool curl = spec.n_components == 3;
  const bool grid = cfg.problem == "navier-stokes-3d";
  const bool marching = cfg.problem == "quasilinear-heat-10d";
  const NetArch arch = build_arch(cfg, spec);
  MlpNet net0 = MlpNet::glorot(arch, derive_seed(cfg.seed, "init"));
  // Reference for the slice artifact: the terminal-time solution for the
  // marching problem, the stationary solution otherwise.
  const FieldPtr slice_exact =
      marching ? quasilinear_exact_field(cfg.time_T) : spec.exact;

  // Evaluation set: seeded Monte Carlo for high-dimensional problems, the
  // cell-centered grid for the 3-d problem.
  Eigen::MatrixXd epts;
  Eigen::VectorXd ewts;
  if (grid) {
    const GridQuad gq = grid_quad_midpoint(spec.domain, cfg.grid_h);
    epts.resize(gq.size(), 3);
    ewts.resize(gq.size());
    Eigen::VectorXd x;
    double w;
    for (long i = 0; i < gq.size(); ++i) {
      gq.node(i, x, w);
      epts.row(i) = x.transpose();
      ewts[i] = w;
    }
  } else {
    epts = eval_points(spec.domain, cfg.n_eval, derive_seed(cfg.seed, "eval"));
    ewts = Eigen::VectorXd();
  }

  auto field_error = [&](const Field& f) {
    return relative_l2_error(f, *spec.exact, epts, ewts);
  };

  MlpNet final_net = net0;
  std::vector<TrainStep> trajectory;
  std::vector<long> loop_of_step;

  if (cfg.method == "pinn") {
    if (!spec.strong)
      throw ConfigError(cfg.problem + ": PINN requires a strong form (available "
                        "for conv-diffusion-10d and regularized plaplace-1.5)");
    if (spec.p_exponent < 2.0 && !spec.regularization)
      throw ConfigError(cfg.problem + ": PINN rejected for p < 2 without "
                        "regularization");
    const long n = cfg.pinn_n_interior > 0 ? cfg.pinn_n_interior : cfg.n_interior;
    const SampleBatch batch = sample_batch(spec.domain, n, cfg.n_boundary,
                                           derive_seed(cfg.seed, "batch", 0));
    const LossQuadrature quad = loss_quadrature(batch, false);
    AdamConfig adam = cfg.adam;
    adam.max_steps = static_cast<int>(cfg.pinn_steps);
    LossClosure closure = [&](const MlpNet& n_, Eigen::VectorXd* g) {
      if (!g) return pinn_loss(spec, n_, quad, cfg.pinn_sigma);
      return pinn_loss_grad(spec, n_, quad, cfg.pinn_sigma, *g);
    };
    MlpNet net = net0;
    TrainTrace trace = minimize(closure, net, adam);
    rep.aborted_nan = trace.nan_truncated;
    final_net = net;
    trajectory = trace.steps;
    loop_of_step.assign(trajectory.size(), 0);
    rep.final_rel_l2 = field_error(MlpField(final_net));
  } else if (marching) {
    TimeMarchResult tm =
        run_time_marching(cfg.time_T, cfg.time_steps, net0, cfg.idrm, cfg.adam,
                          cfg.n_interior, cfg.n_boundary, cfg.seed);
    long step_base = 0;
    for (size_t lvl = 0; lvl < tm.levels.size(); ++lvl) {
      const auto& res = tm.levels[lvl];
      rep.aborted_nan = rep.aborted_nan || res.aborted_nan;
      for (const auto& s : res.trajectory)
        trajectory.push_back({step_base + s.step, s.loss, s.grad_norm});
      for (const auto& h : res.history) {
        LoopRecord rec;
        rec.k = static_cast<int>(rep.loops.size());
        rec.lambda_k = h.lambda_k;
        rec.sigma_k = h.sigma_k;
        rec.phi_star = h.phi_star;
        rec.final_loss = h.final_total;
        rec.breakdown = h.final_breakdown;
        rep.loops.push_back(rec);
        for (long s = 0; s < h.inner_steps; ++s)
          loop_of_step.push_back(rec.k);
      }
      step_base += static_cast<long>(res.trajectory.size());
      const MlpField level_field(res.final_net);
      const FieldPtr exact_t = quasilinear_exact_field(tm.times[lvl]);
      const double err =
          relative_l2_error(level_field, *exact_t, epts, ewts)[0];
      rep.time_errors.emplace_back(tm.times[lvl], err);
    }
    final_net = tm.levels.back().final_net;
    rep.final_rel_l2 = {rep.time_errors.back().second};
  } else {
    BatchProvider batches;
    if (grid) {
      batches = grid_provider(spec.domain, cfg.grid_h, cfg.grid_rule == "midpoint",
                              {{2, 0}});  // boundary data singular on x3 = 0
    } else {
      batches = mc_provider(spec.domain, cfg.n_interior, cfg.n_boundary, cfg.seed,
                            cfg.idrm.resample_every_outer, cfg.idrm.antithetic_t);
    }
    LoopObserver observer = [&](const OuterSummary& h, const MlpNet& n) {
      LoopRecord rec;
      rec.k = h.k;
      rec.lambda_k = h.lambda_k;
      rec.sigma_k = h.sigma_k;
      rec.phi_star = h.phi_star;
      rec.final_loss = h.final_total;
      rec.breakdown = h.final_breakdown;
      if (curl)
        rec.rel_l2 = field_error(CurlMlpField(n));
      else
        rec.rel_l2 = field_error(MlpField(n));
      rep.loops.push_back(rec);
    };
    IdrmRunResult res =
        run_idrm(spec, net0, cfg.idrm, cfg.adam, batches, {}, observer);
    rep.aborted_nan = res.aborted_nan;
    final_net = res.final_net;
    trajectory = res.trajectory;
    loop_of_step = loops_of_steps(res.history);
    rep.final_rel_l2 = rep.loops.empty() ? std::vector<double>()
                                         : rep.loops.back().rel_l2;
  }

  write_trajectory_csv(rep.trajectory_csv, trajectory, loop_of_step);
  write_loops_csv(rep.loops_csv, rep.loops);
  save_net(final_net, rep.net_bin);
  if (cfg.write_slice) {
    if (curl)
      write_slice_csv(rep.slice_csv, CurlMlpField(final_net), slice_exact.get(),
                      spec.domain);
    else
      write_slice_csv(rep.slice_csv, MlpField(final_net), slice_exact.get(),
                      spec.domain);
  } else {
    rep.slice_csv.clear();
  }

  rep.wallclock_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ofstream jout(out_dir + "/report.json");
  jout << report_json(rep).dump(2) << "\n";
  return rep;
}

std::vector<MethodResult> compare_methods(const ConfigMap& base,
                                          const std::vector<std::string>& methods,
                                          const std::vector<uint64_t>& seeds,
                                          const std::string& out_dir) {
  const auto it = base.find("experiment.problem");
  const std::string problem = it == base.end() ? "" : it->second;
  const ProblemSpec spec = catalog(problem);
  std::vector<MethodResult> results;
  for (const auto& method : methods) {
    MethodResult mr;
    mr.method = method;
    if (method == "pinn") {
      if (!spec.strong) {
        mr.skip_reason = "no strong form for " + problem;
        results.push_back(mr);
        continue;
      }
      if (spec.p_exponent < 2.0 && !spec.regularization) {
        mr.skip_reason = "p < 2 without regularization";
        results.push_back(mr);
        continue;
      }
    } else if (method != "idrm") {
      mr.skip_reason = "unknown method";
      results.push_back(mr);
      continue;
    }
    for (uint64_t seed : seeds) {
      ConfigMap map = base;
      map["experiment.method"] = method;
      map["experiment.seed"] = std::to_string(seed);
      const ExperimentConfig cfg = resolve_config(map);
      const std::string dir =
          out_dir + "/" + method + "-seed" + std::to_string(seed);
      RunReport rep = run_experiment(cfg, dir);
      mr.errors.push_back(rep.final_rel_l2.empty() ? NAN : rep.final_rel_l2[0]);
    }
    std::vector<double> sorted = mr.errors;
    std::sort(sorted.begin(), sorted.end());
    const size_t n = sorted.size();
    mr.median_error = n % 2 == 1 ? sorted[n / 2]
                                 : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    mr.ran = true;
    results.push_back(mr);
  }

  std::ofstream csv(out_dir + "/comparison.csv");
  csv << "# idrm-comparison v1\n";
  csv << "method,median_error,seeds,skip_reason\n";
  for (const auto& mr : results) {
    csv << mr.method << ",";
    if (mr.ran)
      csv << fmt(mr.median_error);
    csv << "," << mr.errors.size() << "," << mr.skip_reason << "\n";
  }
  return results;
}

}  // namespace idrm
