#include <cstdio>
#include <exception>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "idrm/report.hpp"

namespace {

idrm::ConfigMap load_base(const std::string& source) {
  if (idrm::is_preset(source)) return idrm::preset(source);
  if (std::filesystem::exists(source)) return idrm::load_config_file(source);
  std::string presets;
  for (const auto& name : idrm::preset_names()) presets += " " + name;
  throw idrm::ConfigError("'" + source +
                          "' is neither a preset nor a config file; presets:" +
                          presets);
}

void apply_overrides(idrm::ConfigMap& map, const std::vector<std::string>& kvs) {
  for (const auto& kv : kvs) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos)
      throw idrm::ConfigError("--override expects key=value, got '" + kv + "'");
    map[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Iterative deep Ritz solver for monotone elliptic PDEs"};
  app.require_subcommand(1);

  std::string source, out_dir = "out";
  long seed = -1;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "run one experiment (preset name or config file)");
  run->add_option("source", source, "preset name or config file")->required();
  run->add_option("--seed", seed, "override experiment.seed");
  run->add_option("--out", out_dir, "output directory");
  run->add_option("--override", overrides, "section.key=value overrides");

  std::string cmp_source, cmp_out = "out";
  std::vector<std::string> cmp_methods{"idrm", "pinn"};
  std::vector<long> cmp_seeds{1, 2, 3};
  std::vector<std::string> cmp_overrides;
  auto* cmp = app.add_subcommand("compare", "run several methods over seeds");
  cmp->add_option("source", cmp_source, "preset name or config file")->required();
  cmp->add_option("--methods", cmp_methods, "methods to compare");
  cmp->add_option("--seeds", cmp_seeds, "seed list");
  cmp->add_option("--out", cmp_out, "output directory");
  cmp->add_option("--override", cmp_overrides, "section.key=value overrides");

  long check_seed = 7;
  auto* chk = app.add_subcommand("check", "run the invariant self-checks");
  chk->add_option("--seed", check_seed, "seed for the randomized checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      idrm::ConfigMap map = load_base(source);
      apply_overrides(map, overrides);
      if (seed >= 0) map["experiment.seed"] = std::to_string(seed);
      const idrm::ExperimentConfig cfg = idrm::resolve_config(map);
      const idrm::RunReport rep = idrm::run_experiment(cfg, out_dir);
      std::printf("problem = %s  method = %s  seed = %llu\n", cfg.problem.c_str(),
                  cfg.method.c_str(), static_cast<unsigned long long>(cfg.seed));
      for (size_t c = 0; c < rep.final_rel_l2.size(); ++c)
        std::printf("relative L2 error [component %zu] = %.6e\n", c + 1,
                    rep.final_rel_l2[c]);
      std::printf("artifacts in %s\n", out_dir.c_str());
      if (rep.aborted_nan) {
        std::fprintf(stderr, "training aborted on non-finite loss\n");
        return 2;
      }
      return 0;
    }
    if (cmp->parsed()) {
      idrm::ConfigMap map = load_base(cmp_source);
      apply_overrides(map, cmp_overrides);
      idrm::resolve_config(map);  // validate upfront
      std::vector<uint64_t> seeds(cmp_seeds.begin(), cmp_seeds.end());
      const auto results = idrm::compare_methods(map, cmp_methods, seeds, cmp_out);
      std::printf("%-8s %-14s %s\n", "method", "median error", "note");
      for (const auto& r : results) {
        if (r.ran)
          std::printf("%-8s %-14.6e over %zu seeds\n", r.method.c_str(),
                      r.median_error, r.errors.size());
        else
          std::printf("%-8s %-14s skipped: %s\n", r.method.c_str(), "-",
                      r.skip_reason.c_str());
      }
      return 0;
    }
    if (chk->parsed()) {
      const auto results = idrm::self_check(static_cast<uint64_t>(check_seed));
      bool all = true;
      for (const auto& r : results) {
        std::printf("[%s] %-28s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(),
                    r.detail.c_str());
        all = all && r.pass;
      }
      return all ? 0 : 2;
    }
  } catch (const idrm::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const idrm::NumericError& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
