#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "idrm/report.hpp"

using namespace idrm;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

FieldPtr const_field(int d, double v) {
  return std::make_shared<AnalyticField>(
      d, 1, [v](const Eigen::VectorXd&, Eigen::VectorXd& val, Eigen::MatrixXd&) {
        val[0] = v;
      });
}

ConfigMap tiny_run_config() {
  ConfigMap m = preset("conv-diffusion-10d");
  m["sampling.n_interior"] = "64";
  m["sampling.n_boundary"] = "16";
  m["net.hidden"] = "4,4";
  m["adam.inner_steps"] = "5";
  m["idrm.outer_loops"] = "2";
  m["eval.n_eval"] = "200";
  m["eval.slice"] = "false";
  return m;
}

}  // namespace

TEST_CASE("relative error of the exact field is zero, of the zero field one") {
  const Domain dom = Domain::unit_cube(2);
  const Eigen::MatrixXd pts = eval_points(dom, 500, 3);
  auto exact = const_field(2, 1.0);
  CHECK(relative_l2_error(*exact, *exact, pts, Eigen::VectorXd())[0] == 0.0);
  const ZeroField zero(2, 1);
  CHECK(relative_l2_error(zero, *exact, pts, Eigen::VectorXd())[0] ==
        doctest::Approx(1.0).epsilon(1e-14));
  auto shifted = const_field(2, 1.1);
  CHECK(relative_l2_error(*shifted, *exact, pts, Eigen::VectorXd())[0] ==
        doctest::Approx(0.1).epsilon(1e-12));
}

TEST_CASE("zero exact norm is an error") {
  const Domain dom = Domain::unit_cube(2);
  const Eigen::MatrixXd pts = eval_points(dom, 10, 5);
  auto zero = const_field(2, 0.0);
  CHECK_THROWS_AS(relative_l2_error(*zero, *zero, pts, Eigen::VectorXd()),
                  NumericError);
}

TEST_CASE("unknown preset lists the valid names") {
  CHECK_THROWS_WITH_AS(preset("bogus"), doctest::Contains("conv-diffusion-10d"),
                       ConfigError);
}

TEST_CASE("config errors are collected exhaustively") {
  ConfigMap m = preset("conv-diffusion-10d");
  m["experiment.method"] = "sorcery";
  m["idrm.outer_loops"] = "2.5";
  m["nonsense.key"] = "1";
  try {
    resolve_config(m);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("experiment.method") != std::string::npos);
    CHECK(what.find("idrm.outer_loops") != std::string::npos);
    CHECK(what.find("nonsense.key") != std::string::npos);
  }
}

TEST_CASE("config file round-trip with sections and comments") {
  const ConfigMap m = parse_config_text(
      "# comment\n[experiment]\nproblem = plaplace-1.5  # inline\nseed = 9\n"
      "[net]\nhidden = 8,8\n");
  CHECK(m.at("experiment.problem") == "plaplace-1.5");
  CHECK(m.at("experiment.seed") == "9");
  CHECK(m.at("net.hidden") == "8,8");
  CHECK_THROWS_AS(parse_config_text("not a key value line\n"), ConfigError);
}

TEST_CASE("alpha accepts numbers and the auto keyword") {
  ConfigMap m = tiny_run_config();
  m["idrm.alpha"] = "auto";
  CHECK(resolve_config(m).idrm.alpha_auto);
  m["idrm.alpha"] = "-0.25";
  const ExperimentConfig cfg = resolve_config(m);
  CHECK_FALSE(cfg.idrm.alpha_auto);
  CHECK(cfg.idrm.alpha == -0.25);
}

TEST_CASE("identical config and seed produce byte-identical artifacts") {
  const ExperimentConfig cfg = resolve_config(tiny_run_config());
  const std::string d1 = "/tmp/idrm_test_det1", d2 = "/tmp/idrm_test_det2";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  run_experiment(cfg, d1);
  run_experiment(cfg, d2);
  CHECK(slurp(d1 + "/trajectory.csv") == slurp(d2 + "/trajectory.csv"));
  CHECK(slurp(d1 + "/loops.csv") == slurp(d2 + "/loops.csv"));
  CHECK(slurp(d1 + "/net.bin") == slurp(d2 + "/net.bin"));
  CHECK(!slurp(d1 + "/trajectory.csv").empty());
}

TEST_CASE("run artifacts exist and the report parses") {
  ConfigMap m = tiny_run_config();
  m["eval.slice"] = "true";
  const ExperimentConfig cfg = resolve_config(m);
  const std::string dir = "/tmp/idrm_test_artifacts";
  std::filesystem::remove_all(dir);
  const RunReport rep = run_experiment(cfg, dir);
  CHECK(std::filesystem::exists(dir + "/report.json"));
  CHECK(std::filesystem::exists(dir + "/trajectory.csv"));
  CHECK(std::filesystem::exists(dir + "/loops.csv"));
  CHECK(std::filesystem::exists(dir + "/slice.csv"));
  CHECK(std::filesystem::exists(dir + "/net.bin"));
  CHECK(rep.loops.size() == 2);
  CHECK(rep.final_rel_l2.size() == 1);

  const nlohmann::json j = nlohmann::json::parse(slurp(dir + "/report.json"));
  CHECK(j["schema"] == "idrm-report v1");
  CHECK(j["prng"] == "splitmix64");
  CHECK(j["loops"].size() == 2);
  CHECK(j["config"]["experiment.problem"] == "conv-diffusion-10d");

  // every reported number re-derivable from the artifacts: spot-check that
  // the trajectory rows match the loop count and the net reloads
  const auto rows = read_versioned_csv(dir + "/trajectory.csv", "idrm-trajectory v1");
  CHECK(rows.size() == 10);  // 2 loops x 5 inner steps
  const MlpNet net = load_net(dir + "/net.bin");
  CHECK(net.arch().layer_widths == std::vector<int>{4, 4});
}

TEST_CASE("unknown csv schema versions are rejected loudly") {
  const std::string path = "/tmp/idrm_test_bad.csv";
  {
    std::ofstream out(path);
    out << "# idrm-trajectory v9\nstep\n1\n";
  }
  CHECK_THROWS_WITH_AS(read_versioned_csv(path, "idrm-trajectory v1"),
                       doctest::Contains("unknown schema"), ConfigError);
}

TEST_CASE("slice grid covers the unit square at 101x101 with centered slack") {
  ConfigMap m = tiny_run_config();
  m["eval.slice"] = "true";
  const std::string dir = "/tmp/idrm_test_slice";
  std::filesystem::remove_all(dir);
  run_experiment(resolve_config(m), dir);
  const auto rows = read_versioned_csv(dir + "/slice.csv", "idrm-slice v1");
  REQUIRE(rows.size() == 101 * 101);
  CHECK(rows.front()[0] == 0.0);
  CHECK(rows.back()[0] == 1.0);
  CHECK(rows.back()[1] == 1.0);
}

TEST_CASE("pinn method picks up its own architecture and learning rate") {
  ConfigMap m = preset("plaplace-1.5");
  m["experiment.method"] = "pinn";
  const ExperimentConfig cfg = resolve_config(m);
  CHECK(cfg.hidden == std::vector<int>{16, 32, 16});
  CHECK(cfg.adam.learning_rate == 5.0e-3);
  ConfigMap mi = preset("plaplace-1.5");
  CHECK(resolve_config(mi).hidden == std::vector<int>{16, 32, 32, 16});
}

TEST_CASE("the materialized config echo reproduces the run byte-for-byte") {
  const ExperimentConfig cfg = resolve_config(tiny_run_config());
  const std::string d1 = "/tmp/idrm_test_echo1", d2 = "/tmp/idrm_test_echo2";
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
  run_experiment(cfg, d1);
  const ExperimentConfig from_echo = resolve_config(cfg.echo);
  run_experiment(from_echo, d2);
  CHECK(slurp(d1 + "/trajectory.csv") == slurp(d2 + "/trajectory.csv"));
  CHECK(slurp(d1 + "/net.bin") == slurp(d2 + "/net.bin"));
}

TEST_CASE("compare skips inapplicable methods with a reason") {
  const ConfigMap m = preset("navier-stokes-3d");
  const auto results =
      compare_methods(m, {"pinn"}, {1}, "/tmp/idrm_test_cmp_skip");
  REQUIRE(results.size() == 1);
  CHECK_FALSE(results[0].ran);
  CHECK(results[0].skip_reason.find("strong form") != std::string::npos);
}

TEST_CASE("compare with a single method yields a one-row table") {
  const ConfigMap m = tiny_run_config();
  const std::string dir = "/tmp/idrm_test_cmp_single";
  std::filesystem::remove_all(dir);
  const auto results = compare_methods(m, {"idrm"}, {1, 2, 3}, dir);
  REQUIRE(results.size() == 1);
  CHECK(results[0].ran);
  CHECK(results[0].errors.size() == 3);
  CHECK(results[0].median_error > 0.0);
  CHECK(std::filesystem::exists(dir + "/comparison.csv"));
}

TEST_CASE("self check suite passes") {
  const auto results = self_check(7);
  for (const auto& r : results) {
    INFO(r.name, ": ", r.detail);
    CHECK(r.pass);
  }
}
