#include <catch2/catch_amalgamated.hpp>
#include <Eigen/Dense>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mest/experiments.hpp"

using namespace mest;

namespace {

namespace fs = std::filesystem;

fs::path temp_dir(const std::string& name) {
  const auto dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ExperimentConfig tiny_config(ExperimentKind kind, const fs::path& dir) {
  ExperimentConfig cfg;
  cfg.kind = kind;
  cfg.delta_grid = {0.0, 0.2};
  cfg.alpha_grid = {0.0, 0.1};
  cfg.replicas = 3;
  cfg.starts = 3;
  cfg.solver.radius = 10.0;
  cfg.solver.step_size = 1.0;
  cfg.solver.max_iters = 300;
  cfg.solver.tol = 1e-6;
  cfg.solver.seed = 12345;
  cfg.solver.record_stride = 10;
  cfg.design.n = 60;
  cfg.design.p = 4;
  cfg.design.theta0 = sparse_theta0(4, 4, 0.5);
  cfg.output_dir = dir.string();
  return cfg;
}

}  // namespace

TEST_CASE("experiment config json round trip") {
  const auto dir = temp_dir("mest_cfg");
  auto cfg = tiny_config(ExperimentKind::LowDimRobustness, dir);
  const json j = cfg;
  const auto back = j.get<ExperimentConfig>();
  CHECK(back.kind == cfg.kind);
  CHECK(back.delta_grid == cfg.delta_grid);
  CHECK(back.starts == cfg.starts);
  CHECK(back.design.theta0 == cfg.design.theta0);

  json bad = j;
  bad["kind"] = "nonsense";
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), ConfigError);

  json minimal{{"kind", "highdim"}};
  const auto defaults = minimal.get<ExperimentConfig>();
  CHECK(defaults.replicas == 25);
  CHECK(defaults.starts == 10);

  json sparse{{"kind", "highdim"},
              {"design", {{"n", 50}, {"p", 40}, {"theta0", {{"s0", 5}, {"value", 0.2}}}}}};
  const auto parsed = sparse.get<ExperimentConfig>();
  CHECK(parsed.design.theta0.size() == 40);
  CHECK(parsed.design.theta0(4) == 0.2);
  CHECK(parsed.design.theta0(5) == 0.0);

  auto full = defaults;
  full.apply_full_scale();
  CHECK(full.replicas == 100);
  CHECK(full.starts == 20);
}

TEST_CASE("risk evals and reports serialize to json") {
  DesignSpec design;
  design.n = 30;
  design.p = 2;
  design.theta0 = sparse_theta0(2, 2, 1.0);
  const auto ds = generate(design, GrossErrorSpec{}, 3);
  const auto eval = evaluate_risk(ds, LossSpec::welsch(0.5), design.theta0, true, true);
  const json j = eval;
  CHECK(j.at("value").get<double>() == eval.value);
  CHECK(j.at("gradient").size() == 2);
  CHECK(j.at("hessian").size() == 2);

  SolverConfig solver;
  solver.step_size = 0.5;
  solver.seed = 9;
  const auto report = probe_tractability(ds, LossSpec::welsch(0.5), solver, 3);
  const json jr = report;
  CHECK(jr.at("starts") == 3);
  CHECK(jr.at("clusters").size() >= 1);
  const json jt = report.traces[0];
  CHECK(jt.contains("final_objective"));
}

TEST_CASE("lowdim tractability emits gap curves and a summary") {
  const auto dir = temp_dir("mest_fig1");
  auto cfg = tiny_config(ExperimentKind::LowDimTractability, dir);
  cfg.loss = LossSpec::squared();
  cfg.delta_grid = {0.0};
  cfg.solver.step_size = 0.5;
  cfg.solver.max_iters = 5000;
  const auto result = run_lowdim_tractability(cfg);

  REQUIRE(result.cells.size() == 1);
  const auto& report = result.cells[0].report;
  CHECK(report.unique);  // convex loss

  // with no contamination the squared-loss final is the least-squares point
  const Dataset ds = generate(cfg.design, cfg.noise, cfg.solver.seed);
  const Eigen::MatrixXd a = ds.x().transpose() * ds.x();
  const Eigen::VectorXd ls = a.ldlt().solve(ds.x().transpose() * ds.y());
  CHECK((report.finals[static_cast<std::size_t>(report.best_index())] - ls).norm() < 1e-4);

  CHECK(fs::exists(dir / "fig1_summary.csv"));
  CHECK(fs::exists(dir / "fig1_gaps_delta0.csv"));
  CHECK(fs::exists(dir / "lowdim_tractability_manifest.json"));

  const auto gaps = slurp(dir / "fig1_gaps_delta0.csv");
  CHECK(gaps.rfind("iter,gap_start0,gap_start1,gap_start2", 0) == 0);
  const auto summary = slurp(dir / "fig1_summary.csv");
  CHECK(summary.rfind("delta,unique,max_pairwise_gap", 0) == 0);
}

TEST_CASE("robustness sweep has one cell per grid point") {
  const auto dir = temp_dir("mest_fig2");
  const auto cfg = tiny_config(ExperimentKind::LowDimRobustness, dir);
  const auto result = run_lowdim_robustness(cfg);
  REQUIRE(result.cells.size() == 4);
  for (const auto& cell : result.cells) {
    CHECK(cell.replicas == cfg.replicas);
    CHECK(cell.mean_error >= 0.0);
    CHECK(std::isfinite(cell.std_error));
    CHECK(cell.uniqueness_rate >= 0.0);
    CHECK(cell.uniqueness_rate <= 1.0);
  }
  const auto csv = slurp(dir / "fig2_errors.csv");
  CHECK(csv.rfind("delta,alpha,mean_error,std_error,uniqueness_rate,mean_iterations,replicas",
                  0) == 0);

  // frozen-constant regression: clean-data error stays within C sqrt(p/n)
  for (const auto& cell : result.cells) {
    if (cell.delta == 0.0 && cell.alpha == 0.1) {
      CHECK(cell.mean_error <= 1.5 * std::sqrt(4.0 / 60.0));
    }
  }
}

TEST_CASE("case study centers responses when asked") {
  const auto dir = temp_dir("mest_case_center");
  DesignSpec design;
  design.n = 120;
  design.p = 4;
  design.theta0 = sparse_theta0(4, 4, 0.5);
  GrossErrorSpec clean;
  clean.sigma = 0.2;
  const auto ds = generate(design, clean, 55);
  const auto table = dir / "offset.dat";
  {
    std::ofstream out(table);
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      for (Eigen::Index j = 0; j < ds.p(); ++j) out << ds.x()(i, j) << " ";
      out << ds.y()(i) + 100.0 << "\n";  // responses live far from the origin
    }
  }
  auto cfg = tiny_config(ExperimentKind::CaseStudy, dir);
  cfg.delta_grid = {0.0};
  cfg.alpha_grid = {0.4};
  cfg.replicas = 2;
  cfg.case_n_train = 80;
  cfg.center_response = true;
  cfg.solver.step_size = 0.5;
  cfg.solver.max_iters = 2000;
  const auto centered = run_casestudy(cfg, table);
  CHECK(centered.cells[0].mean_pred_error < 2.0);

  // without centering the fit cannot reach responses near 100
  cfg.center_response = false;
  cfg.output_dir = (dir / "raw").string();
  const auto raw = run_casestudy(cfg, table);
  CHECK(raw.cells[0].mean_pred_error > centered.cells[0].mean_pred_error * 100.0);
}

TEST_CASE("case study prediction error is robust for positive alpha") {
  const auto dir = temp_dir("mest_case_order");
  DesignSpec design;
  design.n = 150;
  design.p = 5;
  design.theta0 = sparse_theta0(5, 5, 0.6);
  GrossErrorSpec clean;
  clean.sigma = 0.3;
  const auto ds = generate(design, clean, 99);
  const auto table = dir / "synthetic.dat";
  {
    std::ofstream out(table);
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      for (Eigen::Index j = 0; j < ds.p(); ++j) out << ds.x()(i, j) << " ";
      out << ds.y()(i) << "\n";
    }
  }
  auto cfg = tiny_config(ExperimentKind::CaseStudy, dir);
  cfg.delta_grid = {0.3};
  cfg.alpha_grid = {0.0, 0.4};
  cfg.replicas = 3;
  cfg.case_n_train = 100;
  cfg.solver.step_size = 0.5;
  cfg.solver.max_iters = 2000;
  const auto result = run_casestudy(cfg, table);
  REQUIRE(result.cells.size() == 2);
  const auto& ls = result.cells[0];     // alpha = 0
  const auto& robust = result.cells[1]; // alpha = 0.4
  CHECK(robust.mean_pred_error < ls.mean_pred_error);
}

TEST_CASE("highdim run reports support metrics") {
  const auto dir = temp_dir("mest_fig3");
  auto cfg = tiny_config(ExperimentKind::HighDim, dir);
  cfg.delta_grid = {0.0};
  cfg.design.n = 80;
  cfg.design.p = 60;
  cfg.design.theta0 = sparse_theta0(60, 4, 0.5);
  cfg.loss = LossSpec::welsch(0.1);
  cfg.solver.lambda_n = 0.1;
  cfg.solver.step_size = 0.2;
  cfg.solver.max_iters = 3000;
  const auto result = run_highdim(cfg);
  REQUIRE(result.cells.size() == 1);
  const auto& cell = result.cells[0];
  CHECK(cell.support_recall == 1.0);
  CHECK(cell.top_s0_recovery);
  CHECK(fs::exists(dir / "fig3_summary.csv"));
  CHECK(fs::exists(dir / "fig3_gaps_delta0.csv"));

  // a kill-all penalty drives everything to zero
  auto kill = cfg;
  kill.output_dir = (dir / "kill").string();
  kill.solver.lambda_n = 100.0;
  const auto killed = run_highdim(kill);
  CHECK(killed.cells[0].support_recall == 0.0);
}

TEST_CASE("case study produces one row per (delta, alpha)") {
  const auto dir = temp_dir("mest_case");

  // synthetic table in the whitespace last-column-response layout
  DesignSpec design;
  design.n = 120;
  design.p = 5;
  design.theta0 = sparse_theta0(5, 5, 0.6);
  GrossErrorSpec clean;
  clean.sigma = 0.5;
  const auto ds = generate(design, clean, 77);
  const auto table = dir / "synthetic.dat";
  {
    std::ofstream out(table);
    for (Eigen::Index i = 0; i < ds.n(); ++i) {
      for (Eigen::Index j = 0; j < ds.p(); ++j) out << ds.x()(i, j) << " ";
      out << ds.y()(i) << "\n";
    }
  }

  auto cfg = tiny_config(ExperimentKind::CaseStudy, dir);
  cfg.delta_grid = {0.0, 0.2};
  cfg.alpha_grid = {0.0, 0.4};
  cfg.replicas = 2;
  cfg.case_n_train = 80;
  cfg.solver.step_size = 0.5;
  cfg.solver.max_iters = 500;
  const auto result = run_casestudy(cfg, table);
  REQUIRE(result.cells.size() == 4);
  for (const auto& cell : result.cells) {
    CHECK(cell.replicas == 2);
    CHECK(cell.mean_pred_error >= 0.0);
  }
  // clean data, no corruption: prediction error is near the noise floor
  CHECK(result.cells[0].mean_pred_error < 1.0);
  const auto csv = slurp(dir / "case_pred_error.csv");
  CHECK(csv.rfind("delta,alpha,mean_pred_error", 0) == 0);

  auto bad = cfg;
  bad.case_n_train = 1000;
  CHECK_THROWS_AS(run_casestudy(bad, table), ConfigError);
}

TEST_CASE("uniform convergence trend decreases with and without outliers") {
  const auto dir = temp_dir("mest_uconv");
  auto cfg = tiny_config(ExperimentKind::UniformConvergence, dir);
  cfg.design.n = 100;
  cfg.design.p = 2;
  cfg.design.theta0 = sparse_theta0(2, 2, 1.0 / std::sqrt(2.0));
  cfg.replicas = 2;
  cfg.n_ladder = {200, 400, 800, 1600};
  cfg.population_factor = 16;
  cfg.theta_grid_points = 40;
  for (double delta : {0.0, 0.2}) {
    cfg.noise.delta = delta;
    const auto result = run_uniform_convergence(cfg);
    REQUIRE(result.points.size() == 4);
    int inversions = 0;
    for (std::size_t k = 1; k < result.points.size(); ++k) {
      if (result.points[k].sup_gap > result.points[k - 1].sup_gap) ++inversions;
    }
    CHECK(inversions <= 1);
    CHECK(result.slope < 0.0);
  }
  CHECK(fs::exists(dir / "uconv_trend.csv"));

  auto bad = cfg;
  bad.design.p = 6;
  bad.design.theta0 = sparse_theta0(6, 6, 0.4);
  CHECK_THROWS_AS(run_uniform_convergence(bad), ConfigError);
}

TEST_CASE("experiments are byte-identical across reruns") {
  const auto dir_a = temp_dir("mest_repro_a");
  const auto dir_b = temp_dir("mest_repro_b");
  auto cfg_a = tiny_config(ExperimentKind::LowDimRobustness, dir_a);
  auto cfg_b = tiny_config(ExperimentKind::LowDimRobustness, dir_b);
  run_lowdim_robustness(cfg_a);
  run_lowdim_robustness(cfg_b);
  CHECK(slurp(dir_a / "fig2_errors.csv") == slurp(dir_b / "fig2_errors.csv"));

  // a different seed must change the numbers
  auto cfg_c = cfg_b;
  cfg_c.solver.seed = 999;
  cfg_c.output_dir = (dir_b / "c").string();
  run_lowdim_robustness(cfg_c);
  CHECK(slurp(dir_b / "fig2_errors.csv") != slurp(dir_b / "c" / "fig2_errors.csv"));
}
