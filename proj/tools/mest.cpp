// mest: robust M-estimation toolkit CLI.
//
// Subcommands: generate | solve | probe | sweep | theory | casestudy | uconv.
// Each accepts --config <json> plus per-flag overrides; exit code 0 on
// success, 2 on configuration errors, 3 on data errors.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "mest/experiments.hpp"
#include "mest/io.hpp"
#include "mest/serialize.hpp"
#include "mest/theory.hpp"
#include "mest/version.hpp"

namespace {

using mest::json;

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw mest::DataError("cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw mest::ConfigError("config '" + path + "': " + e.what());
  }
}

struct DataArgs {
  std::string config_path;
  std::string data_path;
  struct {
    int n = -1, p = -1, s0 = -1;
    double tau = -1, value = std::nan(""), delta = -1, sigma = -1, outlier_sigma = -1,
           mean_value = std::nan("");
    std::string dist, mean_mode;
    std::int64_t seed = -1;
  } ov;

  void add_flags(CLI::App* cmd, bool with_data) {
    cmd->add_option("--config", config_path, "JSON config file");
    if (with_data) cmd->add_option("--data", data_path, "CSV dataset (header y,x1,...,xp)");
    cmd->add_option("--n", ov.n, "number of rows");
    cmd->add_option("--p", ov.p, "number of features");
    cmd->add_option("--dist", ov.dist, "design distribution: gaussian|uniform");
    cmd->add_option("--tau", ov.tau, "design scale tau");
    cmd->add_option("--s0", ov.s0, "theta0 sparsity (first s0 coordinates nonzero)");
    cmd->add_option("--theta0-value", ov.value, "value of the nonzero theta0 entries");
    cmd->add_option("--delta", ov.delta, "contamination ratio");
    cmd->add_option("--sigma", ov.sigma, "inlier noise std dev");
    cmd->add_option("--outlier-sigma", ov.outlier_sigma, "outlier noise std dev");
    cmd->add_option("--mean-mode", ov.mean_mode, "outlier mean: xnorm_plus_one|constant");
    cmd->add_option("--mean-value", ov.mean_value, "outlier mean for constant mode");
    cmd->add_option("--seed", ov.seed, "generation seed");
  }

  mest::DesignSpec design(const json& cfg) const {
    mest::DesignSpec d;
    d.n = 200;
    d.p = 10;
    d.theta0 = mest::sparse_theta0(10, 10, 1.0 / std::sqrt(10.0));
    if (cfg.contains("design")) d = cfg.at("design").get<mest::DesignSpec>();
    if (ov.n > 0) d.n = ov.n;
    if (ov.p > 0) {
      d.p = ov.p;
      d.theta0 = mest::sparse_theta0(d.p, d.p, 1.0 / std::sqrt(d.p));
    }
    if (!ov.dist.empty()) {
      if (ov.dist == "gaussian") {
        d.dist = mest::DesignSpec::Dist::GaussianIsotropic;
      } else if (ov.dist == "uniform") {
        d.dist = mest::DesignSpec::Dist::UniformBox;
      } else {
        throw mest::ConfigError("--dist must be gaussian or uniform");
      }
    }
    if (ov.tau > 0) d.tau = ov.tau;
    if (ov.s0 > 0) {
      const double v = std::isnan(ov.value) ? 1.0 / std::sqrt(ov.s0) : ov.value;
      d.theta0 = mest::sparse_theta0(d.p, ov.s0, v);
    }
    d.validate();
    return d;
  }

  mest::GrossErrorSpec noise(const json& cfg) const {
    mest::GrossErrorSpec g;
    if (cfg.contains("noise")) g = cfg.at("noise").get<mest::GrossErrorSpec>();
    if (ov.delta >= 0) g.delta = ov.delta;
    if (ov.sigma > 0) g.sigma = ov.sigma;
    if (ov.outlier_sigma > 0) g.outlier_sigma = ov.outlier_sigma;
    if (!ov.mean_mode.empty()) {
      if (ov.mean_mode == "xnorm_plus_one") {
        g.mean_mode = mest::GrossErrorSpec::MeanMode::XNormPlusOne;
      } else if (ov.mean_mode == "constant") {
        g.mean_mode = mest::GrossErrorSpec::MeanMode::Constant;
      } else {
        throw mest::ConfigError("--mean-mode must be xnorm_plus_one or constant");
      }
    }
    if (!std::isnan(ov.mean_value)) g.mean_value = ov.mean_value;
    g.validate();
    return g;
  }

  std::uint64_t seed(const json& cfg) const {
    if (ov.seed >= 0) return static_cast<std::uint64_t>(ov.seed);
    return cfg.value("seed", std::uint64_t{0});
  }
};

struct SolveArgs {
  std::string family;
  double alpha = std::nan("");
  double lambda = -1, radius = -1, step = -1, tol = -1;
  int max_iters = -1, stride = -1;
  std::int64_t seed = -1;
  bool backtracking = false;

  void add_flags(CLI::App* cmd) {
    cmd->add_option("--family", family, "loss family: squared|huber|welsch");
    cmd->add_option("--alpha", alpha, "loss tuning parameter");
    cmd->add_option("--lambda", lambda, "l1 penalty lambda_n");
    cmd->add_option("--radius", radius, "feasible ball radius r");
    cmd->add_option("--step", step, "gradient step size");
    cmd->add_option("--max-iters", max_iters, "iteration cap");
    cmd->add_option("--tol", tol, "stopping tolerance on iterate displacement");
    cmd->add_option("--stride", stride, "trace recording stride");
    cmd->add_option("--solver-seed", seed, "solver seed (random starts)");
    cmd->add_flag("--backtracking", backtracking, "halve the step until decrease");
  }

  mest::LossSpec loss(const json& cfg) const {
    mest::LossSpec spec = mest::LossSpec::welsch(0.1);
    if (cfg.contains("loss")) spec = cfg.at("loss").get<mest::LossSpec>();
    if (!family.empty()) spec.family = mest::parse_family(family);
    if (!std::isnan(alpha)) spec.alpha = alpha;
    spec.validate();
    return spec;
  }

  mest::SolverConfig solver(const json& cfg) const {
    mest::SolverConfig s;
    if (cfg.contains("solver")) s = cfg.at("solver").get<mest::SolverConfig>();
    if (lambda >= 0) s.lambda_n = lambda;
    if (radius > 0) s.radius = radius;
    if (step > 0) s.step_size = step;
    if (max_iters > 0) s.max_iters = max_iters;
    if (tol > 0) s.tol = tol;
    if (stride > 0) s.record_stride = stride;
    if (seed >= 0) s.seed = static_cast<std::uint64_t>(seed);
    if (backtracking) s.backtracking = true;
    s.validate();
    return s;
  }
};

mest::Dataset resolve_dataset(const DataArgs& data, const json& cfg) {
  if (!data.data_path.empty()) {
    return mest::load_table(data.data_path, mest::TableSchema::CsvHeader);
  }
  return mest::generate(data.design(cfg), data.noise(cfg), data.seed(cfg));
}

void write_trace_csv(const mest::SolveTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw mest::DataError("cannot write '" + path + "'");
  out << "iter,gap,objective\n";
  for (std::size_t k = 0; k < trace.recorded_iters.size(); ++k) {
    out << trace.recorded_iters[k] << "," << mest::detail::format_double(trace.iterate_gap[k])
        << "," << mest::detail::format_double(trace.objective[k]) << "\n";
  }
}

mest::ExperimentConfig experiment_config(const std::string& config_path, bool full,
                                         const std::string& output_dir,
                                         mest::ExperimentKind expected) {
  json cfg = load_config(config_path);
  if (!cfg.contains("kind")) cfg["kind"] = mest::kind_name(expected);
  auto ec = cfg.get<mest::ExperimentConfig>();
  if (full) ec.apply_full_scale();
  if (!output_dir.empty()) ec.output_dir = output_dir;
  return ec;
}

int run(int argc, char** argv) {
  CLI::App app{"robust M-estimation toolkit"};
  app.set_version_flag("--version", mest::kVersion);
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "generate a gross-error dataset as CSV");
  DataArgs gen_data;
  std::string gen_out = "data.csv";
  gen_data.add_flags(gen, false);
  gen->add_option("--out", gen_out, "output CSV path");

  // solve
  auto* solve = app.add_subcommand("solve", "run (proximal) projected gradient descent");
  DataArgs solve_data;
  SolveArgs solve_args;
  std::string solve_trace_out, solve_init = "zero";
  solve_data.add_flags(solve, true);
  solve_args.add_flags(solve);
  solve->add_option("--init", solve_init, "start point: zero|random");
  solve->add_option("--trace-out", solve_trace_out, "write iter,gap,objective CSV");

  // probe
  auto* probe = app.add_subcommand("probe", "multi-start stationary-point probe");
  DataArgs probe_data;
  SolveArgs probe_args;
  int probe_starts = 20;
  double probe_cluster_tol = 1e-3;
  std::string probe_gaps_out, probe_output_dir;
  bool probe_full = false;
  probe_data.add_flags(probe, true);
  probe_args.add_flags(probe);
  probe->add_option("--starts", probe_starts, "number of random starts");
  probe->add_option("--cluster-tol", probe_cluster_tol, "final-iterate cluster tolerance");
  probe->add_option("--gaps-out", probe_gaps_out, "write per-start gap curves CSV");
  probe->add_option("--output-dir", probe_output_dir, "output dir for experiment configs");
  probe->add_flag("--full", probe_full, "paper-scale replicas/starts");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "estimation-error sweep over (delta, alpha)");
  std::string sweep_config, sweep_output_dir;
  bool sweep_full = false;
  sweep->add_option("--config", sweep_config, "experiment JSON config")->required();
  sweep->add_option("--output-dir", sweep_output_dir, "output directory override");
  sweep->add_flag("--full", sweep_full, "paper-scale replicas/starts");

  // theory
  auto* theory = app.add_subcommand("theory", "closed-form robustness/tractability radii");
  std::string th_family = "welsch";
  double th_alpha = 0.1, th_delta = 0, th_sigma = 1, th_tau = 1, th_r = 10, th_gamma = 1,
         th_c2 = 3, th_lambda = -1, th_m = 1, th_cpi = 1, th_quad_tol = mest::kDefaultQuadTol;
  int th_s0 = 0, th_n = 0, th_p = 0;
  theory->add_option("--family", th_family, "huber|welsch");
  theory->add_option("--alpha", th_alpha, "loss tuning parameter");
  theory->add_option("--delta", th_delta, "contamination ratio");
  theory->add_option("--sigma", th_sigma, "inlier noise std dev");
  theory->add_option("--tau", th_tau, "design scale");
  theory->add_option("--r", th_r, "feasible ball radius");
  theory->add_option("--gamma", th_gamma, "covariance lower-bound factor");
  theory->add_option("--c2", th_c2, "fourth-moment constant");
  theory->add_option("--s0", th_s0, "sparsity (enables r_s and lambda_rec)");
  theory->add_option("--n", th_n, "sample size (enables r_s and lambda_rec)");
  theory->add_option("--p", th_p, "dimension (enables r_s and lambda_rec)");
  theory->add_option("--lambda", th_lambda, "penalty level (defaults to recommended)");
  theory->add_option("--m", th_m, "sup-norm bound M on x / tau");
  theory->add_option("--c-pi", th_cpi, "concentration constant C_pi");
  theory->add_option("--quad-tol", th_quad_tol, "quadrature tolerance");

  // casestudy
  auto* cs = app.add_subcommand("casestudy", "train/test prediction-error study");
  std::string cs_config, cs_data, cs_output_dir;
  bool cs_full = false;
  cs->add_option("--config", cs_config, "experiment JSON config");
  cs->add_option("--data", cs_data, "whitespace table, last column = response")->required();
  cs->add_option("--output-dir", cs_output_dir, "output directory override");
  cs->add_flag("--full", cs_full, "paper-scale replicas/starts");

  // uconv
  auto* uc = app.add_subcommand("uconv", "uniform-convergence trend of the sample gradient");
  std::string uc_config, uc_output_dir;
  uc->add_option("--config", uc_config, "experiment JSON config");
  uc->add_option("--output-dir", uc_output_dir, "output directory override");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // flag/usage problems are config errors
  }

  if (gen->parsed()) {
    const json cfg = load_config(gen_data.config_path);
    const auto ds = mest::generate(gen_data.design(cfg), gen_data.noise(cfg),
                                   gen_data.seed(cfg));
    mest::write_csv(ds, gen_out);
    std::cout << json{{"n", ds.n()},
                      {"p", ds.p()},
                      {"outlier_fraction", ds.outlier_fraction()},
                      {"out", gen_out}}
                     .dump(2)
              << "\n";
    return 0;
  }

  if (solve->parsed()) {
    const json cfg = load_config(solve_data.config_path);
    const auto ds = resolve_dataset(solve_data, cfg);
    const auto spec = solve_args.loss(cfg);
    const auto solver = solve_args.solver(cfg);
    Eigen::VectorXd init = Eigen::VectorXd::Zero(ds.p());
    if (solve_init == "random") {
      mest::RngStream rng(solver.seed, mest::stream::kStart, 0);
      init = mest::sample_start(static_cast<int>(ds.p()), solver.radius, rng);
    } else if (solve_init != "zero") {
      throw mest::ConfigError("--init must be zero or random");
    }
    const auto trace = mest::solve_prox_gd(ds, spec, solver, init);
    if (!solve_trace_out.empty()) write_trace_csv(trace, solve_trace_out);
    std::cout << json(trace).dump(2) << "\n";
    return 0;
  }

  if (probe->parsed()) {
    const json cfg = load_config(probe_data.config_path);
    const std::string kind = cfg.value("kind", std::string());
    if (kind == "lowdim_tractability" || kind == "highdim") {
      auto ec = cfg.get<mest::ExperimentConfig>();
      if (probe_full) ec.apply_full_scale();
      if (!probe_output_dir.empty()) ec.output_dir = probe_output_dir;
      json out;
      if (ec.kind == mest::ExperimentKind::LowDimTractability) {
        const auto result = mest::run_lowdim_tractability(ec);
        for (const auto& cell : result.cells) {
          out.push_back(json{{"delta", cell.delta}, {"report", cell.report}});
        }
      } else {
        const auto result = mest::run_highdim(ec);
        for (const auto& cell : result.cells) {
          out.push_back(json{{"delta", cell.delta},
                             {"report", cell.report},
                             {"support_precision", cell.support_precision},
                             {"support_recall", cell.support_recall},
                             {"top_s0_recovery", cell.top_s0_recovery}});
        }
      }
      std::cout << out.dump(2) << "\n";
      return 0;
    }
    const auto ds = resolve_dataset(probe_data, cfg);
    const auto report = mest::probe_tractability(ds, probe_args.loss(cfg),
                                                 probe_args.solver(cfg), probe_starts,
                                                 probe_cluster_tol);
    if (!probe_gaps_out.empty()) {
      const std::filesystem::path path(probe_gaps_out);
      mest::detail::write_gap_curves(path.parent_path().empty() ? "." : path.parent_path(),
                                     path.filename().string(), report);
    }
    std::cout << json(report).dump(2) << "\n";
    return 0;
  }

  if (sweep->parsed()) {
    const auto ec = experiment_config(sweep_config, sweep_full, sweep_output_dir,
                                      mest::ExperimentKind::LowDimRobustness);
    const auto result = mest::run_lowdim_robustness(ec);
    json cells = json::array();
    for (const auto& c : result.cells) {
      cells.push_back(json{{"delta", c.delta},
                           {"alpha", c.alpha},
                           {"mean_error", c.mean_error},
                           {"std_error", c.std_error},
                           {"uniqueness_rate", c.uniqueness_rate},
                           {"mean_iterations", c.mean_iterations}});
    }
    std::cout << cells.dump(2) << "\n";
    return 0;
  }

  if (theory->parsed()) {
    mest::ModelConstants mc;
    mc.sigma = th_sigma;
    mc.tau = th_tau;
    mc.r = th_r;
    mc.gamma = th_gamma;
    mc.c2 = th_c2;
    mc.delta = th_delta;
    const auto family = mest::parse_family(th_family);
    mest::TheoryRadii radii;
    mest::LossSpec spec;
    if (family == mest::LossFamily::Huber) {
      spec = mest::LossSpec::huber(th_alpha);
      radii = mest::huber_radii(th_alpha, mc, th_quad_tol);
    } else if (family == mest::LossFamily::Welsch) {
      spec = mest::LossSpec::welsch(th_alpha);
      radii = mest::welsch_radii(th_alpha, mc);
    } else {
      throw mest::ConfigError("theory: family must be huber or welsch");
    }
    json out{{"eta0", mest::detail::num_or_inf(radii.eta0)},
             {"eta1", mest::detail::num_or_inf(radii.eta1)},
             {"kappa", radii.kappa},
             {"tractable", radii.tractable}};
    if (std::isfinite(mest::bounds(spec).l_psi)) {
      out["eta0_generic"] = mest::generic_eta0(spec, mc, th_quad_tol);
    }
    if (th_s0 > 0 && th_n > 0 && th_p > 1) {
      const double lambda = th_lambda >= 0
                                ? th_lambda
                                : mest::high_dim_radius(spec, mc, th_s0, th_n, th_p, 0.0, th_m,
                                                        th_cpi, th_quad_tol)
                                      .lambda_rec;
      const auto hd = mest::high_dim_radius(spec, mc, th_s0, th_n, th_p, lambda, th_m, th_cpi,
                                            th_quad_tol);
      out["lambda_rec"] = hd.lambda_rec;
      out["r_s"] = hd.r_s;
      out["c0"] = hd.c0;
      out["c1"] = hd.c1;
    }
    std::cout << out.dump(2) << "\n";
    return 0;
  }

  if (cs->parsed()) {
    const auto ec = experiment_config(cs_config, cs_full, cs_output_dir,
                                      mest::ExperimentKind::CaseStudy);
    const auto result = mest::run_casestudy(ec, cs_data);
    json cells = json::array();
    for (const auto& c : result.cells) {
      cells.push_back(json{{"delta", c.delta},
                           {"alpha", c.alpha},
                           {"mean_pred_error", c.mean_pred_error},
                           {"std_pred_error", c.std_pred_error},
                           {"uniqueness_rate", c.uniqueness_rate}});
    }
    std::cout << cells.dump(2) << "\n";
    return 0;
  }

  if (uc->parsed()) {
    const auto ec = experiment_config(uc_config, false, uc_output_dir,
                                      mest::ExperimentKind::UniformConvergence);
    const auto result = mest::run_uniform_convergence(ec);
    json points = json::array();
    for (const auto& pt : result.points) {
      points.push_back(json{{"n", pt.n}, {"sup_gap", pt.sup_gap}});
    }
    std::cout << json{{"points", points}, {"slope", result.slope}}.dump(2) << "\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const mest::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const mest::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const mest::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
