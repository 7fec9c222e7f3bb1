#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "mest/io.hpp"
#include "mest/serialize.hpp"
#include "mest/solver.hpp"
#include "mest/version.hpp"

namespace mest {

enum class ExperimentKind {
  LowDimTractability,
  LowDimRobustness,
  HighDim,
  CaseStudy,
  UniformConvergence,
};

inline std::string kind_name(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::LowDimTractability: return "lowdim_tractability";
    case ExperimentKind::LowDimRobustness: return "lowdim_robustness";
    case ExperimentKind::HighDim: return "highdim";
    case ExperimentKind::CaseStudy: return "casestudy";
    case ExperimentKind::UniformConvergence: return "uniform_convergence";
  }
  return "unknown";
}

inline ExperimentKind parse_kind(const std::string& name) {
  if (name == "lowdim_tractability") return ExperimentKind::LowDimTractability;
  if (name == "lowdim_robustness") return ExperimentKind::LowDimRobustness;
  if (name == "highdim") return ExperimentKind::HighDim;
  if (name == "casestudy") return ExperimentKind::CaseStudy;
  if (name == "uniform_convergence") return ExperimentKind::UniformConvergence;
  throw ConfigError("experiment: unknown kind '" + name + "'");
}

/// Everything an experiment run needs. Defaults are desk scale
/// (replicas 25, starts 10); paper scale is replicas 100, starts 20.
struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::LowDimTractability;
  std::vector<double> delta_grid = {0.0};
  std::vector<double> alpha_grid = {0.1};
  int replicas = 25;
  int starts = 10;
  double cluster_tol = 1e-3;
  LossSpec loss = LossSpec::welsch(0.1);
  SolverConfig solver;
  DesignSpec design;
  GrossErrorSpec noise;
  std::string output_dir = "out";
  int case_n_train = 1000;
  bool center_response = false;
  // uniform-convergence knobs
  std::vector<int> n_ladder = {500, 1000, 2000, 4000, 8000, 16000};
  int population_factor = 64;
  int theta_grid_points = 200;

  void validate() const {
    if (delta_grid.empty()) throw ConfigError("experiment: delta_grid must be nonempty");
    if (alpha_grid.empty()) throw ConfigError("experiment: alpha_grid must be nonempty");
    if (replicas < 1) throw ConfigError("experiment: replicas must be >= 1");
    if (starts < 2) throw ConfigError("experiment: starts must be >= 2");
    if (n_ladder.empty()) throw ConfigError("experiment: n_ladder must be nonempty");
    solver.validate();
    noise.validate();
  }

  /// Paper-scale values behind the --full flag.
  void apply_full_scale() {
    replicas = 100;
    starts = 20;
  }
};

inline void to_json(json& j, const ExperimentConfig& cfg) {
  j = json{{"kind", kind_name(cfg.kind)},
           {"delta_grid", cfg.delta_grid},
           {"alpha_grid", cfg.alpha_grid},
           {"replicas", cfg.replicas},
           {"starts", cfg.starts},
           {"cluster_tol", cfg.cluster_tol},
           {"loss", cfg.loss},
           {"solver", cfg.solver},
           {"design", cfg.design},
           {"noise", cfg.noise},
           {"output_dir", cfg.output_dir},
           {"case_n_train", cfg.case_n_train},
           {"center_response", cfg.center_response},
           {"n_ladder", cfg.n_ladder},
           {"population_factor", cfg.population_factor},
           {"theta_grid_points", cfg.theta_grid_points}};
}

inline void from_json(const json& j, ExperimentConfig& cfg) {
  cfg.kind = parse_kind(j.at("kind").get<std::string>());
  cfg.delta_grid = j.value("delta_grid", std::vector<double>{0.0});
  cfg.alpha_grid = j.value("alpha_grid", std::vector<double>{0.1});
  cfg.replicas = j.value("replicas", 25);
  cfg.starts = j.value("starts", 10);
  cfg.cluster_tol = j.value("cluster_tol", 1e-3);
  if (j.contains("loss")) cfg.loss = j.at("loss").get<LossSpec>();
  if (j.contains("solver")) cfg.solver = j.at("solver").get<SolverConfig>();
  if (j.contains("design")) {
    cfg.design = j.at("design").get<DesignSpec>();
  } else {
    cfg.design.n = 200;
    cfg.design.p = 10;
    cfg.design.theta0 = sparse_theta0(10, 10, 1.0 / std::sqrt(10.0));
  }
  if (j.contains("noise")) cfg.noise = j.at("noise").get<GrossErrorSpec>();
  cfg.output_dir = j.value("output_dir", std::string("out"));
  cfg.case_n_train = j.value("case_n_train", 1000);
  cfg.center_response = j.value("center_response", false);
  cfg.n_ladder = j.value("n_ladder", std::vector<int>{500, 1000, 2000, 4000, 8000, 16000});
  cfg.population_factor = j.value("population_factor", 64);
  cfg.theta_grid_points = j.value("theta_grid_points", 200);
  cfg.validate();
}

namespace detail {

inline std::string delta_label(double delta) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", delta);
  std::string label(buf);
  std::replace(label.begin(), label.end(), '.', 'p');
  return label;
}

inline std::ofstream open_csv(const std::filesystem::path& dir, const std::string& name) {
  std::filesystem::create_directories(dir);
  std::ofstream out(dir / name);
  if (!out) throw DataError("cannot write '" + (dir / name).string() + "'");
  return out;
}

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size() - 1));
}

inline double mean_iterations(const TractabilityReport& report) {
  if (report.traces.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& t : report.traces) acc += t.iterations;
  return acc / static_cast<double>(report.traces.size());
}

/// Writes the per-start gap curves (Figure 1 / Figure 3 style): one row per
/// recorded iteration (union across starts), one gap column per start, with
/// empty cells where a start recorded nothing (converged earlier / off
/// stride).
inline void write_gap_curves(const std::filesystem::path& dir, const std::string& name,
                             const TractabilityReport& report) {
  auto out = open_csv(dir, name);
  out << "iter";
  for (std::size_t s = 0; s < report.traces.size(); ++s) out << ",gap_start" << s;
  out << "\n";

  std::vector<int> iters;
  for (const auto& t : report.traces) {
    iters.insert(iters.end(), t.recorded_iters.begin(), t.recorded_iters.end());
  }
  std::sort(iters.begin(), iters.end());
  iters.erase(std::unique(iters.begin(), iters.end()), iters.end());

  std::vector<std::size_t> cursor(report.traces.size(), 0);
  for (int iter : iters) {
    out << iter;
    for (std::size_t s = 0; s < report.traces.size(); ++s) {
      const auto& t = report.traces[s];
      out << ",";
      auto& k = cursor[s];
      if (k < t.recorded_iters.size() && t.recorded_iters[k] == iter) {
        out << format_double(t.iterate_gap[k]);
        ++k;
      }
    }
    out << "\n";
  }
}

inline void write_manifest(const ExperimentConfig& cfg, double wall_seconds) {
  std::filesystem::create_directories(cfg.output_dir);
  json manifest{{"kind", kind_name(cfg.kind)},
                {"config", cfg},
                {"seed", cfg.solver.seed},
                {"version", kVersion},
                {"wall_time_seconds", wall_seconds}};
  std::ofstream out(std::filesystem::path(cfg.output_dir) /
                    (kind_name(cfg.kind) + "_manifest.json"));
  out << manifest.dump(2) << "\n";
}

class WallClock {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

// ---------------------------------------------------------------------------
// Low-dimensional tractability (Figure 1)
// ---------------------------------------------------------------------------

struct TractabilityCell {
  double delta = 0.0;
  TractabilityReport report;
};

struct TractabilityRunResult {
  std::vector<TractabilityCell> cells;
};

/// One dataset per delta (same base seed, so the design matrix is shared
/// across deltas), probed with cfg.starts random starts. Emits
/// fig1_gaps_delta<d>.csv per delta and fig1_summary.csv.
inline TractabilityRunResult run_lowdim_tractability(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::WallClock clock;
  TractabilityRunResult result;

  auto summary = detail::open_csv(cfg.output_dir, "fig1_summary.csv");
  summary << "delta,unique,max_pairwise_gap,clusters,starts,diverged,mean_iterations\n";

  for (double delta : cfg.delta_grid) {
    GrossErrorSpec noise = cfg.noise;
    noise.delta = delta;
    const Dataset ds = generate(cfg.design, noise, cfg.solver.seed);
    TractabilityReport report = probe_tractability(ds, cfg.loss, cfg.solver, cfg.starts,
                                                   cfg.cluster_tol);
    detail::write_gap_curves(cfg.output_dir,
                             "fig1_gaps_delta" + detail::delta_label(delta) + ".csv", report);
    int diverged = 0;
    for (auto f : report.diverged) diverged += f;
    summary << detail::format_double(delta) << "," << (report.unique ? 1 : 0) << ","
            << detail::format_double(report.max_pairwise_gap) << "," << report.clusters.size()
            << "," << report.starts << "," << diverged << ","
            << detail::format_double(detail::mean_iterations(report)) << "\n";
    result.cells.push_back({delta, std::move(report)});
  }
  detail::write_manifest(cfg, clock.seconds());
  return result;
}

// ---------------------------------------------------------------------------
// Low-dimensional robustness sweep (Figure 2)
// ---------------------------------------------------------------------------

struct SweepCell {
  double delta = 0.0;
  double alpha = 0.0;
  double mean_error = 0.0;
  double std_error = 0.0;
  double uniqueness_rate = 0.0;
  double mean_iterations = 0.0;
  int replicas = 0;
};

struct SweepResult {
  std::vector<SweepCell> cells;
};

/// Estimation error sweep over (delta, alpha). alpha = 0 means least
/// squares. Per replica the estimator is the best-objective final across
/// cfg.starts random starts; datasets and starts are shared across cells
/// with the same replica index, so columns are directly comparable.
inline SweepResult run_lowdim_robustness(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::WallClock clock;
  SweepResult result;

  for (double delta : cfg.delta_grid) {
    for (double alpha : cfg.alpha_grid) {
      const LossSpec spec = alpha == 0.0 ? LossSpec::squared() : LossSpec{cfg.loss.family, alpha};
      GrossErrorSpec noise = cfg.noise;
      noise.delta = delta;

      std::vector<double> errors, iters;
      int unique_count = 0;
      for (int rep = 0; rep < cfg.replicas; ++rep) {
        const std::uint64_t data_seed = derive_seed(cfg.solver.seed, static_cast<std::uint64_t>(rep));
        const Dataset ds = generate(cfg.design, noise, data_seed);
        SolverConfig solver = cfg.solver;
        solver.seed = derive_seed(cfg.solver.seed, 1000003, static_cast<std::uint64_t>(rep));
        const TractabilityReport report =
            probe_tractability(ds, spec, solver, cfg.starts, cfg.cluster_tol);
        const int best = report.best_index();
        if (best < 0) continue;  // all starts diverged
        errors.push_back(
            (report.finals[static_cast<std::size_t>(best)] - cfg.design.theta0).norm());
        iters.push_back(detail::mean_iterations(report));
        if (report.unique) ++unique_count;
      }
      SweepCell cell;
      cell.delta = delta;
      cell.alpha = alpha;
      cell.replicas = static_cast<int>(errors.size());
      cell.mean_error = detail::mean_of(errors);
      cell.std_error = detail::stddev_of(errors);
      cell.uniqueness_rate = static_cast<double>(unique_count) / cfg.replicas;
      cell.mean_iterations = detail::mean_of(iters);
      result.cells.push_back(cell);
    }
  }

  auto out = detail::open_csv(cfg.output_dir, "fig2_errors.csv");
  out << "delta,alpha,mean_error,std_error,uniqueness_rate,mean_iterations,replicas\n";
  for (const auto& c : result.cells) {
    out << detail::format_double(c.delta) << "," << detail::format_double(c.alpha) << ","
        << detail::format_double(c.mean_error) << "," << detail::format_double(c.std_error)
        << "," << detail::format_double(c.uniqueness_rate) << ","
        << detail::format_double(c.mean_iterations) << "," << c.replicas << "\n";
  }
  detail::write_manifest(cfg, clock.seconds());
  return result;
}

// ---------------------------------------------------------------------------
// High-dimensional multi-start prox-GD (Figure 3)
// ---------------------------------------------------------------------------

struct HighDimCell {
  double delta = 0.0;
  TractabilityReport report;
  double support_precision = 0.0;
  double support_recall = 0.0;
  bool top_s0_recovery = false;  // true nonzeros are the s0 largest magnitudes
  double mean_iterations = 0.0;
};

struct HighDimResult {
  std::vector<HighDimCell> cells;
};

/// Support metrics of the best-objective final against the true support.
inline void support_metrics(const Eigen::VectorXd& estimate, const Eigen::VectorXd& truth,
                            HighDimCell& cell) {
  const double tol = 1e-6;
  int true_pos = 0, est_nonzero = 0, truth_nonzero = 0;
  for (Eigen::Index j = 0; j < truth.size(); ++j) {
    const bool in_est = std::abs(estimate(j)) > tol;
    const bool in_truth = truth(j) != 0.0;
    est_nonzero += in_est;
    truth_nonzero += in_truth;
    true_pos += in_est && in_truth;
  }
  cell.support_precision = est_nonzero > 0 ? static_cast<double>(true_pos) / est_nonzero : 0.0;
  cell.support_recall = truth_nonzero > 0 ? static_cast<double>(true_pos) / truth_nonzero : 0.0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(truth.size()));
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return std::abs(estimate(a)) > std::abs(estimate(b));
  });
  cell.top_s0_recovery = true;
  for (int k = 0; k < truth_nonzero; ++k) {
    if (truth(order[static_cast<std::size_t>(k)]) == 0.0) {
      cell.top_s0_recovery = false;
      break;
    }
  }
}

/// Multi-start proximal gradient descent on the l1-penalized problem for
/// each delta, sharing the design across deltas. Emits fig3 gap curves and
/// fig3_summary.csv with support metrics.
inline HighDimResult run_highdim(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::WallClock clock;
  HighDimResult result;

  auto summary = detail::open_csv(cfg.output_dir, "fig3_summary.csv");
  summary << "delta,unique,max_pairwise_gap,mean_iterations,support_precision,support_recall,"
             "top_s0_recovery\n";

  for (double delta : cfg.delta_grid) {
    GrossErrorSpec noise = cfg.noise;
    noise.delta = delta;
    const Dataset ds = generate(cfg.design, noise, cfg.solver.seed);
    TractabilityReport report = probe_tractability(ds, cfg.loss, cfg.solver, cfg.starts,
                                                   cfg.cluster_tol);
    HighDimCell cell;
    cell.delta = delta;
    cell.mean_iterations = detail::mean_iterations(report);
    const int best = report.best_index();
    if (best >= 0) {
      support_metrics(report.finals[static_cast<std::size_t>(best)], cfg.design.theta0, cell);
    }
    detail::write_gap_curves(cfg.output_dir,
                             "fig3_gaps_delta" + detail::delta_label(delta) + ".csv", report);
    summary << detail::format_double(delta) << "," << (report.unique ? 1 : 0) << ","
            << detail::format_double(report.max_pairwise_gap) << ","
            << detail::format_double(cell.mean_iterations) << ","
            << detail::format_double(cell.support_precision) << ","
            << detail::format_double(cell.support_recall) << ","
            << (cell.top_s0_recovery ? 1 : 0) << "\n";
    cell.report = std::move(report);
    result.cells.push_back(std::move(cell));
  }
  detail::write_manifest(cfg, clock.seconds());
  return result;
}

// ---------------------------------------------------------------------------
// Case study (Figures 4-5 analogue)
// ---------------------------------------------------------------------------

struct CaseStudyCell {
  double delta = 0.0;
  double alpha = 0.0;
  double mean_pred_error = 0.0;
  double std_pred_error = 0.0;
  double uniqueness_rate = 0.0;
  int replicas = 0;
};

struct CaseStudyResult {
  std::vector<CaseStudyCell> cells;
};

/// Monte Carlo train/test evaluation on a real table: standardize features
/// on the training split, reuse the transform on the test split, corrupt
/// only the training responses, score test MSE against clean responses.
inline CaseStudyResult run_casestudy(const ExperimentConfig& cfg,
                                     const std::filesystem::path& dataset_path) {
  cfg.validate();
  detail::WallClock clock;
  const Dataset full = load_table(dataset_path, TableSchema::WhitespaceLastColResponse);
  if (cfg.case_n_train <= 0 || cfg.case_n_train >= full.n()) {
    throw ConfigError("casestudy: case_n_train must be in (0, n)");
  }

  CaseStudyResult result;
  for (double delta : cfg.delta_grid) {
    for (double alpha : cfg.alpha_grid) {
      const LossSpec spec = alpha == 0.0 ? LossSpec::squared() : LossSpec{cfg.loss.family, alpha};
      GrossErrorSpec noise = cfg.noise;
      noise.delta = delta;

      std::vector<double> errors;
      int unique_count = 0;
      for (int rep = 0; rep < cfg.replicas; ++rep) {
        const std::uint64_t rep_seed = derive_seed(cfg.solver.seed, static_cast<std::uint64_t>(rep));
        auto [train_raw, test_raw] = split(full, cfg.case_n_train, rep_seed);
        auto [train_std, transform] = standardize(train_raw);
        Dataset test = transform.apply(test_raw);

        double y_offset = 0.0;
        Eigen::VectorXd y_train = train_std.y();
        if (cfg.center_response) {
          y_offset = y_train.mean();
          y_train.array() -= y_offset;
        }
        Dataset train(train_std.x(), y_train);
        train = corrupt_responses(train, noise, derive_seed(rep_seed, 7));

        SolverConfig solver = cfg.solver;
        solver.seed = derive_seed(cfg.solver.seed, 1000003, static_cast<std::uint64_t>(rep));
        const TractabilityReport report =
            probe_tractability(train, spec, solver, cfg.starts, cfg.cluster_tol);
        const int best = report.best_index();
        if (best < 0) continue;
        const Eigen::VectorXd& theta = report.finals[static_cast<std::size_t>(best)];
        const Eigen::VectorXd pred = (test.x() * theta).array() + y_offset;
        errors.push_back((test.y() - pred).squaredNorm() / static_cast<double>(test.n()));
        if (report.unique) ++unique_count;
      }
      CaseStudyCell cell;
      cell.delta = delta;
      cell.alpha = alpha;
      cell.replicas = static_cast<int>(errors.size());
      cell.mean_pred_error = detail::mean_of(errors);
      cell.std_pred_error = detail::stddev_of(errors);
      cell.uniqueness_rate = static_cast<double>(unique_count) / cfg.replicas;
      result.cells.push_back(cell);
    }
  }

  auto out = detail::open_csv(cfg.output_dir, "case_pred_error.csv");
  out << "delta,alpha,mean_pred_error,std_pred_error,uniqueness_rate,replicas\n";
  for (const auto& c : result.cells) {
    out << detail::format_double(c.delta) << "," << detail::format_double(c.alpha) << ","
        << detail::format_double(c.mean_pred_error) << ","
        << detail::format_double(c.std_pred_error) << ","
        << detail::format_double(c.uniqueness_rate) << "," << c.replicas << "\n";
  }
  detail::write_manifest(cfg, clock.seconds());
  return result;
}

// ---------------------------------------------------------------------------
// Uniform convergence of the sample gradient (empirical rate check)
// ---------------------------------------------------------------------------

struct UconvPoint {
  int n = 0;
  double sup_gap = 0.0;  // mean over replicas of sup_theta ||grad_n - grad_N||
};

struct UconvResult {
  std::vector<UconvPoint> points;
  double slope = 0.0;  // fitted d log(sup_gap) / d log(n)
};

/// For each ladder n, sup over a fixed theta grid of the gradient gap
/// between the n-row prefix and an N = population_factor * n_max proxy.
inline UconvResult run_uniform_convergence(const ExperimentConfig& cfg) {
  cfg.validate();
  if (cfg.design.p > 5) throw ConfigError("uconv: p must be <= 5 for gridability");
  detail::WallClock clock;

  // Fixed, seed-independent grid in the feasible ball (plus 0 and theta0).
  std::vector<Eigen::VectorXd> grid;
  {
    RngStream rng(0x6d657374u, stream::kStart, 0xffffffffu);
    for (int k = 0; k < cfg.theta_grid_points; ++k) {
      grid.push_back(sample_start(cfg.design.p, cfg.solver.radius, rng));
    }
    grid.push_back(Eigen::VectorXd::Zero(cfg.design.p));
    grid.push_back(cfg.design.theta0);
  }

  const int n_max = *std::max_element(cfg.n_ladder.begin(), cfg.n_ladder.end());
  const int n_big = n_max * cfg.population_factor;

  std::vector<std::vector<double>> gaps(cfg.n_ladder.size());
  for (int rep = 0; rep < cfg.replicas; ++rep) {
    DesignSpec big_design = cfg.design;
    big_design.n = n_big;
    const Dataset big = generate(big_design, cfg.noise, derive_seed(cfg.solver.seed,
                                 static_cast<std::uint64_t>(rep)));

    // gradient of the first n rows, for any n <= n_big
    const auto prefix_gradient = [&](int n, const Eigen::VectorXd& theta) {
      Eigen::VectorXd w = big.y().head(n) - big.x().topRows(n) * theta;
      for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = psi(cfg.loss, w(i));
      return Eigen::VectorXd(-(big.x().topRows(n).transpose() * w) / static_cast<double>(n));
    };

    std::vector<Eigen::VectorXd> population_grad;
    population_grad.reserve(grid.size());
    for (const auto& theta : grid) population_grad.push_back(prefix_gradient(n_big, theta));

    for (std::size_t li = 0; li < cfg.n_ladder.size(); ++li) {
      double sup = 0.0;
      for (std::size_t g = 0; g < grid.size(); ++g) {
        sup = std::max(sup, (prefix_gradient(cfg.n_ladder[li], grid[g]) - population_grad[g]).norm());
      }
      gaps[li].push_back(sup);
    }
  }

  UconvResult result;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const auto m = static_cast<double>(cfg.n_ladder.size());
  for (std::size_t li = 0; li < cfg.n_ladder.size(); ++li) {
    UconvPoint pt;
    pt.n = cfg.n_ladder[li];
    pt.sup_gap = detail::mean_of(gaps[li]);
    result.points.push_back(pt);
    const double x = std::log(static_cast<double>(pt.n));
    const double y = std::log(pt.sup_gap);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  result.slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);

  auto out = detail::open_csv(cfg.output_dir, "uconv_trend.csv");
  out << "n,sup_gap,replicas\n";
  for (const auto& pt : result.points) {
    out << pt.n << "," << detail::format_double(pt.sup_gap) << "," << cfg.replicas << "\n";
  }
  detail::write_manifest(cfg, clock.seconds());
  return result;
}

}  // namespace mest
