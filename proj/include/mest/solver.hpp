#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "mest/errors.hpp"
#include "mest/risk.hpp"
#include "mest/rng.hpp"

namespace mest {

/// Euclidean projection onto the centered l2 ball of the given radius.
inline Eigen::VectorXd project_ball(const Eigen::VectorXd& v, double radius) {
  if (!(radius > 0.0)) throw ConfigError("project_ball: radius must be positive");
  const double norm = v.norm();
  if (norm <= radius) return v;
  return v * (radius / norm);
}

/// Componentwise shrinkage sign(v_i) max(|v_i| - t, 0); prox of t||.||_1.
inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& v, double t) {
  if (!(t >= 0.0)) throw ConfigError("soft_threshold: threshold must be nonnegative");
  if (t == 0.0) return v;
  Eigen::VectorXd out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double mag = std::abs(v(i)) - t;
    out(i) = mag > 0.0 ? (v(i) > 0.0 ? mag : -mag) : 0.0;
  }
  return out;
}

/// Exact prox of t||.||_1 + indicator of the l2 ball. Shrink-then-project is
/// exact here: scaling a soft-thresholded point toward the origin keeps its
/// sign pattern, so the KKT conditions of the combined problem still hold.
inline Eigen::VectorXd prox_l1_ball(const Eigen::VectorXd& v, double t, double radius) {
  return project_ball(soft_threshold(v, t), radius);
}

struct SolverConfig {
  double radius = 10.0;
  double step_size = 1.0;
  double lambda_n = 0.0;
  int max_iters = 10000;
  double tol = 1e-8;
  std::uint64_t seed = 0;
  int record_stride = 1;
  bool backtracking = false;

  void validate() const {
    if (!(radius > 0.0)) throw ConfigError("solver: radius must be positive");
    if (!(step_size > 0.0)) throw ConfigError("solver: step_size must be positive");
    if (!(lambda_n >= 0.0)) throw ConfigError("solver: lambda_n must be nonnegative");
    if (max_iters <= 0) throw ConfigError("solver: max_iters must be positive");
    if (!(tol > 0.0)) throw ConfigError("solver: tol must be positive");
    if (record_stride <= 0) throw ConfigError("solver: record_stride must be positive");
  }
};

/// Convergence history of one solve. Records are taken every record_stride
/// iterations (iteration 0 = the projected start) plus the final iterate.
struct SolveTrace {
  std::vector<int> recorded_iters;
  std::vector<double> iterate_gap;  // ||theta_k - theta_final||_2 per record
  std::vector<double> objective;    // penalized objective per record
  bool converged = false;
  int iterations = 0;
  Eigen::VectorXd theta_final;

  double final_objective() const { return objective.back(); }
};

namespace detail {

inline SolveTrace run_prox_gd(const Dataset& ds, const LossSpec& spec, const SolverConfig& cfg,
                              const Eigen::VectorXd& theta_init) {
  cfg.validate();
  spec.validate();
  detail::check_dims(ds, theta_init);

  const double runaway = 10.0 * cfg.radius;
  Eigen::VectorXd theta = project_ball(theta_init, cfg.radius);

  std::vector<Eigen::VectorXd> recorded;
  SolveTrace trace;
  const auto record = [&](int iter, const Eigen::VectorXd& th, double obj) {
    trace.recorded_iters.push_back(iter);
    recorded.push_back(th);
    trace.objective.push_back(obj);
  };
  double current_obj = penalized_objective(ds, spec, theta, cfg.lambda_n);
  record(0, theta, current_obj);

  int iter = 0;
  for (iter = 1; iter <= cfg.max_iters; ++iter) {
    const Eigen::VectorXd grad = empirical_gradient(ds, spec, theta);
    double step = cfg.step_size;
    Eigen::VectorXd next;
    double obj = 0.0;
    double disp_sq = 0.0;
    for (int halving = 0;; ++halving) {
      const Eigen::VectorXd cand = theta - step * grad;
      if (!cand.allFinite() || cand.norm() > runaway) {
        throw SolverDivergence("iterate left 10x the feasible ball; step size too large?");
      }
      next = prox_l1_ball(cand, step * cfg.lambda_n, cfg.radius);
      obj = penalized_objective(ds, spec, next, cfg.lambda_n);
      if (!std::isfinite(obj)) {
        throw SolverDivergence("non-finite objective; step size too large?");
      }
      disp_sq = (next - theta).squaredNorm();
      // prox-GD sufficient decrease; holds whenever step <= 1/L
      if (!cfg.backtracking || halving >= 40 ||
          obj <= current_obj - 0.25 * disp_sq / step) {
        break;
      }
      step *= 0.5;
    }
    theta = std::move(next);
    current_obj = obj;
    if (iter % cfg.record_stride == 0) record(iter, theta, obj);
    if (disp_sq <= cfg.tol * cfg.tol) {
      if (iter % cfg.record_stride != 0) record(iter, theta, obj);
      trace.converged = true;
      break;
    }
  }
  if (!trace.converged) {
    iter = cfg.max_iters;
    if (trace.recorded_iters.back() != iter) {
      record(iter, theta, current_obj);
    }
  }
  trace.iterations = iter;
  trace.theta_final = theta;
  trace.iterate_gap.resize(recorded.size());
  for (std::size_t k = 0; k < recorded.size(); ++k) {
    trace.iterate_gap[k] = (recorded[k] - theta).norm();
  }
  return trace;
}

}  // namespace detail

/// Projected gradient descent for the ball-constrained problem (lambda_n = 0).
inline SolveTrace solve_pgd(const Dataset& ds, const LossSpec& spec, const SolverConfig& cfg,
                            const Eigen::VectorXd& theta_init) {
  if (cfg.lambda_n != 0.0) {
    throw ConfigError("solve_pgd: lambda_n must be 0; use solve_prox_gd");
  }
  return detail::run_prox_gd(ds, spec, cfg, theta_init);
}

/// Proximal gradient descent for the l1-penalized, ball-constrained problem.
inline SolveTrace solve_prox_gd(const Dataset& ds, const LossSpec& spec, const SolverConfig& cfg,
                                const Eigen::VectorXd& theta_init) {
  return detail::run_prox_gd(ds, spec, cfg, theta_init);
}

/// Uniform draw from the l2 ball: Gaussian direction, radius scaled by U^(1/p).
inline Eigen::VectorXd sample_start(int p, double radius, RngStream& rng) {
  if (p <= 0) throw ConfigError("sample_start: p must be positive");
  if (!(radius > 0.0)) throw ConfigError("sample_start: radius must be positive");
  Eigen::VectorXd direction(p);
  for (int j = 0; j < p; ++j) direction(j) = rng.next_gaussian();
  double norm = direction.norm();
  if (norm == 0.0) {
    direction(0) = 1.0;
    norm = 1.0;
  }
  const double scale = radius * std::pow(rng.next_open_double(), 1.0 / static_cast<double>(p));
  return direction * (scale / norm);
}

/// Multi-start outcome: do all runs land on the same stationary point?
struct TractabilityReport {
  struct Cluster {
    Eigen::VectorXd representative;  // first member assigned
    std::vector<int> member_indices;  // indices into finals
    int members = 0;
  };

  int starts = 0;
  std::vector<SolveTrace> traces;        // one per non-diverged start, in start order
  std::vector<std::uint8_t> diverged;    // one flag per start
  std::vector<Eigen::VectorXd> finals;   // final iterates of non-diverged starts
  double max_pairwise_gap = 0.0;
  double cluster_tol = 0.0;
  std::vector<Cluster> clusters;
  bool unique = false;

  /// Index into finals/traces of the best-objective run.
  int best_index() const {
    int best = -1;
    for (std::size_t k = 0; k < traces.size(); ++k) {
      if (best < 0 || traces[k].final_objective() <
                          traces[static_cast<std::size_t>(best)].final_objective()) {
        best = static_cast<int>(k);
      }
    }
    return best;
  }
};

/// Runs the solver from n_starts random points in the feasible ball and
/// clusters the final iterates (greedy single linkage at cluster_tol).
/// unique means: nothing diverged and all finals agree within cluster_tol.
inline TractabilityReport probe_tractability(const Dataset& ds, const LossSpec& spec,
                                             const SolverConfig& cfg, int n_starts,
                                             double cluster_tol = 1e-3) {
  if (n_starts < 2) throw ConfigError("probe_tractability: need at least 2 starts");
  if (!(cluster_tol > 0.0)) throw ConfigError("probe_tractability: cluster_tol must be positive");
  cfg.validate();

  TractabilityReport report;
  report.starts = n_starts;
  report.cluster_tol = cluster_tol;
  report.diverged.assign(static_cast<std::size_t>(n_starts), 0);

  for (int s = 0; s < n_starts; ++s) {
    RngStream rng(cfg.seed, stream::kStart, static_cast<std::uint64_t>(s));
    const Eigen::VectorXd init = sample_start(static_cast<int>(ds.p()), cfg.radius, rng);
    try {
      SolveTrace trace = detail::run_prox_gd(ds, spec, cfg, init);
      report.finals.push_back(trace.theta_final);
      report.traces.push_back(std::move(trace));
    } catch (const SolverDivergence&) {
      report.diverged[static_cast<std::size_t>(s)] = 1;
    }
  }

  for (std::size_t a = 0; a < report.finals.size(); ++a) {
    for (std::size_t b = a + 1; b < report.finals.size(); ++b) {
      report.max_pairwise_gap =
          std::max(report.max_pairwise_gap, (report.finals[a] - report.finals[b]).norm());
    }
  }

  // Greedy single linkage: join the first cluster with any member in range.
  for (std::size_t k = 0; k < report.finals.size(); ++k) {
    const auto& theta_k = report.finals[k];
    bool placed = false;
    for (auto& cluster : report.clusters) {
      for (int idx : cluster.member_indices) {
        if ((theta_k - report.finals[static_cast<std::size_t>(idx)]).norm() <= cluster_tol) {
          placed = true;
          break;
        }
      }
      if (placed) {
        cluster.member_indices.push_back(static_cast<int>(k));
        ++cluster.members;
        break;
      }
    }
    if (!placed) {
      report.clusters.push_back({theta_k, {static_cast<int>(k)}, 1});
    }
  }

  const bool any_diverged =
      std::count(report.diverged.begin(), report.diverged.end(), std::uint8_t{1}) > 0;
  report.unique =
      !any_diverged && !report.finals.empty() && report.max_pairwise_gap <= cluster_tol;
  return report;
}

}  // namespace mest
