#pragma once

#include <json.hpp>
#include <limits>
#include <string>
#include <vector>

#include "mest/data.hpp"
#include "mest/loss.hpp"
#include "mest/risk.hpp"
#include "mest/solver.hpp"
#include "mest/theory.hpp"

namespace mest {

using json = nlohmann::json;

namespace detail {

/// JSON has no infinity literal; radii that can be infinite round-trip as
/// the string "infinity".
inline json num_or_inf(double v) {
  if (std::isinf(v)) return v > 0 ? json("infinity") : json("-infinity");
  return json(v);
}

inline std::vector<double> to_std(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace detail

inline void to_json(json& j, const LossSpec& spec) {
  j = json{{"family", family_name(spec.family)}, {"alpha", spec.alpha}};
}

inline void from_json(const json& j, LossSpec& spec) {
  spec.family = parse_family(j.at("family").get<std::string>());
  spec.alpha = j.value("alpha", 0.0);
  spec.validate();
}

inline void to_json(json& j, const GrossErrorSpec& noise) {
  j = json{{"delta", noise.delta},
           {"sigma", noise.sigma},
           {"outlier_mean_mode",
            noise.mean_mode == GrossErrorSpec::MeanMode::XNormPlusOne ? "xnorm_plus_one"
                                                                      : "constant"},
           {"outlier_mean_value", noise.mean_value},
           {"outlier_sigma", noise.outlier_sigma}};
}

inline void from_json(const json& j, GrossErrorSpec& noise) {
  noise.delta = j.value("delta", 0.0);
  noise.sigma = j.value("sigma", 1.0);
  const std::string mode = j.value("outlier_mean_mode", std::string("xnorm_plus_one"));
  if (mode == "xnorm_plus_one") {
    noise.mean_mode = GrossErrorSpec::MeanMode::XNormPlusOne;
  } else if (mode == "constant") {
    noise.mean_mode = GrossErrorSpec::MeanMode::Constant;
  } else {
    throw ConfigError("noise: unknown outlier_mean_mode '" + mode + "'");
  }
  noise.mean_value = j.value("outlier_mean_value", 0.0);
  noise.outlier_sigma = j.value("outlier_sigma", 3.0);
  noise.validate();
}

inline void to_json(json& j, const DesignSpec& design) {
  j = json{{"n", design.n},
           {"p", design.p},
           {"distribution",
            design.dist == DesignSpec::Dist::GaussianIsotropic ? "gaussian" : "uniform"},
           {"tau", design.tau},
           {"theta0", detail::to_std(design.theta0)}};
}

inline void from_json(const json& j, DesignSpec& design) {
  design.n = j.at("n").get<int>();
  design.p = j.at("p").get<int>();
  const std::string dist = j.value("distribution", std::string("gaussian"));
  if (dist == "gaussian") {
    design.dist = DesignSpec::Dist::GaussianIsotropic;
  } else if (dist == "uniform") {
    design.dist = DesignSpec::Dist::UniformBox;
  } else {
    throw ConfigError("design: unknown distribution '" + dist + "'");
  }
  design.tau = j.value("tau", 1.0);
  if (!j.contains("theta0")) {
    // default ground truth: dense, unit l2 norm
    design.theta0 = sparse_theta0(design.p, design.p, 1.0 / std::sqrt(design.p));
  } else if (j.at("theta0").is_array()) {
    design.theta0 = detail::to_eigen(j.at("theta0").get<std::vector<double>>());
  } else {
    const auto& t = j.at("theta0");
    design.theta0 = sparse_theta0(design.p, t.at("s0").get<int>(), t.at("value").get<double>());
  }
  design.validate();
}

inline void to_json(json& j, const SolverConfig& cfg) {
  j = json{{"radius", cfg.radius},   {"step_size", cfg.step_size},
           {"lambda_n", cfg.lambda_n}, {"max_iters", cfg.max_iters},
           {"tol", cfg.tol},         {"seed", cfg.seed},
           {"record_stride", cfg.record_stride}, {"backtracking", cfg.backtracking}};
}

inline void from_json(const json& j, SolverConfig& cfg) {
  cfg.radius = j.value("radius", 10.0);
  cfg.step_size = j.value("step_size", 1.0);
  cfg.lambda_n = j.value("lambda_n", 0.0);
  cfg.max_iters = j.value("max_iters", 10000);
  cfg.tol = j.value("tol", 1e-8);
  cfg.seed = j.value("seed", std::uint64_t{0});
  cfg.record_stride = j.value("record_stride", 1);
  cfg.backtracking = j.value("backtracking", false);
  cfg.validate();
}

inline void to_json(json& j, const ModelConstants& mc) {
  j = json{{"sigma", mc.sigma}, {"tau", mc.tau},  {"r", mc.r},
           {"gamma", mc.gamma}, {"c2", mc.c2},    {"delta", mc.delta}};
}

inline void from_json(const json& j, ModelConstants& mc) {
  mc.sigma = j.value("sigma", 1.0);
  mc.tau = j.value("tau", 1.0);
  mc.r = j.value("r", 10.0);
  mc.gamma = j.value("gamma", 1.0);
  mc.c2 = j.value("c2", 3.0);
  mc.delta = j.value("delta", 0.0);
  mc.validate();
}

inline void to_json(json& j, const RiskEval& eval) {
  j = json{{"value", eval.value}};
  if (eval.gradient) j["gradient"] = detail::to_std(*eval.gradient);
  if (eval.hessian) {
    std::vector<std::vector<double>> rows;
    for (Eigen::Index i = 0; i < eval.hessian->rows(); ++i) {
      rows.push_back(detail::to_std(eval.hessian->row(i)));
    }
    j["hessian"] = rows;
  }
}

inline void to_json(json& j, const SolveTrace& trace) {
  j = json{{"converged", trace.converged},
           {"iterations", trace.iterations},
           {"final_objective", trace.final_objective()},
           {"theta_final", detail::to_std(trace.theta_final)}};
}

inline void to_json(json& j, const TractabilityReport& report) {
  json clusters = json::array();
  for (const auto& c : report.clusters) {
    clusters.push_back(json{{"members", c.members},
                            {"representative", detail::to_std(c.representative)}});
  }
  int diverged = 0;
  for (auto flag : report.diverged) diverged += flag;
  j = json{{"starts", report.starts},
           {"unique", report.unique},
           {"max_pairwise_gap", report.max_pairwise_gap},
           {"cluster_tol", report.cluster_tol},
           {"diverged_starts", diverged},
           {"clusters", clusters}};
}

inline void to_json(json& j, const McEstimate& mc) {
  j = json{{"value", mc.value}, {"std_error", mc.std_error}, {"n_samples", mc.n_samples}};
}

}  // namespace mest
