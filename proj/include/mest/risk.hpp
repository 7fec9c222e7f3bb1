#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstdint>
#include <optional>

#include "mest/data.hpp"
#include "mest/errors.hpp"
#include "mest/loss.hpp"

namespace mest {

namespace detail {

/// Neumaier compensated accumulator; keeps sums reduction-order stable
/// to ~1e-16 relative regardless of n.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v)) {
      comp_ += (sum_ - t) + v;
    } else {
      comp_ += (v - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline void check_dims(const Dataset& ds, const Eigen::VectorXd& theta) {
  if (theta.size() != ds.p()) {
    throw ConfigError("risk: theta length does not match feature count");
  }
}

}  // namespace detail

/// R_hat_n(theta) = (1/n) sum_i rho(y_i - <theta, x_i>).
inline double empirical_risk(const Dataset& ds, const LossSpec& spec,
                             const Eigen::VectorXd& theta) {
  detail::check_dims(ds, theta);
  const Eigen::VectorXd residual = ds.y() - ds.x() * theta;
  detail::CompensatedSum acc;
  for (Eigen::Index i = 0; i < residual.size(); ++i) acc.add(rho(spec, residual(i)));
  return acc.value() / static_cast<double>(ds.n());
}

/// grad R_hat_n(theta) = -(1/n) sum_i psi(y_i - <theta, x_i>) x_i.
inline Eigen::VectorXd empirical_gradient(const Dataset& ds, const LossSpec& spec,
                                          const Eigen::VectorXd& theta) {
  detail::check_dims(ds, theta);
  Eigen::VectorXd weights = ds.y() - ds.x() * theta;
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights(i) = psi(spec, weights(i));
  return -(ds.x().transpose() * weights) / static_cast<double>(ds.n());
}

/// Dense Hessian (1/n) sum_i psi'(r_i) x_i x_i^T, symmetrized. Refuses
/// p > 2000; use hessian_quadratic_form on larger problems.
inline Eigen::MatrixXd empirical_hessian(const Dataset& ds, const LossSpec& spec,
                                         const Eigen::VectorXd& theta) {
  detail::check_dims(ds, theta);
  if (ds.p() > 2000) {
    throw ConfigError("risk: dense hessian limited to p <= 2000; use hessian_quadratic_form");
  }
  Eigen::VectorXd weights = ds.y() - ds.x() * theta;
  for (Eigen::Index i = 0; i < weights.size(); ++i) weights(i) = psi_prime(spec, weights(i));
  Eigen::MatrixXd h =
      ds.x().transpose() * weights.asDiagonal() * ds.x() / static_cast<double>(ds.n());
  return 0.5 * (h + h.transpose());
}

/// v^T grad^2 R_hat_n(theta) v without materializing the p x p matrix.
inline double hessian_quadratic_form(const Dataset& ds, const LossSpec& spec,
                                     const Eigen::VectorXd& theta, const Eigen::VectorXd& v) {
  detail::check_dims(ds, theta);
  if (v.size() != ds.p()) throw ConfigError("risk: direction length does not match");
  const Eigen::VectorXd residual = ds.y() - ds.x() * theta;
  const Eigen::VectorXd proj = ds.x() * v;
  detail::CompensatedSum acc;
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    acc.add(psi_prime(spec, residual(i)) * proj(i) * proj(i));
  }
  return acc.value() / static_cast<double>(ds.n());
}

/// L_hat_n(theta) = R_hat_n(theta) + lambda_n ||theta||_1.
inline double penalized_objective(const Dataset& ds, const LossSpec& spec,
                                  const Eigen::VectorXd& theta, double lambda_n) {
  if (!(lambda_n >= 0.0)) throw ConfigError("risk: lambda_n must be nonnegative");
  return empirical_risk(ds, spec, theta) + lambda_n * theta.lpNorm<1>();
}

/// Value plus optional derivatives, bundled for serialization.
struct RiskEval {
  double value = 0.0;
  std::optional<Eigen::VectorXd> gradient;
  std::optional<Eigen::MatrixXd> hessian;
};

inline RiskEval evaluate_risk(const Dataset& ds, const LossSpec& spec,
                              const Eigen::VectorXd& theta, bool with_gradient = true,
                              bool with_hessian = false) {
  RiskEval eval;
  eval.value = empirical_risk(ds, spec, theta);
  if (with_gradient) eval.gradient = empirical_gradient(ds, spec, theta);
  if (with_hessian) eval.hessian = empirical_hessian(ds, spec, theta);
  return eval;
}

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n_samples = 0;
};

/// Monte Carlo estimate of the population risk R(theta) = E rho(Y - <theta, X>).
/// Draws one synthetic sample of size n_mc; reusing the seed with generate()
/// reproduces the identical sample.
inline McEstimate population_risk_mc(const DesignSpec& design, const GrossErrorSpec& noise,
                                     const LossSpec& spec, const Eigen::VectorXd& theta,
                                     int n_mc, std::uint64_t seed) {
  if (n_mc < 100) throw ConfigError("population_risk_mc: n_mc must be at least 100");
  DesignSpec mc_design = design;
  mc_design.n = n_mc;
  const Dataset sample = generate(mc_design, noise, seed);
  detail::check_dims(sample, theta);

  const Eigen::VectorXd residual = sample.y() - sample.x() * theta;
  detail::CompensatedSum sum;
  for (Eigen::Index i = 0; i < residual.size(); ++i) sum.add(rho(spec, residual(i)));
  const double mean = sum.value() / static_cast<double>(n_mc);

  detail::CompensatedSum sq;
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    const double d = rho(spec, residual(i)) - mean;
    sq.add(d * d);
  }
  const double variance = sq.value() / static_cast<double>(n_mc - 1);
  return {mean, std::sqrt(variance / static_cast<double>(n_mc)), n_mc};
}

}  // namespace mest
