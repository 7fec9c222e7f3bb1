#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

#include "mest/errors.hpp"
#include "mest/loss.hpp"
#include "mest/quadrature.hpp"

namespace mest {

constexpr double kDefaultQuadTol = 1e-10;

/// Population-model constants feeding the radius formulas:
/// sigma  - inlier noise std dev,
/// tau    - sub-Gaussian scale of the design,
/// r      - feasible-ball radius,
/// gamma  - E[x x^T] >= gamma tau^2 I,
/// c2     - fourth-moment constant E<u,x>^4 <= c2 tau^4,
/// delta  - contamination ratio.
struct ModelConstants {
  double sigma = 1.0;
  double tau = 1.0;
  double r = 10.0;
  double gamma = 1.0;
  double c2 = 3.0;
  double delta = 0.0;

  void validate() const {
    if (!(sigma > 0.0)) throw ConfigError("theory: sigma must be positive");
    if (!(tau > 0.0)) throw ConfigError("theory: tau must be positive");
    if (!(r > 0.0)) throw ConfigError("theory: r must be positive");
    if (!(gamma > 0.0 && gamma <= 1.0)) throw ConfigError("theory: gamma must be in (0,1]");
    if (!(c2 > 0.0)) throw ConfigError("theory: c2 must be positive");
    if (!(delta >= 0.0 && delta < 1.0)) throw ConfigError("theory: delta must be in [0,1)");
  }
};

/// Robustness radius eta0 (all stationary points within eta0 of theta0),
/// curvature radius eta1 (risk strongly convex there), and the Hessian
/// eigenvalue floor kappa. tractable flags the eta0 < eta1 regime.
struct TheoryRadii {
  double eta0 = 0.0;
  double eta1 = 0.0;
  double kappa = 0.0;
  bool tractable = false;
};

namespace detail {

constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;

inline double normal_pdf(double x, double sigma) {
  const double z = x / sigma;
  return std::exp(-0.5 * z * z) / (sigma * kSqrt2Pi);
}

inline void require_bounded_psi(const LossSpec& spec, const char* op) {
  if (!std::isfinite(bounds(spec).l_psi)) {
    throw ConfigError(std::string(op) + ": requires a bounded score function (not squared loss)");
  }
}

}  // namespace detail

/// h(z) = E_{eps ~ N(0, sigma^2)} psi(z + eps), by adaptive quadrature.
/// The symmetrized integrand (psi(z+e) + psi(z-e)) phi(e) on [0, 12 sigma]
/// avoids the odd-function cancellation that would sink small-z accuracy.
inline double h_numeric(const LossSpec& spec, double sigma, double z,
                        double quad_tol = kDefaultQuadTol) {
  spec.validate();
  detail::require_bounded_psi(spec, "h_numeric");
  if (!(sigma > 0.0)) throw ConfigError("h_numeric: sigma must be positive");
  const auto integrand = [&](double eps) {
    return (psi(spec, z + eps) + psi(spec, z - eps)) * detail::normal_pdf(eps, sigma);
  };
  return integrate_adaptive(integrand, 0.0, 12.0 * sigma, quad_tol);
}

/// h'(0) = E_{eps ~ N(0, sigma^2)} psi'(eps), by adaptive quadrature.
inline double h_prime0_numeric(const LossSpec& spec, double sigma,
                               double quad_tol = kDefaultQuadTol) {
  spec.validate();
  detail::require_bounded_psi(spec, "h_prime0_numeric");
  if (!(sigma > 0.0)) throw ConfigError("h_prime0_numeric: sigma must be positive");
  const auto integrand = [&](double eps) {
    return psi_prime(spec, eps) * detail::normal_pdf(eps, sigma);
  };
  return integrate_adaptive(integrand, -12.0 * sigma, 12.0 * sigma, quad_tol);
}

/// Closed form of h for the Welsch family under Gaussian noise.
inline double welsch_h_closed(double alpha, double sigma, double z) {
  const double a = 1.0 + alpha * sigma * sigma;
  return z * std::pow(a, -1.5) * std::exp(-0.5 * alpha * z * z / a);
}

/// h'(0) = (1 + alpha sigma^2)^{-3/2} for the Welsch family.
inline double welsch_h_prime0(double alpha, double sigma) {
  return std::pow(1.0 + alpha * sigma * sigma, -1.5);
}

/// h'(0) = P(|eps| < alpha) = erf(alpha / (sqrt(2) sigma)) for Huber.
inline double huber_h_prime0(double alpha, double sigma) {
  return std::erf(alpha / (std::sqrt(2.0) * sigma));
}

/// H(s) = inf_{0 < z <= s} h(z)/z estimated on a log grid with golden-section
/// refinement around the grid minimum. Quadrature tolerance is scaled with z
/// so the h(z)/z quotient keeps uniform absolute accuracy.
inline double big_h_numeric(const LossSpec& spec, double sigma, double s,
                            double quad_tol = kDefaultQuadTol) {
  if (!(s > 0.0)) throw ConfigError("big_h: s must be positive");
  // The quadrature tolerance scales with z so h(z)/z keeps uniform absolute
  // accuracy, but cannot go below the rounding noise of the psi(z+e)+psi(z-e)
  // cancellation, which is ~eps * sup|psi| independent of z.
  const double noise_floor = 1e-15 * (1.0 + tight_psi_bound(spec));
  const auto quotient = [&](double z) {
    const double tol = std::max(quad_tol * (z / s), noise_floor);
    return h_numeric(spec, sigma, z, tol) / z;
  };

  constexpr int kGridPoints = 10000;
  double best_z = s;
  double best_q = quotient(s);
  for (int k = 0; k < kGridPoints; ++k) {
    // log-spaced from 1e-8 s to s
    const double frac = static_cast<double>(k) / (kGridPoints - 1);
    const double z = s * std::pow(10.0, -8.0 * (1.0 - frac));
    const double q = quotient(z);
    if (q < best_q) {
      best_q = q;
      best_z = z;
    }
  }

  // Golden-section around the grid minimum.
  const double ratio = std::pow(10.0, 8.0 / (kGridPoints - 1));
  double lo = std::max(best_z / ratio, 1e-12 * s);
  double hi = std::min(best_z * ratio, s);
  constexpr double kInvPhi = 0.6180339887498948482;
  double x1 = hi - kInvPhi * (hi - lo);
  double x2 = lo + kInvPhi * (hi - lo);
  double q1 = quotient(x1);
  double q2 = quotient(x2);
  for (int it = 0; it < 80 && (hi - lo) > 1e-12 * s; ++it) {
    if (q1 < q2) {
      hi = x2;
      x2 = x1;
      q2 = q1;
      x1 = hi - kInvPhi * (hi - lo);
      q1 = quotient(x1);
    } else {
      lo = x1;
      x1 = x2;
      q1 = q2;
      x2 = lo + kInvPhi * (hi - lo);
      q2 = quotient(x2);
    }
  }
  return std::min(best_q, std::min(q1, q2));
}

/// H(s); the Welsch family uses its closed form (h(z)/z is decreasing, so
/// the infimum sits at z = s), other families fall back to the numeric scan.
inline double big_h(const LossSpec& spec, double sigma, double s,
                    double quad_tol = kDefaultQuadTol) {
  spec.validate();
  if (!(s > 0.0)) throw ConfigError("big_h: s must be positive");
  if (spec.family == LossFamily::Welsch && spec.alpha > 0.0) {
    const double a = 1.0 + spec.alpha * sigma * sigma;
    return std::pow(a, -1.5) * std::exp(-0.5 * spec.alpha * s * s / a);
  }
  return big_h_numeric(spec, sigma, s, quad_tol);
}

namespace detail {

inline double s_tilde(const ModelConstants& mc) {
  return (8.0 * mc.tau * mc.r / 3.0) * std::sqrt(mc.c2 / mc.gamma);
}

inline double kappa_value(double h_prime0, const ModelConstants& mc, double psi1_bound) {
  return 0.5 * ((1.0 - mc.delta) * h_prime0 * mc.gamma - mc.delta * psi1_bound) * mc.tau *
         mc.tau;
}

}  // namespace detail

/// Huber radii under Gaussian design: closed-form eta0, eta1 = +infinity
/// (the loss is convex), kappa from the quadrature value of h'(0).
inline TheoryRadii huber_radii(double alpha, const ModelConstants& mc,
                               double quad_tol = kDefaultQuadTol) {
  mc.validate();
  if (!(alpha > 0.0)) throw ConfigError("huber_radii: alpha must be positive");
  const double s2 = mc.sigma * mc.sigma;
  TheoryRadii out;
  out.eta0 = mc.delta / (1.0 - mc.delta) * 4.0 * detail::kSqrt2Pi * s2 * mc.sigma /
             ((alpha * alpha + 3.0 * s2) * mc.tau) *
             std::exp((alpha * alpha + 22.0 * mc.tau * mc.tau * mc.r * mc.r) / (2.0 * s2));
  out.eta1 = std::numeric_limits<double>::infinity();
  const double hp0 = h_prime0_numeric(LossSpec::huber(alpha), mc.sigma, quad_tol);
  out.kappa = detail::kappa_value(hp0, mc, bounds(LossSpec::huber(alpha)).l_psi1);
  out.tractable = out.eta0 < out.eta1;
  return out;
}

/// Welsch radii, closed forms. alpha = 0 degenerates to
/// least squares: convex everywhere (eta1 infinite) but not robust (eta0
/// infinite once delta > 0).
inline TheoryRadii welsch_radii(double alpha, const ModelConstants& mc) {
  mc.validate();
  if (!(alpha >= 0.0)) throw ConfigError("welsch_radii: alpha must be nonnegative");
  TheoryRadii out;
  const double s2 = mc.sigma * mc.sigma;
  if (alpha == 0.0) {
    out.eta0 = mc.delta == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
    out.eta1 = std::numeric_limits<double>::infinity();
    out.kappa = detail::kappa_value(1.0, mc, 1.0);
    out.tractable = out.eta0 < out.eta1;
    return out;
  }
  const double a = 1.0 + alpha * s2;
  const double a32 = std::pow(a, 1.5);
  out.eta0 = mc.delta / (1.0 - mc.delta) * std::sqrt(std::exp(1.0) / alpha) * 4.0 * a32 /
             mc.tau *
             std::exp(32.0 * alpha * mc.r * mc.r * mc.tau * mc.tau / (3.0 * a));
  const double tau2 = mc.tau * mc.tau;
  out.eta1 = (tau2 - mc.delta * (tau2 + a32)) /
             (3.0 * std::sqrt(3.0 * alpha) * a32 * mc.tau);
  out.kappa = detail::kappa_value(welsch_h_prime0(alpha, mc.sigma), mc, 1.0);
  out.tractable = out.eta1 > 0.0 && out.eta0 < out.eta1;
  return out;
}

/// Constants under which the generic eta0 pipeline reproduces
/// welsch_radii() exactly: uniform design on [-tau, tau]^p has gamma = 1/3,
/// and the closed form's exponent corresponds to c2 = 1.
inline ModelConstants welsch_uniform_constants(double sigma, double tau, double r,
                                               double delta) {
  ModelConstants mc;
  mc.sigma = sigma;
  mc.tau = tau;
  mc.r = r;
  mc.gamma = 1.0 / 3.0;
  mc.c2 = 1.0;
  mc.delta = delta;
  return mc;
}

/// Generic robustness radius
///   eta0 = delta L_psi / ((1-delta) (3/4) H(s~) tau gamma),
/// with s~ = (8 tau r / 3) sqrt(c2/gamma) and H from big_h. Independent of
/// the family-specific closed forms, which it should reproduce.
inline double generic_eta0(const LossSpec& spec, const ModelConstants& mc,
                           double quad_tol = kDefaultQuadTol) {
  mc.validate();
  spec.validate();
  detail::require_bounded_psi(spec, "generic_eta0");
  if (mc.delta == 0.0) return 0.0;
  const double l_psi = bounds(spec).l_psi;
  const double h_val = big_h(spec, mc.sigma, detail::s_tilde(mc), quad_tol);
  return mc.delta * l_psi / ((1.0 - mc.delta) * 0.75 * h_val * mc.tau * mc.gamma);
}

/// eta0 evaluated through the same generic formula but with a closed-form
/// lower bound on h in place of the exact h. Sits between generic_eta0
/// (exact h) and huber_radii().eta0 (which further rounds the exponent
/// constant 64/3 up to 22).
inline double huber_eta0_bound_based(double alpha, const ModelConstants& mc) {
  mc.validate();
  if (!(alpha > 0.0)) throw ConfigError("huber_eta0_bound_based: alpha must be positive");
  if (mc.delta == 0.0) return 0.0;
  const double s2 = mc.sigma * mc.sigma;
  const double st = detail::s_tilde(mc);
  const double h_lb = alpha * (alpha * alpha + 3.0 * s2) /
                      (3.0 * detail::kSqrt2Pi * s2 * mc.sigma) *
                      std::exp(-(st * st + alpha * alpha) / (2.0 * s2));
  return mc.delta * alpha / ((1.0 - mc.delta) * 0.75 * h_lb * mc.tau * mc.gamma);
}

/// Statistical radius of the l1-penalized problem and the recommended
/// penalty level, with the constants spelled out.
struct HighDimRadius {
  double r_s = 0.0;        // stationary points live in B(theta0, r_s)
  double lambda_rec = 0.0; // recommended lambda_n
  double c0 = 0.0;         // L_psi / ((3/4) H(s~) tau gamma)
  double c1 = 0.0;         // max(1, C_pi) / ((3/4) H(s~) tau gamma)
};

/// r_s = delta/(1-delta) C0 + 4 sqrt(s0)/(1-delta) (M sqrt(log p / n) + lambda_n) C1.
inline HighDimRadius high_dim_radius(const LossSpec& spec, const ModelConstants& mc, int s0,
                                     int n, int p, double lambda_n, double m_bound = 1.0,
                                     double c_pi = 1.0, double quad_tol = kDefaultQuadTol) {
  mc.validate();
  spec.validate();
  detail::require_bounded_psi(spec, "high_dim_radius");
  if (s0 <= 0 || n <= 0 || p <= 1) throw ConfigError("high_dim_radius: need s0, n > 0, p > 1");
  if (!(lambda_n >= 0.0)) throw ConfigError("high_dim_radius: lambda_n must be nonnegative");
  if (!(m_bound > 0.0) || !(c_pi > 0.0)) {
    throw ConfigError("high_dim_radius: m_bound and c_pi must be positive");
  }

  const double l_psi = bounds(spec).l_psi;
  const double h_val = big_h(spec, mc.sigma, detail::s_tilde(mc), quad_tol);
  const double denom = 0.75 * h_val * mc.tau * mc.gamma;
  const double rate = std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));

  HighDimRadius out;
  out.c0 = l_psi / denom;
  out.c1 = std::max(1.0, c_pi) / denom;
  out.r_s = mc.delta / (1.0 - mc.delta) * out.c0 +
            4.0 * std::sqrt(static_cast<double>(s0)) / (1.0 - mc.delta) *
                (m_bound * rate + lambda_n) * out.c1;
  out.lambda_rec = 2.0 * c_pi * m_bound * rate +
                   0.5 * l_psi * mc.tau * mc.delta / std::sqrt(static_cast<double>(s0));
  return out;
}

}  // namespace mest
