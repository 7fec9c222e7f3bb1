#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "mest/errors.hpp"

namespace mest {

enum class LossFamily { Squared, Huber, Welsch };

/// A loss family together with its tuning parameter.
///
/// Squared: rho(t) = t^2/2 (alpha ignored).
/// Huber:   rho(t) = t^2/2 on |t| <= alpha, alpha(|t| - alpha/2) outside.
/// Welsch:  rho(t) = (1 - exp(-alpha t^2/2)) / alpha, with alpha = 0 meaning
///          the squared-loss limit.
struct LossSpec {
  LossFamily family = LossFamily::Squared;
  double alpha = 0.0;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
      throw ConfigError("loss: alpha must be finite and nonnegative");
    }
    if (family == LossFamily::Huber && alpha <= 0.0) {
      throw ConfigError("loss: huber requires alpha > 0");
    }
  }

  static LossSpec squared() { return {LossFamily::Squared, 0.0}; }
  static LossSpec huber(double alpha) { return {LossFamily::Huber, alpha}; }
  static LossSpec welsch(double alpha) { return {LossFamily::Welsch, alpha}; }
};

/// Uniform bounds on |psi|, |psi'|, |psi''| over the whole real line.
/// l_psi is +infinity for the squared family.
struct LossBounds {
  double l_psi = 0.0;
  double l_psi1 = 0.0;
  double l_psi2 = 0.0;
};

inline double rho(const LossSpec& spec, double t) {
  spec.validate();
  switch (spec.family) {
    case LossFamily::Squared:
      return 0.5 * t * t;
    case LossFamily::Huber: {
      const double a = spec.alpha;
      const double at = std::abs(t);
      return at <= a ? 0.5 * t * t : a * (at - 0.5 * a);
    }
    case LossFamily::Welsch: {
      const double a = spec.alpha;
      if (a == 0.0) return 0.5 * t * t;
      // -expm1 keeps the alpha -> 0 limit accurate.
      return -std::expm1(-0.5 * a * t * t) / a;
    }
  }
  throw ConfigError("loss: unknown family");
}

/// Score function psi = rho'. Odd; bounded for Huber and Welsch.
inline double psi(const LossSpec& spec, double t) {
  spec.validate();
  switch (spec.family) {
    case LossFamily::Squared:
      return t;
    case LossFamily::Huber: {
      const double a = spec.alpha;
      if (t > a) return a;
      if (t < -a) return -a;
      return t;
    }
    case LossFamily::Welsch: {
      const double a = spec.alpha;
      if (a == 0.0) return t;
      return t * std::exp(-0.5 * a * t * t);
    }
  }
  throw ConfigError("loss: unknown family");
}

/// psi'. At the Huber corner |t| = alpha the quadratic-branch value 1 is used.
inline double psi_prime(const LossSpec& spec, double t) {
  spec.validate();
  switch (spec.family) {
    case LossFamily::Squared:
      return 1.0;
    case LossFamily::Huber:
      return std::abs(t) <= spec.alpha ? 1.0 : 0.0;
    case LossFamily::Welsch: {
      const double a = spec.alpha;
      if (a == 0.0) return 1.0;
      const double at2 = a * t * t;
      return std::exp(-0.5 * at2) * (1.0 - at2);
    }
  }
  throw ConfigError("loss: unknown family");
}

/// psi''. Huber returns 0 everywhere (defined a.e.); Welsch is
/// alpha t (alpha t^2 - 3) exp(-alpha t^2 / 2).
inline double psi_double_prime(const LossSpec& spec, double t) {
  spec.validate();
  switch (spec.family) {
    case LossFamily::Squared:
      return 0.0;
    case LossFamily::Huber:
      return 0.0;
    case LossFamily::Welsch: {
      const double a = spec.alpha;
      if (a == 0.0) return 0.0;
      const double at2 = a * t * t;
      return std::exp(-0.5 * at2) * a * t * (at2 - 3.0);
    }
  }
  throw ConfigError("loss: unknown family");
}

/// Bound constants consumed by the theory formulas.
///
/// For Welsch, l_psi is the conventional sqrt(e/alpha); the attained bound
/// 1/sqrt(alpha e) is available from tight_psi_bound().
inline LossBounds bounds(const LossSpec& spec) {
  spec.validate();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  switch (spec.family) {
    case LossFamily::Squared:
      return {kInf, 1.0, 0.0};
    case LossFamily::Huber:
      return {spec.alpha, 1.0, 0.0};
    case LossFamily::Welsch: {
      const double a = spec.alpha;
      if (a == 0.0) return {kInf, 1.0, 0.0};
      return {std::sqrt(std::exp(1.0) / a), 1.0, 1.5 * std::sqrt(a)};
    }
  }
  throw ConfigError("loss: unknown family");
}

/// Supremum of |psi| actually attained (Welsch: at t = 1/sqrt(alpha)).
inline double tight_psi_bound(const LossSpec& spec) {
  spec.validate();
  if (spec.family == LossFamily::Welsch && spec.alpha > 0.0) {
    return 1.0 / std::sqrt(spec.alpha * std::exp(1.0));
  }
  return bounds(spec).l_psi;
}

inline std::string family_name(LossFamily family) {
  switch (family) {
    case LossFamily::Squared: return "squared";
    case LossFamily::Huber: return "huber";
    case LossFamily::Welsch: return "welsch";
  }
  return "unknown";
}

inline LossFamily parse_family(const std::string& name) {
  if (name == "squared") return LossFamily::Squared;
  if (name == "huber") return LossFamily::Huber;
  if (name == "welsch") return LossFamily::Welsch;
  throw ConfigError("loss: unknown family '" + name + "'");
}

}  // namespace mest
