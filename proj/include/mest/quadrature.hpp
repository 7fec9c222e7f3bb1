#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "mest/errors.hpp"

namespace mest {

namespace detail {

// QUADPACK dqk15 abscissae and weights.
constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.0};
constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <class Func>
void kronrod15(const Func& f, double a, double b, double& result, double& err_estimate) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double gauss = kGaussWeights[3] * fc;
  double kronrod = kKronrodWeights[7] * fc;
  for (int i = 0; i < 7; ++i) {
    const double dx = half * kKronrodNodes[static_cast<std::size_t>(i)];
    const double fsum = f(center - dx) + f(center + dx);
    kronrod += kKronrodWeights[static_cast<std::size_t>(i)] * fsum;
    if (i % 2 == 1) gauss += kGaussWeights[static_cast<std::size_t>(i / 2)] * fsum;
  }
  result = kronrod * half;
  err_estimate = std::abs((kronrod - gauss) * half);
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (G7/K15) integration of f over [a, b] to an
/// absolute tolerance. Intervals split until their error share is met, a
/// depth cap is hit (integrable discontinuities then contribute ~2^-48
/// mass), or the interval budget runs out (tolerances below the integrand's
/// rounding noise cannot be met by refinement).
template <class Func>
double integrate_adaptive(const Func& f, double a, double b, double abs_tol) {
  if (!(abs_tol > 0.0)) throw ConfigError("integrate_adaptive: tolerance must be positive");
  if (a == b) return 0.0;

  struct Interval {
    double a, b;
    int depth;
  };
  constexpr int kMaxIntervals = 100000;
  const double total_len = std::abs(b - a);
  std::vector<Interval> work{{a, b, 0}};
  double sum = 0.0;
  int processed = 0;
  while (!work.empty()) {
    const Interval iv = work.back();
    work.pop_back();
    double value = 0.0, err = 0.0;
    detail::kronrod15(f, iv.a, iv.b, value, err);
    ++processed;
    const double budget = abs_tol * (std::abs(iv.b - iv.a) / total_len);
    if (err <= budget || iv.depth >= 48 || processed >= kMaxIntervals) {
      sum += value;
      continue;
    }
    const double mid = 0.5 * (iv.a + iv.b);
    work.push_back({iv.a, mid, iv.depth + 1});
    work.push_back({mid, iv.b, iv.depth + 1});
  }
  return sum;
}

}  // namespace mest
