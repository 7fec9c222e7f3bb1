#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "mest/loss.hpp"
#include "mest/rng.hpp"

using namespace mest;

namespace {

// central difference; the hybrid (1 + |analytic|) scale keeps the check
// meaningful where the analytic value underflows
template <class F>
double central_diff(const F& f, double t, double h = 1e-5) {
  return (f(t + h) - f(t - h)) / (2.0 * h);
}

double hybrid_err(double analytic, double approx) {
  return std::abs(analytic - approx) / (1.0 + std::abs(analytic));
}

}  // namespace

TEST_CASE("rho matches hand values") {
  CHECK(rho(LossSpec::welsch(0.1), 0.0) == 0.0);
  CHECK(rho(LossSpec::huber(1.0), 2.0) == Catch::Approx(1.5).epsilon(1e-15));
  CHECK(rho(LossSpec::huber(1.0), 0.5) == Catch::Approx(0.125).epsilon(1e-15));
  // alpha -> 0 limit approaches the squared loss
  CHECK(std::abs(rho(LossSpec::welsch(1e-8), 3.0) - 4.5) < 1e-6);
  CHECK(rho(LossSpec::squared(), -3.0) == Catch::Approx(4.5));
}

TEST_CASE("psi matches hand values") {
  CHECK(psi(LossSpec::squared(), 0.0) == 0.0);
  CHECK(psi(LossSpec::huber(1.0), 0.0) == 0.0);
  CHECK(psi(LossSpec::welsch(0.7), 0.0) == 0.0);
  CHECK(psi(LossSpec::huber(1.0), 2.0) == 1.0);
  CHECK(psi(LossSpec::welsch(0.5), 1.0) == Catch::Approx(std::exp(-0.25)).epsilon(1e-15));
}

TEST_CASE("psi_prime matches hand values") {
  CHECK(psi_prime(LossSpec::welsch(2.0), 0.0) == 1.0);
  CHECK(psi_prime(LossSpec::huber(1.0), 0.5) == 1.0);
  CHECK(psi_prime(LossSpec::huber(1.0), 1.0) == 1.0);  // corner convention
  CHECK(psi_prime(LossSpec::huber(1.0), 1.0 + 1e-12) == 0.0);
  CHECK(psi_prime(LossSpec::welsch(1.0), 1.0) == Catch::Approx(0.0).margin(1e-18));
}

TEST_CASE("psi_double_prime matches hand values") {
  // Third derivative of rho: alpha t (alpha t^2 - 3) exp(-alpha t^2/2).
  CHECK(psi_double_prime(LossSpec::welsch(1.0), 0.0) == 0.0);
  CHECK(psi_double_prime(LossSpec::welsch(1.0), std::sqrt(3.0)) ==
        Catch::Approx(0.0).margin(1e-15));
  CHECK(psi_double_prime(LossSpec::huber(2.0), 5.0) == 0.0);
  const double t = 0.5, a = 2.0;
  CHECK(psi_double_prime(LossSpec::welsch(a), t) ==
        Catch::Approx(a * t * (a * t * t - 3.0) * std::exp(-0.5 * a * t * t)).epsilon(1e-14));
}

TEST_CASE("bounds carry the documented constants") {
  const auto welsch = bounds(LossSpec::welsch(1.0));
  CHECK(welsch.l_psi == Catch::Approx(std::sqrt(std::exp(1.0))).epsilon(1e-15));
  CHECK(welsch.l_psi1 == 1.0);
  CHECK(bounds(LossSpec::welsch(4.0)).l_psi2 == Catch::Approx(3.0).epsilon(1e-15));
  const auto huber = bounds(LossSpec::huber(1.0));
  CHECK(huber.l_psi == 1.0);
  CHECK(huber.l_psi1 == 1.0);
  CHECK(huber.l_psi2 == 0.0);
  CHECK(std::isinf(bounds(LossSpec::squared()).l_psi));
  CHECK(tight_psi_bound(LossSpec::welsch(1.0)) ==
        Catch::Approx(1.0 / std::sqrt(std::exp(1.0))).epsilon(1e-15));
}

TEST_CASE("invalid specs are rejected") {
  CHECK_THROWS_AS(rho(LossSpec::huber(0.0), 1.0), ConfigError);
  CHECK_THROWS_AS(rho(LossSpec::huber(-1.0), 1.0), ConfigError);
  CHECK_THROWS_AS(psi(LossSpec{LossFamily::Welsch, -0.5}, 1.0), ConfigError);
}

TEST_CASE("psi is exactly odd") {
  RngStream rng(2024, 99, 0);
  for (int k = 0; k < 1000; ++k) {
    const double t = rng.uniform(-50.0, 50.0);
    const double alpha = rng.uniform(0.01, 5.0);
    for (const auto& spec :
         {LossSpec::squared(), LossSpec::huber(alpha), LossSpec::welsch(alpha)}) {
      CHECK(psi(spec, -t) == -psi(spec, t));
    }
  }
}

TEST_CASE("derivative stack is consistent with finite differences") {
  RngStream rng(7, 99, 1);
  for (int k = 0; k < 1000; ++k) {
    const double alpha = rng.uniform(0.05, 3.0);
    double t = rng.uniform(-10.0, 10.0);
    for (const auto& spec :
         {LossSpec::squared(), LossSpec::huber(alpha), LossSpec::welsch(alpha)}) {
      if (spec.family == LossFamily::Huber &&
          std::abs(std::abs(t) - spec.alpha) < 1e-3) {
        t += 2e-3;  // stay away from the corner
      }
      const double d_rho = central_diff([&](double u) { return rho(spec, u); }, t);
      CHECK(hybrid_err(psi(spec, t), d_rho) < 1e-6);
      const double d_psi = central_diff([&](double u) { return psi(spec, u); }, t);
      CHECK(hybrid_err(psi_prime(spec, t), d_psi) < 1e-6);
      if (spec.family == LossFamily::Welsch) {
        const double d_psi1 = central_diff([&](double u) { return psi_prime(spec, u); }, t);
        CHECK(hybrid_err(psi_double_prime(spec, t), d_psi1) < 1e-6);
      }
    }
  }
}

TEST_CASE("bounds dominate the derivatives everywhere") {
  RngStream rng(11, 99, 2);
  const double alphas[] = {0.05, 0.3, 1.0, 4.0};
  for (double alpha : alphas) {
    const LossSpec specs[] = {LossSpec::huber(alpha), LossSpec::welsch(alpha)};
    for (const auto& spec : specs) {
      const auto b = bounds(spec);
      const double tight = tight_psi_bound(spec);
      for (int k = 0; k < 25000; ++k) {
        const double t = rng.uniform(-100.0, 100.0);
        CHECK(std::abs(psi(spec, t)) <= b.l_psi);
        CHECK(std::abs(psi(spec, t)) <= tight * (1.0 + 1e-15));
        CHECK(std::abs(psi_prime(spec, t)) <= b.l_psi1);
        CHECK(std::abs(psi_double_prime(spec, t)) <= b.l_psi2);
      }
    }
  }
}

TEST_CASE("squared-loss limits") {
  double worst = 0.0;
  for (int k = -500; k <= 500; ++k) {
    const double t = k / 100.0;
    worst = std::max(worst, std::abs(rho(LossSpec::welsch(1e-8), t) - 0.5 * t * t));
    // Huber with huge alpha is exactly quadratic on [-5, 5]
    CHECK(rho(LossSpec::huber(1e6), t) == 0.5 * t * t);
  }
  CHECK(worst <= 1e-6);
}
