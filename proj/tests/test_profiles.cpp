#include <cmath>
#include <memory>

#include "doctest.h"
#include "ksblow/errors.hpp"
#include "ksblow/profiles.hpp"
#include "ksblow/quadrature.hpp"
#include "ksblow/radial.hpp"

using namespace ksb;

TEST_CASE("bubble values and mass") {
  CHECK(bubble_U(0.0) == 8.0);
  CHECK(bubble_U(1.0) == 2.0);
  const double m = 2.0 * kPi * quad_to_inf([](double r) { return bubble_U(r) * r; }, 0.0);
  CHECK(m == doctest::Approx(8.0 * kPi).epsilon(1e-12));
}

TEST_CASE("gamma0 is the log of the bubble") {
  CHECK(gamma0(0.0) == doctest::Approx(std::log(8.0)).epsilon(1e-15));
  CHECK(gamma0(1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  for (double r : {0.1, 0.7, 3.0, 40.0}) CHECK(gamma0(r) == doctest::Approx(std::log(bubble_U(r))).epsilon(1e-13));
}

// Second-order FD residual of U'' + U'/r - U' G' + U^2 on grid spacing h.
static double steady_residual(double h) {
  double worst = 0.0;
  for (double r = 0.25; r <= 4.0; r += 0.25) {
    auto d1 = [h, r](double (*f)(double)) { return (f(r + h) - f(r - h)) / (2 * h); };
    auto d2 = [h, r](double (*f)(double)) { return (f(r + h) - 2 * f(r) + f(r - h)) / (h * h); };
    const double res = d2(bubble_U) + d1(bubble_U) / r - d1(bubble_U) * d1(gamma0) + bubble_U(r) * bubble_U(r);
    worst = std::max(worst, std::abs(res));
  }
  return worst;
}

TEST_CASE("steady-state residual converges at second order") {
  const double e1 = steady_residual(1e-2), e2 = steady_residual(5e-3);
  CHECK(e1 < 1e-2);
  CHECK(std::log2(e1 / e2) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("Z0 closed form equals 2U + rho U'") {
  CHECK(Z0(0.0) == 16.0);
  CHECK(Z0(1.0) == 0.0);
  for (int k = 0; k < 6; ++k) {
    const double h = 0.5 / (1 << k);
    for (double r = 0.0; r < 20.0; r += h)
      CHECK(std::abs(Z0(r) - (2 * bubble_U(r) + r * bubble_U_prime(r))) <= 1e-12);
  }
  QuadratureSpec spec;
  spec.abs_tol = 1e-13;
  const double m = quad_to_inf([](double r) { return Z0(r) * r; }, 0.0, spec);
  CHECK(std::abs(m) < 1e-12);
}

TEST_CASE("kernel functions solve the linearized Liouville equation") {
  CHECK(z0_kernel(0.0) == 2.0);
  CHECK(z0_kernel(1.0) == 0.0);
  CHECK(std::abs(z0_kernel(1e6) + 2.0) < 1e-5);
  for (double r : {0.05, 0.5, 0.99, 1.3, 5.0, 60.0}) {
    const double h = 1e-4 * r;
    for (auto* z : {&z0_kernel, &zbar0_kernel}) {
      const double lap = ((*z)(r + h) - 2 * (*z)(r) + (*z)(r - h)) / (h * h) + ((*z)(r + h) - (*z)(r - h)) / (2 * h * r);
      CHECK(std::abs(lap + bubble_U(r) * (*z)(r)) < 1e-5 * (1.0 + std::abs((*z)(r))));
    }
    const double dz = (z0_kernel(r + h) - z0_kernel(r - h)) / (2 * h);
    CHECK(r * (z0_kernel(r) * zbar0_kernel_prime(r) - dz * zbar0_kernel(r)) == doctest::Approx(-1.0).epsilon(1e-7));
    const double dzb = (zbar0_kernel(r + h) - zbar0_kernel(r - h)) / (2 * h);
    CHECK(zbar0_kernel_prime(r) == doctest::Approx(dzb).epsilon(1e-7));
  }
}

TEST_CASE("second kernel element agrees with reduction of order") {
  // zbar0 = z0 * v, v' = -1/(r z0^2); integrate away from the zero of z0.
  const double r0 = 0.2, r1 = 0.8;
  const double v0 = zbar0_kernel(r0) / z0_kernel(r0);
  const double dv = quad([](double r) { return -1.0 / (r * z0_kernel(r) * z0_kernel(r)); }, r0, r1);
  CHECK(z0_kernel(r1) * (v0 + dv) == doctest::Approx(zbar0_kernel(r1)).epsilon(1e-12));
  const double r2 = 1.5, r3 = 30.0;
  const double w0 = zbar0_kernel(r2) / z0_kernel(r2);
  const double dw = quad([](double r) { return -1.0 / (r * z0_kernel(r) * z0_kernel(r)); }, r2, r3);
  CHECK(z0_kernel(r3) * (w0 + dw) == doctest::Approx(zbar0_kernel(r3)).epsilon(1e-12));
}

TEST_CASE("rate constants") {
  const auto rc = RateConstants::standard();
  CHECK(std::abs(rc.identity_defect()) <= 1e-14);
  CHECK(rc.c_star == doctest::Approx(0.30394111293762677).epsilon(1e-14));
  CHECK(rc.kappa == doctest::Approx(0.19092130378164224).epsilon(1e-14));
  CHECK(rc.a == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
}

TEST_CASE("asymptotic scale and rate") {
  CHECK(lambda_star(0.0, 1e-4) == doctest::Approx(6.4478291470515751e-4).epsilon(1e-13));
  CHECK(lambda_star(0.0, 1e-8) == doctest::Approx(2.6507835494381848e-6).epsilon(1e-13));
  CHECK(p_star(0.0, 1e-6) == doctest::Approx(-7.9228430936262861e-4).epsilon(1e-13));
  for (double tau : {0.9, 1e-2, 1e-5, 1e-12}) CHECK(p_star_tau(tau) < 0.0);
  CHECK_THROWS_AS(lambda_star(0.0, 1.0), DomainError);
  CHECK_THROWS_AS(p_star(1.0, 0.5), DomainError);
}

TEST_CASE("integrated rate approaches the squared scale as tau shrinks") {
  // -2 int_0^tau p_star = 2 c (u+1) tau e^{-u} to leading order vs lambda_star^2 = c tau e^{-u}.
  double prev = 1e9;
  for (double tau : {1e-4, 1e-8, 1e-16}) {
    const double u0 = std::sqrt(-2.0 * std::log(tau));
    // substitute sigma = tau e^{-x}
    auto f = [tau](double x) {
      const double s = tau * std::exp(-x);
      return s > 0.0 ? s * p_star_tau(s) : 0.0;
    };
    const double l2 = -2.0 * quad_to_inf(f, 0.0);
    const double ratio = l2 / std::pow(lambda_star_tau(tau), 2);
    const double gap = std::abs(ratio - 1.0);
    CHECK(gap < 1.2 / u0);
    CHECK(gap < prev);
    prev = gap;
  }
}

TEST_CASE("quintic cutoff") {
  const auto c = Cutoff::quintic();
  CHECK(c(1.0) == 1.0);
  CHECK(c(2.0) == 0.0);
  CHECK(c(0.3) == 1.0);
  CHECK(c(7.0) == 0.0);
  for (double s = 0.0; s < 3.0; s += 0.01) {
    CHECK(c(s) >= 0.0);
    CHECK(c(s) <= 1.0);
    if (s < 1.0 || s > 2.0) {
      CHECK(c.d1(s) == 0.0);
      CHECK(c.d2(s) == 0.0);
    }
  }
  const double h = 1e-6;
  for (double s : {1.1, 1.5, 1.93}) {
    CHECK(c.d1(s) == doctest::Approx((c(s + h) - c(s - h)) / (2 * h)).epsilon(1e-7));
    CHECK(c.d2(s) == doctest::Approx((c.d1(s + h) - c.d1(s - h)) / (2 * h)).epsilon(1e-6));
  }
  CHECK(eta_cutoff(-0.5) == 0.0);
  CHECK(eta_cutoff(0.0) == 1.0);
  CHECK(eta_cutoff(-0.25) == doctest::Approx(0.5));
}

TEST_CASE("radial grid weights") {
  for (std::size_t n : {5u, 6u, 101u, 1000u}) {
    const auto g = RadialGrid::geometric(n, 40.0, 1e-3);
    double sw = 0.0, sa = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      sw += g.weights()[i];
      sa += g.cell_areas()[i];
    }
    CHECK(sw == doctest::Approx(kPi * 1600.0).epsilon(1e-12));
    CHECK(sa == doctest::Approx(kPi * 1600.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(RadialGrid({0.0, 1.0, 1.0}), DomainError);
  CHECK_THROWS_AS(RadialGrid({0.0, 1.0}), DomainError);
  const auto g = RadialGrid::geometric(400, 50.0, 2e-3);
  CHECK(g.r(1) == doctest::Approx(2e-3).epsilon(1e-9));
  CHECK(g.outer() == 50.0);
}

TEST_CASE("grid quadrature converges at high order") {
  auto err = [](std::size_t n) {
    auto g = std::make_shared<const RadialGrid>(RadialGrid::stretched(n, 30.0, 6.0));
    const auto f = RadialField::sample(g, bubble_U);
    const double exact = 8.0 * kPi * 900.0 / 901.0;
    return std::abs(integrate_2d(f) - exact);
  };
  const double e1 = err(201), e2 = err(401);
  CHECK(e1 < 1e-5);
  CHECK(std::log2(e1 / e2) > 3.5);
}

TEST_CASE("power tail extrapolation") {
  auto g = std::make_shared<const RadialGrid>(RadialGrid::stretched(801, 100.0, 8.0));
  const auto f = RadialField::sample(g, [](double r) { return 1.0 / std::pow(1.0 + r * r, 2); });
  const double exact = kPi;  // 2 pi int_0^inf r/(1+r^2)^2
  CHECK(integrate_2d(f) + tail_2d(*g, f.values, 4.0) == doctest::Approx(exact).epsilon(1e-8));
}
