#include <cmath>

#include <boost/math/special_functions/expint.hpp>

#include "doctest.h"
#include "ksblow/errors.hpp"
#include "ksblow/quadrature.hpp"
#include "ksblow/specialfn.hpp"

using namespace ksb;

TEST_CASE("Ei against frozen high-precision values") {
  CHECK(expint_Ei(-1.0) == doctest::Approx(-0.21938393439552027).epsilon(1e-13));
  CHECK(expint_Ei(-0.01) == doctest::Approx(-4.0379295765381138).epsilon(1e-13));
  CHECK(expint_Ei(-7.5) == doctest::Approx(-6.5830893267080231e-5).epsilon(1e-12));
  CHECK(expint_Ei(-30.0) == doctest::Approx(-3.0215520106888125e-15).epsilon(1e-12));
  CHECK_THROWS_AS(expint_Ei(0.0), DomainError);
  CHECK_THROWS_AS(expint_Ei(0.5), DomainError);
}

TEST_CASE("Ei agrees with boost across the series/fraction split") {
  for (double x = -0.001; x > -60.0; x *= 1.37)
    CHECK(expint_Ei(x) == doctest::Approx(boost::math::expint(x)).epsilon(1e-12));
  CHECK(expint_Ei(-5.0) == doctest::Approx(boost::math::expint(-5.0)).epsilon(1e-12));
  CHECK(expint_Ei(-5.0000001) == doctest::Approx(boost::math::expint(-5.0000001)).epsilon(1e-12));
}

TEST_CASE("Ei small-argument expansion and monotonicity") {
  CHECK(std::abs(expint_Ei(-0.01) - (kEulerGamma + std::log(0.01))) <= 0.011);
  double prev = expint_Ei(-40.0);
  for (double x = -39.5; x < 0.0; x += 0.5) {
    const double v = expint_Ei(x);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("Ei derivative is e^x / x") {
  for (double x : {-0.1, -1.0, -3.0}) {
    const double h = 1e-5 * std::abs(x);
    const double fd = (expint_Ei(x + h) - expint_Ei(x - h)) / (2 * h);
    CHECK(fd == doctest::Approx(std::exp(x) / x).epsilon(1e-6));
  }
}

TEST_CASE("Gaussian-weighted Z0 integral") {
  const double q = gaussian_Z0_integral(10.0);
  CHECK(q == doctest::Approx(8.8877637913033163e-4).epsilon(1e-10));
  CHECK(gaussian_Z0_closed(10.0) == doctest::Approx(8.8334946411481959e-4).epsilon(1e-12));
  CHECK(q == doctest::Approx(gaussian_Z0_closed(10.0)).epsilon(0.01));
  CHECK(std::abs(gaussian_Z0_integral(100.0) - gaussian_Z0_closed(100.0)) <= 10.0 * std::log(100.0) / 1e12);
  CHECK_THROWS_AS(gaussian_Z0_integral(1.0), DomainError);
  // Leading behaviour for large a.
  const double a = 300.0;
  const double lead = -2.0 / std::pow(a, 4) * (kEulerGamma + std::log(1.0 / (4 * a * a)) + 1.0);
  CHECK(gaussian_Z0_integral(a) == doctest::Approx(lead).epsilon(1e-4));
  CHECK(gaussian_Z0_integral(a) > 0.0);
}

TEST_CASE("cubic moment primitive") {
  CHECK(cubic_moment_Z0(0.0) == 0.0);
  CHECK(cubic_moment_Z0(1.0) == doctest::Approx(0.45482255552043752).epsilon(1e-14));
  const double direct = quad([](double z) { return z * z * z * Z0(z); }, 0.0, 5.0);
  CHECK(std::abs(cubic_moment_Z0(5.0) - direct) <= 1e-10);
  CHECK_THROWS_AS(cubic_moment_Z0(-1.0), DomainError);
}

TEST_CASE("six-dimensional heat factor") {
  CHECK(std::abs(heat6_factor(0.0) - 1.0 / 32.0) <= 1e-15);
  CHECK(std::abs(heat6_factor(1e-8) - 1.0 / 32.0) <= 1e-15);
  CHECK(heat6_factor(2.0) == doctest::Approx(0.01651506985356971).epsilon(1e-14));
  CHECK(heat6_factor(0.5) == doctest::Approx(0.029977932170911636).epsilon(1e-14));
  // continuity across the series branch
  CHECK(heat6_factor(1.0 - 1e-12) == doctest::Approx(heat6_factor(1.0 + 1e-12)).epsilon(1e-11));
  CHECK(heat6_factor(1e3) * 1e12 == doctest::Approx(1.0).epsilon(1e-12));
  double prev = heat6_factor(0.0);
  for (double w = 0.01; w < 30.0; w += 0.01) {
    const double v = heat6_factor(w);
    CHECK(v > 0.0);
    CHECK(v <= 1.0 / 32.0);
    CHECK(v < prev);
    prev = v;
  }
}

TEST_CASE("beta constant") {
  const double b = beta_const(Cutoff::quintic());
  CHECK(b == doctest::Approx(0.2335074992098443).epsilon(1e-12));
  CHECK(b > 0.125);
  CHECK(b < 0.625);
  QuadratureSpec tight;
  tight.abs_tol = 1e-16;
  tight.rel_tol = 1e-14;
  CHECK(std::abs(beta_const(Cutoff::quintic(), tight) - b) <= 1e-10);
  CHECK(beta_const(Cutoff::sharp()) == 0.5);
}
