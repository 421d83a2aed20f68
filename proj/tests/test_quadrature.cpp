#include <cmath>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "doctest.h"
#include "ksblow/errors.hpp"
#include "ksblow/quadrature.hpp"

using namespace ksb;

TEST_CASE("kronrod panel is exact for low-degree polynomials") {
  for (int deg = 0; deg <= 20; ++deg) {
    auto f = [deg](double x) { return std::pow(x, deg); };
    QuadratureSpec spec;
    spec.max_subdivisions = 1;
    const auto r = integrate(f, 0.0, 1.0, spec);
    CHECK(r.value == doctest::Approx(1.0 / (deg + 1)).epsilon(1e-14));
  }
}

TEST_CASE("adaptive refinement handles endpoint singularities") {
  auto f = [](double x) { return std::log(x) / std::sqrt(x); };
  // int_0^1 ln x / sqrt x dx = -4
  CHECK(quad(f, 0.0, 1.0) == doctest::Approx(-4.0).epsilon(1e-10));
}

TEST_CASE("semi-infinite integrals agree with tanh-sinh oracle") {
  auto f = [](double x) { return std::exp(-x) * std::cos(x) / (1.0 + x * x); };
  boost::math::quadrature::exp_sinh<double> es;
  const double ref = es.integrate(f, 0.0, std::numeric_limits<double>::infinity());
  CHECK(quad_to_inf(f, 0.0) == doctest::Approx(ref).epsilon(1e-11));
}

TEST_CASE("breakpoints seed panels and preserve the integral") {
  auto f = [](double x) { return std::abs(x - 0.3); };
  CHECK(quad(f, std::vector<double>{0.0, 0.3, 1.0}) == doctest::Approx(0.045 + 0.245).epsilon(1e-14));
}

TEST_CASE("non-convergence is reported with the error estimate") {
  auto f = [](double x) { return std::sin(1.0 / x); };
  QuadratureSpec spec;
  spec.max_subdivisions = 5;
  const auto r = integrate(f, 1e-6, 1.0, spec);
  CHECK_FALSE(r.converged);
  CHECK_THROWS_AS(quad(f, 1e-6, 1.0, spec), QuadratureError);
}

TEST_CASE("spec validation") {
  QuadratureSpec bad;
  bad.abs_tol = 0.0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
  bad = QuadratureSpec{};
  bad.max_subdivisions = 0;
  CHECK_THROWS_AS(bad.validate(), DomainError);
}
