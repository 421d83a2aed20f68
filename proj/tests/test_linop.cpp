#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "ksblow/errors.hpp"
#include "ksblow/linop.hpp"
#include "ksblow/profiles.hpp"

using namespace ksb;

namespace {

GridPtr family(std::size_t n) { return std::make_shared<const RadialGrid>(RadialGrid::stretched(n, 1e3, 9.0)); }

double bump(double r) { return r < 3.0 ? std::pow(1.0 - r * r / 9.0, 6) : 0.0; }

// Compactly supported field b(r)(1 - c r^2) with zero discrete mass.
RadialField zero_mass_bump(const GridPtr& g) {
  const auto b = RadialField::sample(g, bump);
  const auto b2 = RadialField::sample(g, [](double r) { return bump(r) * r * r; });
  const double c = integrate_2d(b) / integrate_2d(b2);
  return RadialField::sample(g, [c](double r) { return bump(r) * (1.0 - c * r * r); });
}

double sup_diff(const RadialField& a, const RadialField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace

TEST_CASE("potential gradient of the bubble") {
  const auto g = family(2048);
  const auto d = inv_laplacian_gradient(RadialField::sample(g, bubble_U));
  double err = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) {
    const double r = g->r(i);
    err = std::max(err, std::abs(d[i] + 4.0 * r / (1.0 + r * r)));
  }
  CHECK(err < 1e-8);
  CHECK(d[0] == 0.0);
  CHECK(inv_laplacian_gradient(RadialField::sample(g, [](double) { return 0.0; })).sup() == 0.0);
}

TEST_CASE("potential gradient far field follows Gauss law") {
  const auto g = family(1024);
  const auto phi = RadialField::sample(g, [](double r) { return std::exp(-r * r); });
  const auto d = inv_laplacian_gradient(phi);
  const double M = kPi;
  std::size_t i = 0;
  while (g->r(i) < 100.0) ++i;
  CHECK(d[i] == doctest::Approx(-M / (2.0 * kPi * g->r(i))).epsilon(1e-3));
}

TEST_CASE("L annihilates Z0 at second order") {
  const double e1 = apply_L(RadialField::sample(family(256), Z0)).sup();
  const double e2 = apply_L(RadialField::sample(family(1024), Z0)).sup();
  const double e3 = apply_L(RadialField::sample(family(4096), Z0)).sup();
  CHECK(std::log(e1 / e2) / std::log(4.0) >= 1.8);
  CHECK(std::log(e2 / e3) / std::log(4.0) >= 1.8);
}

TEST_CASE("L is conservative and rejects coarse grids") {
  const auto g = family(512);
  const auto h = apply_L(zero_mass_bump(g));
  double m = 0.0, s = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) {
    m += g->cell_areas()[i] * h[i];
    s += g->cell_areas()[i] * std::abs(h[i]);
  }
  CHECK(std::abs(m) <= 1e-13 * s);
  CHECK(std::abs(integrate_2d(h)) <= 1e-4 * s);
  CHECK(apply_L(RadialField::sample(g, [](double) { return 0.0; })).sup() == 0.0);
  auto coarse = std::make_shared<const RadialGrid>(RadialGrid::uniform(10, 5.0));
  CHECK_THROWS_AS(apply_L(RadialField::sample(coarse, Z0)), DomainError);
}

TEST_CASE("decomposition of the kernel element") {
  const auto g = family(4096);
  const auto d = decompose(RadialField::sample(g, Z0));
  CHECK(d.a == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(d.phi_perp.sup() <= 1e-8);
  const auto z = decompose(RadialField::sample(g, [](double) { return 0.0; }));
  CHECK(z.a == 0.0);
  CHECK(z.phi_perp.sup() == 0.0);
}

TEST_CASE("decomposition invariants and linearity") {
  const auto g = family(2048);
  const auto p1 = zero_mass_bump(g);
  const auto p2 = RadialField::sample(g, [](double r) { return std::exp(-r * r) - 0.25 * std::exp(-r * r / 4.0); });
  const auto d1 = decompose(p1), d2 = decompose(p2);
  std::vector<double> mix(g->size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = 2.5 * p1[i] - 0.7 * p2[i];
  const auto dm = decompose(RadialField(g, mix));
  CHECK(std::abs(dm.a - (2.5 * d1.a - 0.7 * d2.a)) <= 1e-10);

  // reassembly and orthogonality
  for (const auto* d : {&d1, &d2}) {
    const auto& src = d == &d1 ? p1 : p2;
    double worst = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i)
      worst = std::max(worst, std::abs(d->phi_perp[i] + 0.5 * d->a * Z0(g->r(i)) - src[i]));
    CHECK(worst <= 1e-10);
    std::vector<double> ug(g->size());
    for (std::size_t i = 0; i < ug.size(); ++i) ug[i] = bubble_U(g->r(i)) * d->g_perp[i];
    // g_perp tends to a constant; int_R^inf U 2 pi r dr = 8 pi / (1 + R^2)
    const double R = g->r(g->size() - 1);
    const double tail = d->g_perp[g->size() - 1] * 8.0 * kPi / (1.0 + R * R);
    CHECK(std::abs(integrate_2d(*g, ug) + tail) <= 1e-7);
  }
  // the orthogonal part carries no kernel component
  CHECK(std::abs(decompose(d1.phi_perp).a) <= 1e-9);
  CHECK_THROWS_AS(decompose(RadialField::sample(g, bubble_U)), DomainError);
}

TEST_CASE("quadratic form is positive on a zero-mass battery") {
  const auto g = family(2048);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> U01(0.3, 3.0), C(-1.0, 1.0);
  double lo = 1e300, hi = 0.0;
  for (int k = 0; k < 10; ++k) {
    const double s1 = U01(rng), s2 = U01(rng), s3 = U01(rng), c1 = C(rng), c2 = C(rng);
    auto raw = RadialField::sample(g, [&](double r) {
      return std::exp(-r * r / (s1 * s1)) + c1 * std::exp(-r * r / (s2 * s2)) + c2 * r * r * std::exp(-r * r / (s3 * s3));
    });
    const double m = integrate_2d(raw);
    const auto comp = RadialField::sample(g, [](double r) { return std::exp(-r * r); });
    const double mc = integrate_2d(comp);
    for (std::size_t i = 0; i < raw.size(); ++i) raw[i] -= m / mc * comp[i];
    const auto d = decompose(raw);
    std::vector<double> pg(g->size()), ug2(g->size());
    for (std::size_t i = 0; i < pg.size(); ++i) {
      pg[i] = raw[i] * d.g_perp[i];
      ug2[i] = bubble_U(g->r(i)) * d.g_perp[i] * d.g_perp[i];
    }
    const double q = integrate_2d(*g, pg), n2 = integrate_2d(*g, ug2);
    CHECK(q > 0.0);
    lo = std::min(lo, q / n2);
    hi = std::max(hi, q / n2);
  }
  CHECK(lo > 0.0);
  CHECK(hi < 10.0);
  MESSAGE("quadratic form ratio range [" << lo << ", " << hi << "]");
}

TEST_CASE("solve_L round trip on zero-mass zero-moment data") {
  const auto g = family(4096);
  const auto phi = zero_mass_bump(g);
  const auto h = apply_L(phi);
  const auto back = solve_L(h, true, 1e-4);
  CHECK(sup_diff(apply_L(back), h) <= 1e-4);
  // recovers the input up to its kernel component
  const auto d = decompose(phi);
  double worst = 0.0;
  for (std::size_t i = 0; i < g->size(); ++i) worst = std::max(worst, std::abs(back[i] - (phi[i] - 0.5 * d.a * Z0(g->r(i)))));
  CHECK(worst <= 1e-5);
  CHECK(std::abs(decompose(back).a) <= 1e-7);
  CHECK(std::abs(total_mass(back)) <= 1e-6);
}

TEST_CASE("solve_L of zero is zero") {
  const auto g = family(256);
  CHECK(solve_L(RadialField::sample(g, [](double) { return 0.0; }), true).sup() == 0.0);
}

TEST_CASE("solve_L output mass is proportional to the second moment") {
  const auto g = family(2048);
  double first = 0.0;
  for (double s : {1.5, 2.0, 3.0}) {
    const auto h = RadialField::sample(g, [s](double r) { return std::exp(-r * r) - std::exp(-r * r / (s * s)) / (s * s); });
    const double m2 = kPi * (1.0 - s * s);
    const double ratio = total_mass(solve_L(h, false)) / m2;
    if (first == 0.0) first = ratio;
    CHECK(ratio == doctest::Approx(first).epsilon(0.01));
    // linearized virial identity: m2(L[phi]) = -4 mass(phi)
    CHECK(ratio == doctest::Approx(-0.25).epsilon(1e-4));
  }
}

TEST_CASE("solve_L reports every violated precondition") {
  const auto g = family(256);
  const auto h = RadialField::sample(g, [](double r) { return std::exp(-r * r); });
  try {
    solve_L(h, true);
    FAIL("expected rejection");
  } catch (const DomainError& e) {
    const std::string w = e.what();
    CHECK(w.find("mass") != std::string::npos);
    CHECK(w.find("second moment") != std::string::npos);
  }
  auto bad = h;
  bad[3] = NAN;
  CHECK_THROWS_AS(solve_L(bad, false), DomainError);
}
