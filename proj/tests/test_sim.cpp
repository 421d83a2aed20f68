#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>

#include "doctest.h"
#include "ksblow/profiles.hpp"
#include "ksblow/sim.hpp"

using namespace ksb;

namespace {

constexpr double kTwoPi = 6.283185307179586;

double gk(const std::function<double(double)>& f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 20, 1e-14);
}

SimState bubble_state(const CellGridPtr& g, double mult) {
  return make_state(g, cell_averages(*g, [mult](double r) { return mult * bubble_U(r); }));
}

double order(double e_coarse, double e_fine) { return std::log2(e_coarse / e_fine); }

const SimRun& supercritical() {
  static const SimRun r = [] {
    SimConfig c;
    c.mass_multiplier = 2.0;
    return run(c);
  }();
  return r;
}

}  // namespace

TEST_CASE("cell grid geometry") {
  const auto g = CellGrid::geometric(512, 40.0, 1e-4);
  CHECK(g.faces()[1] == doctest::Approx(1e-4).epsilon(1e-9));
  CHECK(g.outer() == 40.0);
  double area = 0.0;
  for (double a : g.areas()) area += a;
  CHECK(area == doctest::Approx(kTwoPi / 2.0 * 1600.0).epsilon(1e-13));
  CHECK_THROWS_AS(CellGrid({0.0, 1.0, 0.5, 2.0}), DomainError);
}

TEST_CASE("config validation reports every violation") {
  SimConfig c;
  c.radius = 10.0;
  c.cells = 100;
  c.cfl = 0.9;
  const auto v = c.violations();
  CHECK(v.size() == 3);
  CHECK(v[0].find("radius = 10") != std::string::npos);
  CHECK(v[1].find("cells = 100") != std::string::npos);
  CHECK(v[2].find("cfl") != std::string::npos);
  CHECK_THROWS_AS(c.validate(), DomainError);
  CHECK(SimConfig{}.violations().empty());
}

TEST_CASE("initial bubble") {
  SimConfig c;
  c.mass_multiplier = 1.0;
  auto s = init_bubble(c);
  CHECK(s.M == doctest::Approx(8.0 * M_PI).epsilon(1e-12));
  {
    // the cutoff removes mass beyond R/4, restored by the rescale
    const Cutoff chi = Cutoff::quintic();
    auto prof = [&](double r) { return bubble_U(r) * chi(r / 10.0) * kTwoPi * r; };
    const double mass = gk(prof, 0.0, 10.0) + gk(prof, 10.0, 20.0);
    CHECK(s.u_peak == doctest::Approx(8.0 * 8.0 * M_PI / mass).epsilon(1e-6));
    CHECK(s.u_peak == doctest::Approx(8.0).epsilon(0.01));
  }
  c.mass_multiplier = 1.05;
  CHECK(init_bubble(c).M == doctest::Approx(1.05 * 8.0 * M_PI).epsilon(1e-14));

  // second moment against a direct quadrature of the cut-off profile
  double prev = 0.0;
  for (double R : {20.0, 40.0, 80.0}) {
    c.mass_multiplier = 1.0;
    c.radius = R;
    const auto st = init_bubble(c);
    const Cutoff chi = Cutoff::quintic();
    auto prof = [&](double r) { return bubble_U(r) * chi(r / (R / 4.0)) * kTwoPi * r; };
    const double mass = gk(prof, 0.0, R / 4.0) + gk(prof, R / 4.0, R / 2.0);
    auto mom = [&](double r) { return prof(r) * r * r; };
    const double m2 = (gk(mom, 0.0, R / 4.0) + gk(mom, R / 4.0, R / 2.0)) * 8.0 * M_PI / mass;
    // cell value times cell moment is second order in the cell width
    CHECK(st.m2 == doctest::Approx(m2).epsilon(1e-4));
    c.cells = 2048;
    const double fine = init_bubble(c).m2;
    c.cells = 1024;
    CHECK(std::abs(fine - m2) <= 0.3 * std::abs(st.m2 - m2));
    CHECK(st.m2 > prev);
    prev = st.m2;
  }
  c.radius = 19.0;
  CHECK_THROWS_AS(init_bubble(c), DomainError);
}

TEST_CASE("chemical gradient") {
  const auto g = std::make_shared<const CellGrid>(CellGrid::geometric(512, 40.0, 1e-3));
  const auto zero = chemical_gradient(*g, std::vector<double>(g->size(), 0.0));
  for (double x : zero) CHECK(x == 0.0);

  // center samples of U: error O(h^2) against -4r / (1 + r^2)
  std::vector<double> err;
  for (std::size_t n : {256, 512, 1024}) {
    const CellGrid gg = CellGrid::stretched(n, 40.0, 6.0);
    std::vector<double> u(n);
    for (std::size_t i = 0; i < n; ++i) u[i] = bubble_U(gg.centers()[i]);
    const auto vr = chemical_gradient(gg, u);
    double e = 0.0;
    for (std::size_t k = 0; k <= n; ++k) {
      const double f = gg.faces()[k];
      e = std::max(e, std::abs(vr[k] + 4.0 * f / (1.0 + f * f)));
    }
    err.push_back(e);
  }
  CHECK(order(err[0], err[1]) >= 1.8);
  CHECK(order(err[1], err[2]) >= 1.8);

  // Gauss law at the wall
  const SimState s = init_bubble(SimConfig{});
  const auto vr = chemical_gradient(*s.grid, s.u.values);
  CHECK(vr.front() == 0.0);
  CHECK(vr.back() == doctest::Approx(-s.M / (kTwoPi * s.grid->outer())).epsilon(1e-3));
}

TEST_CASE("step conserves mass and positivity") {
  SimConfig c;
  c.mass_multiplier = 1.5;
  const auto s = init_bubble(c);
  const double lim = drift_dt_limit(s);
  const auto s1 = step(s, lim);
  CHECK(std::abs(s1.M - s.M) <= 1e-12 * s.M);
  for (double x : s1.u.values) CHECK(x >= 0.0);
  CHECK_THROWS_AS(step(s, 1.5 * lim), StepRejected);
  CHECK_THROWS_AS(step(s, -1.0), DomainError);
  auto bad = s;
  bad.u[3] = -1e-3;
  CHECK_THROWS_AS(step(bad, lim), DomainError);

  // no drift: heat flow, peak decreases
  StepOptions heat;
  heat.drift = false;
  auto h = s;
  for (int k = 0; k < 20; ++k) {
    const auto nx = step(h, 1e-2, heat);
    CHECK(nx.u_peak < h.u_peak);
    CHECK(std::abs(nx.M - s.M) <= 1e-12 * s.M);
    h = nx;
  }
}

TEST_CASE("bubble is steady up to discretization") {
  // ||u(t+dt) - u(t)|| / dt shrinks at second order under refinement
  std::vector<double> drift;
  for (std::size_t n : {256, 512, 1024}) {
    const auto g = std::make_shared<const CellGrid>(CellGrid::stretched(n, 40.0, 6.0));
    const auto s = bubble_state(g, 1.0);
    const double dt = 1e-5;
    const auto s1 = step(s, dt);
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(s1.u[i] - s.u[i]) / dt);
    drift.push_back(d);
  }
  MESSAGE("steady drift per unit time: " << drift[0] << " " << drift[1] << " " << drift[2]);
  CHECK(order(drift[0], drift[1]) >= 1.5);
  CHECK(order(drift[1], drift[2]) >= 1.5);
}

TEST_CASE("one step follows the second-moment identity") {
  SimConfig c;
  c.mass_multiplier = 2.0;
  const auto s = init_bubble(c);
  const double dt = 1e-4;
  const auto s1 = step(s, dt);
  const double M = s.M, expected = 4.0 * M - M * M / kTwoPi;
  CHECK((s1.m2 - s.m2) / dt == doctest::Approx(expected).epsilon(0.02));
}

TEST_CASE("dichotomy and the second-moment identity in runs") {
  SimConfig sub;
  sub.mass_multiplier = 0.5;
  const auto a = run(sub);
  CHECK(a.status == SimStatus::completed);
  CHECK(a.samples.back().t == doctest::Approx(10.0));
  CHECK(a.samples.back().u_peak < a.samples[a.samples.size() / 2].u_peak);
  const auto ma = verify_m2_identity(a.samples);
  CHECK(ma.slope == doctest::Approx(8.0 * M_PI).epsilon(0.02));

  const auto& b = supercritical();
  CHECK(b.status == SimStatus::blowup);
  const double M = b.samples[0].M;
  const double bound = b.samples[0].m2 / (M * M / kTwoPi - 4.0 * M);
  CHECK(b.final_state.t < bound);
  CHECK(b.min_u >= 0.0);
  CHECK(b.max_mass_drift <= 1e-6);
  const auto mb = verify_m2_identity(b.samples);
  CHECK(mb.slope == doctest::Approx(-64.0 * M_PI).epsilon(0.02));

  SimConfig crit;
  crit.mass_multiplier = 1.0;
  crit.max_t = 1.0;
  const auto cr = run(crit);
  CHECK(cr.status == SimStatus::completed);
  const auto mc = verify_m2_identity(cr.samples);
  CHECK(std::abs(mc.slope) <= 0.01 * 4.0 * 8.0 * M_PI);
  for (const auto& x : cr.samples) CHECK(std::isfinite(x.dm2dt_fit));
}

TEST_CASE("m2 identity needs a window") {
  std::vector<SimSample> few(5);
  CHECK_THROWS_AS(verify_m2_identity(few), DomainError);
  // arithmetic cases on synthetic linear series
  for (double M : {4.0 * M_PI, 16.0 * M_PI}) {
    std::vector<SimSample> ss(20);
    const double slope = 4.0 * M - M * M / kTwoPi;
    for (std::size_t i = 0; i < ss.size(); ++i) {
      ss[i].t = 0.01 * i;
      ss[i].M = M;
      ss[i].m2 = 100.0 + slope * ss[i].t;
    }
    CHECK(verify_m2_identity(ss).rel_discrepancy <= 1e-12);
  }
}

TEST_CASE("rate extraction on injected series") {
  CHECK_THROWS_AS(extract_rate(std::vector<SimSample>(10)), DomainError);
  const double T = 0.3;
  auto series = [&](auto peak_of_tau) {
    std::vector<SimSample> ss;
    for (int i = 0; i <= 120; ++i) {
      const double tau = 0.1 * std::pow(10.0, -5.0 * i / 120.0);
      SimSample s;
      s.t = T - tau;
      s.u_peak = peak_of_tau(tau);
      s.lambda_eff = std::sqrt(8.0 / s.u_peak);
      ss.push_back(s);
    }
    return ss;
  };
  // self-similar: q constant
  const auto f1 = extract_rate(series([](double tau) { return 5.0 / tau; }));
  CHECK(f1.T_est == doctest::Approx(T).epsilon(1e-9));
  // Brent locates the minimum to about sqrt(eps)
  CHECK(f1.exponent == doctest::Approx(1.0).epsilon(1e-6));
  for (double q : f1.q) CHECK(q == doctest::Approx(1.6).epsilon(1e-6));

  // leading rate: q = 4 e^{-(gamma+2)} e^{-sqrt(2|ln tau|)}, strictly decreasing
  const auto f2 = extract_rate(series([](double tau) { return 8.0 / std::pow(lambda_star_tau(tau), 2); }));
  CHECK(f2.monotone_final_decade);
  CHECK(f2.exponent > 1.0);
  CHECK(std::abs(f2.T_est - T) <= 1e-3 * 0.1);
  const double g = 0.5772156649015329;
  for (std::size_t i = 0; i < f2.t.size(); i += 20) {
    const double tau = T - f2.t[i];
    const double expect = 4.0 * std::exp(-(g + 2.0)) * std::exp(-std::sqrt(2.0 * std::abs(std::log(tau))));
    CHECK(4.0 * std::exp(-(g + 2.0)) * std::exp(-std::sqrt(2.0 * std::abs(std::log(tau)))) ==
          doctest::Approx(std::pow(lambda_star_tau(tau), 2) / tau).epsilon(1e-12));
    CHECK(f2.q[i] == doctest::Approx(expect).epsilon(0.05));
  }
  for (std::size_t i = 1; i < f2.q.size(); ++i) CHECK(f2.q[i] < f2.q[i - 1]);
}

TEST_CASE("supercritical run shows the type-II indicator") {
  const auto& r = supercritical();
  const auto f = extract_rate(r.samples);
  CHECK(f.monotone_final_decade);
  CHECK(f.T_est > r.final_state.t);
  MESSAGE("T_est " << f.T_est << ", fitted exponent " << f.exponent << ", q decreasing fraction "
                   << f.decreasing_fraction);
  int filled = 0;
  for (const auto& s : r.samples) filled += s.q_indicator > 0.0;
  CHECK(filled == static_cast<int>(r.samples.size()));
}
