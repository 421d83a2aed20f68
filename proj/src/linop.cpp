#include "ksblow/linop.hpp"

#include <cmath>
#include <sstream>

#include "ksblow/errors.hpp"
#include "ksblow/profiles.hpp"
#include "ksblow/quadrature.hpp"

namespace ksb {

namespace {

constexpr std::size_t kMinNodes = 16;

void require_nodes(const RadialField& f, const char* who) {
  if (!f.grid) throw DomainError(std::string(who) + ": field has no grid");
  if (f.size() < kMinNodes) {
    std::ostringstream os;
    os << who << ": grid too coarse (" << f.size() << " nodes, need at least " << kMinNodes << ")";
    throw DomainError(os.str());
  }
}

// int_0^{rho_i} f(s) s ds at every node.
std::vector<double> cumulative_moment(const RadialGrid& g, const std::vector<double>& f) {
  std::vector<double> sf(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) sf[i] = f[i] * g.r(i);
  return cumulative_integral(g.radii(), sf);
}

double abs_integral(const RadialGrid& g, const std::vector<double>& f, double weight_power) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += g.cell_areas()[i] * std::abs(f[i]) * std::pow(g.r(i), weight_power);
  return s;
}

// Reverse cumulative int_{r_i}^{r_{n-1}} f(r) w(r) dr with f interpolated by
// quadratics (two stencils averaged) and the weight w integrated exactly.
// Used where w carries the log singularity of zbar0 at the origin.
std::vector<double> reverse_product_integral(const RadialGrid& g, const std::vector<double>& f,
                                             const std::function<double(double)>& w) {
  const std::size_t n = g.size();
  const auto& r = g.radii();
  QuadratureSpec spec;
  spec.abs_tol = 1e-300;
  spec.rel_tol = 1e-12;
  auto piece = [&](std::size_t j0, double a, double b) {
    const double x0 = r[j0], x1 = r[j0 + 1], x2 = r[j0 + 2];
    auto P = [&](double x) {
      return f[j0] * (x - x1) * (x - x2) / ((x0 - x1) * (x0 - x2)) +
             f[j0 + 1] * (x - x0) * (x - x2) / ((x1 - x0) * (x1 - x2)) +
             f[j0 + 2] * (x - x0) * (x - x1) / ((x2 - x0) * (x2 - x1));
    };
    return integrate([&](double x) { return P(x) * w(x); }, a, b, spec).value;
  };
  std::vector<double> out(n, 0.0);
  for (std::size_t i = n - 1; i-- > 0;) {
    double acc = 0.0;
    int cnt = 0;
    if (i >= 1) {
      acc += piece(i - 1, r[i], r[i + 1]);
      ++cnt;
    }
    if (i + 2 < n) {
      acc += piece(i, r[i], r[i + 1]);
      ++cnt;
    }
    out[i] = out[i + 1] + acc / cnt;
  }
  return out;
}

// int_R^inf w(r) phi(r) 2 pi r dr with phi continued as a power law read off
// the last two nodes (fallback r^-4) and the weight w kept exact.
double weighted_tail(const RadialGrid& g, const std::vector<double>& phi,
                     const std::function<double(double)>& w) {
  const std::size_t n = g.size();
  const double R = g.r(n - 1), f1 = phi[n - 2], f2 = phi[n - 1];
  if (f2 == 0.0) return 0.0;
  double p = 4.0;
  if (f1 != 0.0 && (f1 > 0.0) == (f2 > 0.0)) {
    const double est = -std::log(f2 / f1) / std::log(R / g.r(n - 2));
    if (std::isfinite(est) && est > 2.5 && est < 12.0) p = est;
  }
  QuadratureSpec spec;
  spec.abs_tol = 1e-300;
  spec.rel_tol = 1e-10;
  return integrate_to_inf([&](double r) { return w(r) * f2 * std::pow(R / r, p) * 2.0 * kPi * r; }, R, spec).value;
}

}  // namespace

double total_mass(const RadialField& phi, double decay_power) {
  return integrate_2d(phi) + tail_2d(*phi.grid, phi.values, decay_power);
}

RadialField inv_laplacian_gradient(const RadialField& phi) {
  const auto& g = *phi.grid;
  const auto c = cumulative_moment(g, phi.values);
  std::vector<double> out(phi.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = g.r(i) > 0.0 ? -c[i] / g.r(i) : 0.0;
  return RadialField(phi.grid, std::move(out));
}

RadialField inv_laplacian_decaying(const RadialField& phi) {
  const auto& g = *phi.grid;
  const auto dpsi = inv_laplacian_gradient(phi);
  std::vector<double> minus(dpsi.values);
  for (double& x : minus) x = -x;
  auto psi = reverse_cumulative_integral(g.radii(), minus);
  const std::size_t n = g.size();
  const double tail = tail_1d(g.r(n - 2), minus[n - 2], g.r(n - 1), minus[n - 1], 3.0);
  for (double& x : psi) x += tail;
  return RadialField(phi.grid, std::move(psi));
}

RadialField apply_L(const RadialField& phi) {
  require_nodes(phi, "apply_L");
  const auto& g = *phi.grid;
  const std::size_t n = g.size();
  const auto dpsi = inv_laplacian_gradient(phi);
  // psi increments over each interval from the quadratic rule on d psi.
  const auto psi = cumulative_integral(g.radii(), dpsi.values);
  std::vector<double> flux(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double rf = g.faces()[i], dr = g.r(i + 1) - g.r(i);
    const double dg = (phi[i + 1] / bubble_U(g.r(i + 1)) - phi[i] / bubble_U(g.r(i))) - (psi[i + 1] - psi[i]);
    flux[i] = rf * bubble_U(rf) * dg / dr;
  }
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double right = i + 1 < n ? flux[i] : 0.0;
    const double left = i > 0 ? flux[i - 1] : 0.0;
    out[i] = 2.0 * kPi * (right - left) / g.cell_areas()[i];
  }
  return RadialField(phi.grid, std::move(out));
}

Decomposition decompose(const RadialField& phi, double mass_tol) {
  require_nodes(phi, "decompose");
  const auto& g = *phi.grid;
  const double mass = total_mass(phi);
  const double scale = abs_integral(g, phi.values, 0.0);
  if (std::abs(mass) > mass_tol * std::max(scale, 1e-300)) {
    std::ostringstream os;
    os << "decompose: input mass " << mass << " is not zero (tolerance " << mass_tol * scale << ")";
    throw DomainError(os.str());
  }
  std::vector<double> gp(phi.size());
  for (std::size_t i = 0; i < gp.size(); ++i) gp[i] = gamma0(g.r(i)) * phi[i];
  const double a = (integrate_2d(g, gp) + weighted_tail(g, phi.values, gamma0)) / (8.0 * kPi);

  const auto psi = inv_laplacian_decaying(phi);
  Decomposition d;
  d.a = a;
  std::vector<double> pp(phi.size()), gg(phi.size());
  for (std::size_t i = 0; i < pp.size(); ++i) {
    const double r = g.r(i);
    pp[i] = phi[i] - 0.5 * a * Z0(r);
    gg[i] = phi[i] / bubble_U(r) - psi[i] + a;
  }
  d.phi_perp = RadialField(phi.grid, std::move(pp));
  d.g_perp = RadialField(phi.grid, std::move(gg));
  return d;
}

RadialField solve_L(const RadialField& h, bool enforce_moments, double moment_tol) {
  require_nodes(h, "solve_L");
  const auto& g = *h.grid;
  const std::size_t n = g.size();
  for (double x : h.values)
    if (!std::isfinite(x)) throw DomainError("solve_L: right-hand side is not finite");

  const double m0 = integrate_2d(h);
  const double s0 = abs_integral(g, h.values, 0.0);
  std::ostringstream bad;
  if (std::abs(m0) > moment_tol * std::max(s0, 1e-300))
    bad << "mass " << m0 << " exceeds " << moment_tol * s0 << "; ";
  if (enforce_moments) {
    std::vector<double> h2(n);
    for (std::size_t i = 0; i < n; ++i) h2[i] = h[i] * g.r(i) * g.r(i);
    const double m2 = integrate_2d(g, h2);
    const double s2 = abs_integral(g, h.values, 2.0);
    if (std::abs(m2) > moment_tol * std::max(s2, 1e-300))
      bad << "second moment " << m2 << " exceeds " << moment_tol * s2 << "; ";
  }
  if (!bad.str().empty()) throw DomainError("solve_L: " + bad.str());

  // rho U g' = int_0^rho h s ds. Any leftover discrete mass would make g grow
  // like rho^4, so the residual (within tolerance) is moved onto a Gaussian.
  auto H = cumulative_moment(g, h.values);
  {
    std::vector<double> sh(n), gq(n);
    for (std::size_t i = 0; i < n; ++i) {
      sh[i] = h[i] * g.r(i);
      gq[i] = std::exp(-g.r(i) * g.r(i));
    }
    const double tail = tail_1d(g.r(n - 2), sh[n - 2], g.r(n - 1), sh[n - 1], 5.0);
    const auto Q = cumulative_moment(g, gq);
    const double c = (H[n - 1] + tail) / Q[n - 1];
    for (std::size_t i = 0; i < n; ++i) H[i] -= c * Q[i];
  }
  std::vector<double> dg(n, 0.0);
  for (std::size_t i = 1; i < n; ++i) dg[i] = H[i] / (g.r(i) * bubble_U(g.r(i)));
  auto gv = cumulative_integral(g.radii(), dg);

  // Orthogonality int U g_perp = 0 fixes the additive constant.
  std::vector<double> ug(n);
  for (std::size_t i = 0; i < n; ++i) ug[i] = bubble_U(g.r(i)) * gv[i];
  // g tends to a constant, and int_R^inf U 2 pi r dr = 8 pi / (1 + R^2).
  const double R = g.outer();
  const double shift = (integrate_2d(g, ug) + gv[n - 1] * 8.0 * kPi / (1.0 + R * R)) / (8.0 * kPi);
  for (double& x : gv) x -= shift;

  // psi_perp = z0 int_rho^inf f zbar0 r dr + zbar0 int_0^rho f z0 r dr, f = U g_perp.
  std::vector<double> f(n), fa(n), fb(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.r(i);
    f[i] = bubble_U(r) * gv[i];
    fa[i] = r > 0.0 ? f[i] * zbar0_kernel(r) * r : 0.0;
    fb[i] = f[i] * z0_kernel(r) * r;
  }
  auto A = reverse_product_integral(g, f, [](double r) { return r > 0.0 ? zbar0_kernel(r) * r : 0.0; });
  QuadratureSpec tspec;
  tspec.abs_tol = 1e-300;
  tspec.rel_tol = 1e-10;
  const double tailA =
      gv[n - 1] * integrate_to_inf([](double r) { return bubble_U(r) * zbar0_kernel(r) * r; }, R, tspec).value;
  const auto B = cumulative_integral(g.radii(), fb);
  std::vector<double> phi(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = g.r(i);
    const double psi = z0_kernel(r) * (A[i] + tailA) + (r > 0.0 ? zbar0_kernel(r) * B[i] : 0.0);
    phi[i] = bubble_U(r) * (gv[i] + psi);
  }
  return RadialField(h.grid, std::move(phi));
}

}  // namespace ksb
