#include "ksblow/specialfn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ksblow/errors.hpp"

namespace ksb {

double expint_Ei(double x) {
  if (!(x < 0.0)) throw DomainError("expint_Ei: argument must be negative");
  const double z = -x;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  if (z <= 5.0) {
    // Ei(x) = gamma + ln|x| + sum_{k>=1} x^k / (k k!)
    double term = 1.0, sum = 0.0;
    for (int k = 1; k < 200; ++k) {
      term *= x / k;
      const double add = term / k;
      sum += add;
      if (std::abs(add) < eps * std::abs(sum)) break;
    }
    return kEulerGamma + std::log(z) + sum;
  }
  // E1(z) = e^{-z} / (z + 1 - 1/(z + 3 - 4/(z + 5 - ...))), modified Lentz.
  constexpr double tiny = 1e-300;
  double b = z + 1.0, c = 1.0 / tiny, d = 1.0 / b, h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -double(i) * double(i);
    b += 2.0;
    d = 1.0 / (an * d + b);
    c = b + an / c;
    const double del = c * d;
    h *= del;
    if (std::abs(del - 1.0) < eps) break;
  }
  return -h * std::exp(-z);
}

double gaussian_Z0_integral(double a, const QuadratureSpec& spec) {
  if (!(a > 1.0)) throw DomainError("gaussian_Z0_integral: a must exceed 1");
  // Truncate where the Gaussian drops below abs_tol * 1e-2.
  const double umax = 2.0 * std::sqrt(std::log(100.0 / spec.abs_tol));
  auto f = [a](double u) { return std::exp(-0.25 * u * u) * Z0(u * a) * u; };
  // Z0(ua) changes sign at u = 1/a and lives on that scale.
  const double s = 1.0 / a;
  std::vector<double> pts{0.0, 0.5 * s, s, 2.0 * s, 8.0 * s, 32.0 * s};
  for (double u = 64.0 * s; u < 1.0; u *= 4.0) pts.push_back(u);
  pts.push_back(1.0);
  pts.push_back(umax);
  std::sort(pts.begin(), pts.end());
  return quad(f, pts, spec);
}

double gaussian_Z0_closed(double a) {
  const double a4 = a * a * a * a;
  return -2.0 / a4 * (expint_Ei(-1.0 / (4.0 * a * a)) + 1.0);
}

double cubic_moment_Z0(double z1) {
  if (!(z1 >= 0.0)) throw DomainError("cubic_moment_Z0: upper limit must be non-negative");
  auto P = [](double z) {
    const double q = 1.0 + z * z;
    return -8.0 * ((2.0 + 3.0 * z * z) / (q * q) + std::log1p(z * z));
  };
  return P(z1) - P(0.0);
}

double heat6_factor(double w) {
  if (!(w >= 0.0)) throw DomainError("heat6_factor: w must be non-negative");
  const double x = 0.25 * w * w;
  if (w < 1.0) {
    // 1 - e^{-x}(1+x) = sum_{k>=2} (-1)^k (k-1) x^k / k!; divide by w^4 = 16 x^2.
    double term = 1.0, sum = 0.0;
    for (int k = 2; k < 40; ++k) {
      term = (k == 2) ? 0.5 : term * (-x) / k;
      const double add = (k - 1) * term;
      sum += add;
      if (std::abs(add) < 1e-18 * std::abs(sum)) break;
    }
    return sum / 16.0;
  }
  return (-std::expm1(-x) - x * std::exp(-x)) / (w * w * w * w);
}

double beta_const(const Cutoff& cutoff, const QuadratureSpec& spec) {
  // 1 - chi0 = 1 beyond s = 2; that tail gives exactly 1/8.
  if (cutoff.kind() == Cutoff::Kind::sharp) return 0.5;
  auto f = [&cutoff](double s) { return (1.0 - cutoff(s)) / (s * s * s); };
  return 0.125 + quad(f, 1.0, 2.0, spec);
}

}  // namespace ksb
