#include "ksblow/radial.hpp"

#include <cmath>
#include <sstream>

#include "ksblow/errors.hpp"
#include "ksblow/profiles.hpp"

namespace ksb {

namespace {

// Weights of int_{x0}^{x2} y dx from the quadratic through three nodes.
void simpson3(double x0, double x1, double x2, double& w0, double& w1, double& w2) {
  const double h0 = x1 - x0, h1 = x2 - x1, H = h0 + h1;
  w0 = H / 6.0 * (2.0 - h1 / h0);
  w1 = H * H * H / (6.0 * h0 * h1);
  w2 = H / 6.0 * (2.0 - h0 / h1);
}

// Weights of int_{x1}^{x2} y dx from the quadratic through x0, x1, x2.
void last_interval(double x0, double x1, double x2, double& w0, double& w1, double& w2) {
  const double h0 = x1 - x0, h1 = x2 - x1;
  w0 = -h1 * h1 * h1 / (6.0 * h0 * (h0 + h1));
  w1 = h1 * (h1 + 3.0 * h0) / (6.0 * h0);
  w2 = h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * (h0 + h1));
}

}  // namespace

RadialGrid::RadialGrid(std::vector<double> radii) : r_(std::move(radii)) {
  const std::size_t n = r_.size();
  if (n < 3) throw DomainError("radial grid needs at least 3 nodes");
  if (r_[0] < 0.0) throw DomainError("radial grid radii must be non-negative");
  for (std::size_t i = 1; i < n; ++i)
    if (!(r_[i] > r_[i - 1])) throw DomainError("radial grid radii must be strictly increasing");

  faces_.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) faces_[i] = 0.5 * (r_[i] + r_[i + 1]);
  area_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double lo = i == 0 ? r_[0] : faces_[i - 1];
    const double hi = i + 1 == n ? r_[n - 1] : faces_[i];
    area_[i] = kPi * (hi * hi - lo * lo);
  }
  if (r_[0] > 0.0) area_[0] += kPi * r_[0] * r_[0];

  // Composite Simpson on r f(r); weights then multiply f.
  std::vector<double> v(n, 0.0);
  std::size_t i = 0;
  for (; i + 2 < n; i += 2) {
    double w0, w1, w2;
    simpson3(r_[i], r_[i + 1], r_[i + 2], w0, w1, w2);
    v[i] += w0;
    v[i + 1] += w1;
    v[i + 2] += w2;
  }
  if (i + 1 < n) {
    double w0, w1, w2;
    last_interval(r_[n - 3], r_[n - 2], r_[n - 1], w0, w1, w2);
    v[n - 3] += w0;
    v[n - 2] += w1;
    v[n - 1] += w2;
  }
  w_.resize(n);
  for (std::size_t k = 0; k < n; ++k) w_[k] = 2.0 * kPi * r_[k] * v[k];
  if (r_[0] > 0.0) w_[0] += kPi * r_[0] * r_[0];

  const double R = r_.back();
  double sw = 0.0, sa = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    sw += w_[k];
    sa += area_[k];
  }
  if (std::abs(sw - kPi * R * R) > 1e-10 * kPi * R * R ||
      std::abs(sa - kPi * R * R) > 1e-10 * kPi * R * R) {
    std::ostringstream os;
    os << "radial grid weights sum to " << sw << " instead of pi R^2 = " << kPi * R * R;
    throw DomainError(os.str());
  }
}

RadialGrid RadialGrid::stretched(std::size_t n, double R, double beta) {
  if (n < 3 || !(R > 0.0) || !(beta > 0.0)) throw DomainError("stretched grid: need n >= 3, R > 0, beta > 0");
  std::vector<double> r(n);
  const double A = R / std::expm1(beta);
  for (std::size_t i = 0; i < n; ++i) r[i] = A * std::expm1(beta * double(i) / double(n - 1));
  r[n - 1] = R;
  return RadialGrid(std::move(r));
}

RadialGrid RadialGrid::geometric(std::size_t n, double R, double first_step) {
  if (n < 3 || !(R > 0.0) || !(first_step > 0.0)) throw DomainError("geometric grid: need n >= 3, R > 0, first_step > 0");
  if (first_step * double(n - 1) >= R) return uniform(n, R);
  // Solve A (e^{beta/(n-1)} - 1) = first_step with A = R / (e^beta - 1).
  auto step = [&](double b) { return R * std::expm1(b / double(n - 1)) / std::expm1(b); };
  double lo = 1e-12, hi = 1.0;
  while (step(hi) > first_step) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (step(mid) > first_step ? lo : hi) = mid;
  }
  return stretched(n, R, 0.5 * (lo + hi));
}

RadialGrid RadialGrid::uniform(std::size_t n, double R) {
  if (n < 3 || !(R > 0.0)) throw DomainError("uniform grid: need n >= 3, R > 0");
  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = R * double(i) / double(n - 1);
  return RadialGrid(std::move(r));
}

RadialField::RadialField(GridPtr g, std::vector<double> v) : grid(std::move(g)), values(std::move(v)) {
  if (!grid || grid->size() != values.size()) throw DomainError("radial field length does not match its grid");
}

RadialField RadialField::sample(GridPtr g, const std::function<double(double)>& f) {
  std::vector<double> v(g->size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(g->r(i));
  return RadialField(std::move(g), std::move(v));
}

double RadialField::sup() const {
  double s = 0.0;
  for (double x : values) s = std::max(s, std::abs(x));
  return s;
}

double integrate_2d(const RadialGrid& g, const std::vector<double>& f) {
  const auto& w = g.weights();
  double s = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) s += w[i] * f[i];
  return s;
}

double integrate_2d(const RadialField& f) { return integrate_2d(*f.grid, f.values); }

double tail_1d(double r1, double f1, double r2, double f2, double fallback_power) {
  double p = fallback_power;
  if (f1 != 0.0 && f2 != 0.0 && (f1 > 0.0) == (f2 > 0.0)) {
    const double est = -std::log(f2 / f1) / std::log(r2 / r1);
    if (std::isfinite(est) && est > 1.05 && std::abs(est - fallback_power) < 1.0) p = est;
  }
  if (!(p > 1.0)) return 0.0;
  return f2 * r2 / (p - 1.0);
}

double tail_2d(const RadialGrid& g, const std::vector<double>& f, double fallback_power) {
  const std::size_t n = g.size();
  const double r1 = g.r(n - 2), r2 = g.r(n - 1);
  // r f(r) decays with one power less.
  return 2.0 * kPi * tail_1d(r1, r1 * f[n - 2], r2, r2 * f[n - 1], fallback_power - 1.0);
}

namespace {

// int_a^b of the quadratic through (x_k, y_k), k = 0..2.
double quadratic_piece(const double* x, const double* y, double a, double b) {
  // Local coordinates about a keep the primitive free of cancellation.
  const double h = b - a;
  double s = 0.0;
  for (int j = 0; j < 3; ++j) {
    const double p = x[(j + 1) % 3] - a, q = x[(j + 2) % 3] - a;
    const double den = (x[j] - x[(j + 1) % 3]) * (x[j] - x[(j + 2) % 3]);
    s += y[j] * (h * h * h / 3.0 - (p + q) * h * h / 2.0 + p * q * h) / den;
  }
  return s;
}

std::vector<double> interval_integrals(const std::vector<double>& r, const std::vector<double>& f) {
  const std::size_t n = r.size();
  std::vector<double> out(n > 0 ? n - 1 : 0);
  if (n < 3) {
    for (std::size_t i = 0; i + 1 < n; ++i) out[i] = 0.5 * (f[i] + f[i + 1]) * (r[i + 1] - r[i]);
    return out;
  }
  for (std::size_t i = 0; i + 1 < n; ++i) {
    double acc = 0.0;
    int cnt = 0;
    if (i >= 1) {
      acc += quadratic_piece(&r[i - 1], &f[i - 1], r[i], r[i + 1]);
      ++cnt;
    }
    if (i + 2 < n) {
      acc += quadratic_piece(&r[i], &f[i], r[i], r[i + 1]);
      ++cnt;
    }
    out[i] = acc / cnt;
  }
  return out;
}

}  // namespace

std::vector<double> cumulative_integral(const std::vector<double>& r, const std::vector<double>& f) {
  const auto piece = interval_integrals(r, f);
  std::vector<double> out(r.size(), 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) out[i] = out[i - 1] + piece[i - 1];
  return out;
}

std::vector<double> reverse_cumulative_integral(const std::vector<double>& r, const std::vector<double>& f) {
  const auto piece = interval_integrals(r, f);
  std::vector<double> out(r.size(), 0.0);
  for (std::size_t i = r.size() - 1; i-- > 0;) out[i] = out[i + 1] + piece[i];
  return out;
}

std::vector<double> cumulative_trapezoid(const std::vector<double>& r, const std::vector<double>& f) {
  std::vector<double> out(r.size(), 0.0);
  for (std::size_t i = 1; i < r.size(); ++i) out[i] = out[i - 1] + 0.5 * (f[i] + f[i - 1]) * (r[i] - r[i - 1]);
  return out;
}

}  // namespace ksb
