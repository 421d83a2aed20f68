#include "ksblow/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <sstream>

#include "ksblow/errors.hpp"

namespace ksb {

namespace {

constexpr double kXgk[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
constexpr double kWgk[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
constexpr double kWg[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Panel {
  double a, b, value, err, floor;
  bool operator<(const Panel& o) const { return err < o.err; }
};

// QUADPACK qk15 with its resasc-scaled error estimate.
Panel gk15(const Fn& f, double a, double b) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a), dh = std::abs(h);
  const double fc = f(c);
  double resg = fc * kWg[3], resk = fc * kWgk[7], resabs = std::abs(resk);
  double fv1[7], fv2[7];
  for (int j = 0; j < 3; ++j) {
    const int jt = 2 * j + 1;
    const double dx = h * kXgk[jt];
    const double f1 = f(c - dx), f2 = f(c + dx);
    fv1[jt] = f1;
    fv2[jt] = f2;
    resg += kWg[j] * (f1 + f2);
    resk += kWgk[jt] * (f1 + f2);
    resabs += kWgk[jt] * (std::abs(f1) + std::abs(f2));
  }
  for (int j = 0; j < 4; ++j) {
    const int jt = 2 * j;
    const double dx = h * kXgk[jt];
    const double f1 = f(c - dx), f2 = f(c + dx);
    fv1[jt] = f1;
    fv2[jt] = f2;
    resk += kWgk[jt] * (f1 + f2);
    resabs += kWgk[jt] * (std::abs(f1) + std::abs(f2));
  }
  const double reskh = 0.5 * resk;
  double resasc = kWgk[7] * std::abs(fc - reskh);
  for (int j = 0; j < 7; ++j)
    resasc += kWgk[j] * (std::abs(fv1[j] - reskh) + std::abs(fv2[j] - reskh));
  const double result = resk * h;
  resabs *= dh;
  resasc *= dh;
  double err = std::abs((resk - resg) * h);
  if (resasc != 0.0 && err != 0.0) err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  constexpr double eps = std::numeric_limits<double>::epsilon();
  const double floor = 50.0 * eps * resabs;
  if (resabs > std::numeric_limits<double>::min() / (50.0 * eps)) err = std::max(floor, err);
  return {a, b, result, err, floor};
}

}  // namespace

void QuadratureSpec::validate() const {
  if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
    throw DomainError("quadrature tolerances must be positive");
  if (max_subdivisions < 1) throw DomainError("max_subdivisions must be >= 1");
}

QuadratureSpec QuadratureSpec::tightened(double factor) const {
  QuadratureSpec s = *this;
  s.abs_tol /= factor;
  s.rel_tol /= factor;
  s.max_subdivisions *= 4;
  return s;
}

QuadResult integrate(const Fn& f, const std::vector<double>& points, const QuadratureSpec& spec) {
  spec.validate();
  QuadResult out;
  if (points.size() < 2) return out;
  std::priority_queue<Panel> heap;
  double total = 0.0, err = 0.0, floor = 0.0;
  for (std::size_t i = 0; i + 1 < points.size(); ++i) {
    if (points[i] == points[i + 1]) continue;
    Panel p = gk15(f, points[i], points[i + 1]);
    out.evals += 15;
    total += p.value;
    err += p.err;
    floor += p.floor;
    heap.push(p);
  }
  int panels = static_cast<int>(heap.size());
  while (!heap.empty() && err > std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) {
    // Every panel sits at its rounding floor: the tolerance is below what
    // double precision can deliver, accept the result.
    if (err <= 1.5 * floor) break;
    if (panels >= spec.max_subdivisions) {
      out.converged = false;
      break;
    }
    Panel worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (std::abs(worst.b - worst.a) <= 1e3 * std::numeric_limits<double>::epsilon() *
                                             std::max(std::abs(worst.a), std::abs(worst.b))) {
      // Panel at the floating-point resolution limit; nothing left to refine.
      out.converged = err <= 1e3 * std::max(spec.abs_tol, spec.rel_tol * std::abs(total));
      break;
    }
    heap.pop();
    Panel l = gk15(f, worst.a, mid), r = gk15(f, mid, worst.b);
    out.evals += 30;
    total += l.value + r.value - worst.value;
    err += l.err + r.err - worst.err;
    floor += l.floor + r.floor - worst.floor;
    heap.push(l);
    heap.push(r);
    ++panels;
  }
  // Re-sum to shed accumulated cancellation from the running updates.
  total = 0.0;
  err = 0.0;
  while (!heap.empty()) {
    total += heap.top().value;
    err += heap.top().err;
    heap.pop();
  }
  out.value = total;
  out.abs_error = err;
  out.panels = panels;
  return out;
}

QuadResult integrate(const Fn& f, double a, double b, const QuadratureSpec& spec) {
  return integrate(f, std::vector<double>{a, b}, spec);
}

QuadResult integrate_to_inf(const Fn& f, double a, const QuadratureSpec& spec) {
  auto g = [&](double s) {
    const double x = a + (1.0 - s) / s;
    return f(x) / (s * s);
  };
  return integrate(g, 0.0, 1.0, spec);
}

namespace {
double checked(const QuadResult& r, const char* where) {
  if (!r.converged || !std::isfinite(r.value)) {
    std::ostringstream os;
    os << where << ": quadrature did not converge (value " << r.value << ", error estimate "
       << r.abs_error << ")";
    throw QuadratureError(os.str(), r.value, r.abs_error);
  }
  return r.value;
}
}  // namespace

double quad(const Fn& f, double a, double b, const QuadratureSpec& spec) {
  return checked(integrate(f, a, b, spec), "quad");
}
double quad(const Fn& f, const std::vector<double>& points, const QuadratureSpec& spec) {
  return checked(integrate(f, points, spec), "quad");
}
double quad_to_inf(const Fn& f, double a, const QuadratureSpec& spec) {
  return checked(integrate_to_inf(f, a, spec), "quad_to_inf");
}

}  // namespace ksb
