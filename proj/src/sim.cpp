#include "ksblow/sim.hpp"

#include <algorithm>
#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>
#include <cmath>
#include <limits>
#include <sstream>

#include "ksblow/profiles.hpp"

namespace ksb {

namespace {


std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double minmod(double a, double b) {
  if (a * b <= 0.0) return 0.0;
  return std::abs(a) < std::abs(b) ? a : b;
}

// least-squares slope of y against x
double ls_slope(const double* x, const double* y, std::size_t n) {
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxx > 0.0 ? sxy / sxx : 0.0;
}

}  // namespace

CellGrid::CellGrid(std::vector<double> faces) : faces_(std::move(faces)) {
  const std::size_t n = faces_.size();
  if (n < 4) throw DomainError("cell grid needs at least 3 cells");
  if (faces_[0] != 0.0) throw DomainError("cell grid must start at r = 0");
  for (std::size_t i = 1; i < n; ++i)
    if (!(faces_[i] > faces_[i - 1])) throw DomainError("cell faces must be strictly increasing");
  centers_.resize(n - 1);
  areas_.resize(n - 1);
  moments_.resize(n - 1);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double a = faces_[i], b = faces_[i + 1];
    centers_[i] = 0.5 * (a + b);
    areas_[i] = kPi * (b - a) * (b + a);
    moments_[i] = 0.5 * kPi * (b * b * b * b - a * a * a * a);
  }
  nodes_ = std::make_shared<const RadialGrid>(centers_);
}

CellGrid CellGrid::stretched(std::size_t n, double R, double beta) {
  if (n < 3 || !(R > 0.0) || !(beta >= 0.0)) throw DomainError("stretched cell grid: need n >= 3, R > 0, beta >= 0");
  std::vector<double> f(n + 1);
  for (std::size_t k = 0; k <= n; ++k) {
    const double s = static_cast<double>(k) / n;
    f[k] = beta < 1e-12 ? R * s : R * std::expm1(beta * s) / std::expm1(beta);
  }
  f[n] = R;
  return CellGrid(std::move(f));
}

CellGrid CellGrid::geometric(std::size_t n, double R, double first_width) {
  if (n < 3 || !(R > 0.0) || !(first_width > 0.0)) throw DomainError("geometric cell grid: bad parameters");
  const double target = first_width / R;
  if (target >= 1.0 / n) return stretched(n, R, 0.0);
  auto ratio = [n, target](double beta) { return std::expm1(beta / n) / std::expm1(beta) - target; };
  double hi = 1.0;
  while (ratio(hi) > 0.0) hi *= 2.0;
  std::uintmax_t iters = 200;
  const auto r = boost::math::tools::toms748_solve(ratio, 1e-9, hi, boost::math::tools::eps_tolerance<double>(50), iters);
  return stretched(n, R, 0.5 * (r.first + r.second));
}

std::vector<std::string> SimConfig::violations() const {
  std::vector<std::string> v;
  auto need = [&](bool ok, const char* key, double val, const char* rule) {
    if (!ok) v.push_back(std::string(key) + " = " + fmt(val) + ": " + rule);
  };
  need(mass_multiplier > 0.0 && std::isfinite(mass_multiplier), "m_multiplier", mass_multiplier, "must be > 0");
  need(lambda0 > 0.0 && std::isfinite(lambda0), "lambda0", lambda0, "must be > 0");
  need(radius >= 20.0 * lambda0, "radius", radius, "must be >= 20 * lambda0");
  need(cells >= 256, "cells", static_cast<double>(cells), "must be >= 256");
  need(first_cell > 0.0 && first_cell <= 0.125, "first_cell", first_cell, "must be in (0, 1/8]");
  need(cfl > 0.0 && cfl <= 0.5, "cfl", cfl, "must be in (0, 0.5]");
  need(dt_max > 0.0, "dt_max", dt_max, "must be > 0");
  need(dt_min > 0.0 && dt_min < dt_max, "dt_min", dt_min, "must be in (0, dt_max)");
  need(max_t > 0.0 && std::isfinite(max_t), "max_t", max_t, "must be > 0");
  need(peak_factor > 1.0, "peak_factor", peak_factor, "must be > 1");
  need(resolution_cells >= 1.0, "resolution_cells", resolution_cells, "must be >= 1");
  need(sample_dt > 0.0, "sample_dt", sample_dt, "must be > 0");
  need(sample_growth > 1.0, "sample_growth", sample_growth, "must be > 1");
  return v;
}

void SimConfig::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "sim config:";
  for (const auto& s : v) msg += " " + s + ";";
  throw DomainError(msg);
}

CellGridPtr SimConfig::make_grid() const {
  validate();
  return std::make_shared<const CellGrid>(CellGrid::geometric(cells, radius, first_cell * lambda0));
}

void SimState::refresh() {
  const auto& A = grid->areas();
  const auto& mo = grid->second_moments();
  M = 0.0;
  m2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    M += u[i] * A[i];
    m2 += u[i] * mo[i];
  }
  u_peak = u[0];
  lambda_eff = u_peak > 0.0 ? std::sqrt(8.0 / u_peak) : std::numeric_limits<double>::infinity();
}

double SimState::boundary_ratio() const { return u_peak > 0.0 ? u[u.size() - 1] / u_peak : 0.0; }

std::vector<double> cell_averages(const CellGrid& g, const std::function<double(double)>& f) {
  const auto& fc = g.faces();
  std::vector<double> out(g.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double m = boost::math::quadrature::gauss<double, 4>::integrate(
        [&](double r) { return 2.0 * kPi * r * f(r); }, fc[i], fc[i + 1]);
    out[i] = m / g.areas()[i];
  }
  return out;
}

SimState make_state(CellGridPtr g, std::vector<double> u, double t) {
  SimState s;
  s.u = RadialField(g->nodes(), std::move(u));
  s.grid = std::move(g);
  s.t = t;
  s.refresh();
  return s;
}

SimState init_bubble(const SimConfig& cfg) {
  cfg.validate();
  const auto g = cfg.make_grid();
  const double lam = cfg.lambda0, m = cfg.mass_multiplier * 8.0 * kPi, cut = cfg.radius / 4.0;
  const Cutoff chi = Cutoff::quintic();
  auto u = cell_averages(*g, [&](double r) { return m / (8.0 * kPi) / (lam * lam) * bubble_U(r / lam) * chi(r / cut); });
  double mass = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) mass += u[i] * g->areas()[i];
  for (double& x : u) x *= m / mass;
  return make_state(g, std::move(u));
}

std::vector<double> chemical_gradient(const CellGrid& g, const std::vector<double>& u) {
  if (u.size() != g.size()) throw DomainError("chemical_gradient: density size does not match the grid");
  const auto& fc = g.faces();
  const auto& A = g.areas();
  std::vector<double> vr(fc.size(), 0.0);
  double m = 0.0;
  for (std::size_t k = 1; k < fc.size(); ++k) {
    m += u[k - 1] * A[k - 1];
    vr[k] = -m / (2.0 * kPi * fc[k]);
  }
  return vr;
}

double drift_dt_limit(const SimState& s, const StepOptions& opt) {
  if (!opt.drift) return std::numeric_limits<double>::infinity();
  const auto& g = *s.grid;
  const auto vr = chemical_gradient(g, s.u.values);
  const auto& fc = g.faces();
  double rate = 0.0;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double out = 2.0 * kPi * (fc[i] * std::abs(vr[i]) + fc[i + 1] * std::abs(vr[i + 1]));
    rate = std::max(rate, out / g.areas()[i]);
  }
  // reconstructed face values stay below twice the cell value
  const double factor = opt.muscl ? 2.0 : 1.0;
  return rate > 0.0 ? opt.cfl / (factor * rate) : std::numeric_limits<double>::infinity();
}

SimState step(const SimState& s, double dt, const StepOptions& opt) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("step: dt = " + fmt(dt) + " must be > 0");
  const auto& g = *s.grid;
  const std::size_t n = g.size();
  const auto& u = s.u.values;
  const auto& fc = g.faces();
  const auto& c = g.centers();
  const auto& A = g.areas();
  for (double x : u)
    if (x < 0.0) throw DomainError("step: negative density in the input state");

  std::vector<double> ustar(u);
  if (opt.drift) {
    const double lim = drift_dt_limit(s, opt);
    if (dt > lim * (1.0 + 1e-12))
      throw StepRejected("step: dt = " + fmt(dt) + " exceeds the drift limit " + fmt(lim));
    const auto vr = chemical_gradient(g, u);
    std::vector<double> slope(n, 0.0);
    if (opt.muscl)
      for (std::size_t i = 1; i + 1 < n; ++i)
        slope[i] = minmod((u[i + 1] - u[i]) / (c[i + 1] - c[i]), (u[i] - u[i - 1]) / (c[i] - c[i - 1]));
    // H_k = -2 pi f_k v_r u_face: mass entering cell k-1 from cell k
    std::vector<double> H(n + 1, 0.0);
    for (std::size_t k = 1; k < n; ++k) {
      const double uf = vr[k] < 0.0 ? u[k] - slope[k] * (c[k] - fc[k]) : u[k - 1] + slope[k - 1] * (fc[k] - c[k - 1]);
      H[k] = -2.0 * kPi * fc[k] * vr[k] * uf;
    }
    for (std::size_t i = 0; i < n; ++i) ustar[i] = u[i] + dt / A[i] * (H[i + 1] - H[i]);
  }

  // (A_i - dt D) u_new = A_i u*, D the diffusive face fluxes 2 pi f (u_k - u_{k-1}) / (c_k - c_{k-1})
  std::vector<double> sub(n, 0.0), diag(n), sup(n, 0.0), rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i > 0 ? 2.0 * kPi * fc[i] / (c[i] - c[i - 1]) : 0.0;
    const double right = i + 1 < n ? 2.0 * kPi * fc[i + 1] / (c[i + 1] - c[i]) : 0.0;
    sub[i] = -dt * left;
    sup[i] = -dt * right;
    diag[i] = A[i] + dt * (left + right);
    rhs[i] = A[i] * ustar[i];
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(x[i])) throw SolveError("step: non-finite density at cell " + std::to_string(i));
    if (x[i] < 0.0) throw StepRejected("step: negative density " + fmt(x[i]) + " at cell " + std::to_string(i));
  }
  return make_state(s.grid, std::move(x), s.t + dt);
}

namespace {

SimSample sample_of(const SimState& s) {
  SimSample o;
  o.t = s.t;
  o.M = s.M;
  o.m2 = s.m2;
  o.u_peak = s.u_peak;
  o.lambda_eff = s.lambda_eff;
  o.boundary_ratio = s.boundary_ratio();
  return o;
}

// centered least-squares slope over up to 7 samples
void fill_dm2dt(std::vector<SimSample>& ss) {
  const std::size_t n = ss.size();
  std::vector<double> t(n), m(n);
  for (std::size_t i = 0; i < n; ++i) {
    t[i] = ss[i].t;
    m[i] = ss[i].m2;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= 3 ? i - 3 : 0, hi = std::min(n, i + 4);
    ss[i].dm2dt_fit = hi - lo >= 2 ? ls_slope(&t[lo], &m[lo], hi - lo) : 0.0;
  }
}

}  // namespace

SimRun run(const SimConfig& cfg) {
  SimRun out;
  SimState s = init_bubble(cfg);
  const StepOptions opt{cfg.muscl, cfg.drift, cfg.cfl};
  const double M0 = s.M, peak0 = s.u_peak;
  const double min_lambda = cfg.resolution_cells * s.grid->faces()[1];
  out.min_u = *std::min_element(s.u.values.begin(), s.u.values.end());
  out.samples.push_back(sample_of(s));
  double next_t = cfg.sample_dt, last_peak = s.u_peak;
  double dt = std::min(cfg.dt_max, cfg.cfl / s.u_peak);

  for (;;) {
    if (s.t >= cfg.max_t * (1.0 - 1e-14)) {
      out.status = SimStatus::completed;
      out.reason = "reached max_t";
      break;
    }
    dt = std::min({dt * 1.2, cfg.dt_max, cfg.cfl / s.u_peak, drift_dt_limit(s, opt), cfg.max_t - s.t});
    bool accepted = false;
    while (!accepted) {
      if (dt < cfg.dt_min) break;
      try {
        SimState next = step(s, dt, opt);
        s = std::move(next);
        accepted = true;
      } catch (const StepRejected&) {
        ++out.rejected;
        dt *= 0.5;
      }
    }
    if (!accepted) {
      out.status = SimStatus::blowup;
      out.reason = "time step below dt_min";
      break;
    }
    ++out.steps;
    out.min_u = std::min(out.min_u, *std::min_element(s.u.values.begin(), s.u.values.end()));
    out.max_mass_drift = std::max(out.max_mass_drift, std::abs(s.M - M0) / M0);
    const bool grew = s.u_peak > last_peak * cfg.sample_growth || s.u_peak < last_peak / cfg.sample_growth;
    if (s.t >= next_t * (1.0 - 1e-12) || grew) {
      out.samples.push_back(sample_of(s));
      last_peak = s.u_peak;
      while (next_t <= s.t * (1.0 + 1e-12)) next_t += cfg.sample_dt;
    }
    if (s.u_peak > cfg.peak_factor * peak0) {
      out.status = SimStatus::blowup;
      out.reason = "peak threshold";
      break;
    }
    if (s.lambda_eff < min_lambda) {
      out.status = SimStatus::blowup;
      out.reason = "resolution lost";
      break;
    }
  }
  if (out.samples.back().t != s.t) out.samples.push_back(sample_of(s));
  fill_dm2dt(out.samples);
  if (out.status == SimStatus::blowup) {
    try {
      const RateFit f = extract_rate(out.samples);
      for (auto& x : out.samples)
        if (x.t < f.T_est) x.q_indicator = x.lambda_eff * x.lambda_eff / (f.T_est - x.t);
    } catch (const DomainError&) {
      // not enough dynamic range; q stays 0
    }
  }
  out.final_state = std::move(s);
  return out;
}

M2Report verify_m2_identity(const std::vector<SimSample>& series) {
  std::vector<double> t, m;
  double M = 0.0;
  for (const auto& x : series) {
    if (!(x.boundary_ratio < 1e-10)) break;
    t.push_back(x.t);
    m.push_back(x.m2);
    M += x.M;
  }
  if (t.size() < 10)
    throw DomainError("verify_m2_identity: " + std::to_string(t.size()) + " samples in the window, need >= 10");
  M /= t.size();
  M2Report r;
  r.samples = t.size();
  r.slope = ls_slope(t.data(), m.data(), t.size());
  r.expected = 4.0 * M - M * M / (2.0 * kPi);
  r.abs_discrepancy = std::abs(r.slope - r.expected);
  // at M = 8 pi the expected slope vanishes; measure against 4M instead
  const bool critical = std::abs(r.expected) < 1e-9 * 4.0 * M;
  r.rel_discrepancy = r.abs_discrepancy / (critical ? 4.0 * M : std::abs(r.expected));
  return r;
}

RateFit extract_rate(const std::vector<SimSample>& series) {
  if (series.size() < 20)
    throw DomainError("extract_rate: " + std::to_string(series.size()) + " samples, need >= 20");
  double peak = 0.0;
  for (const auto& x : series) peak = std::max(peak, x.u_peak);
  // final stretch whose u_peak lies in the top two decades
  std::size_t first = series.size();
  while (first > 0 && series[first - 1].u_peak >= peak / 100.0) --first;
  double lo = peak;
  for (std::size_t i = 0; i < series.size(); ++i) lo = std::min(lo, series[i].u_peak);
  if (peak / lo < 100.0 || first == 0)
    throw DomainError("extract_rate: u_peak spans " + fmt(peak / lo) + ", need two decades");
  std::vector<double> t, y;
  for (std::size_t i = first; i < series.size(); ++i) {
    t.push_back(series[i].t);
    y.push_back(-std::log(series[i].u_peak));
  }
  if (t.size() < 20)
    throw DomainError("extract_rate: " + std::to_string(t.size()) + " samples in the last two decades, need >= 20");
  const double t_last = t.back(), span = t_last - t.front();
  // for fixed T, ln(1/u_peak) = ln A + k ln(T - t) is linear least squares
  auto sse = [&](double s, double* lnA, double* k) {
    const double T = t_last + std::exp(s);
    std::vector<double> x(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) x[i] = std::log(T - t[i]);
    const double kk = ls_slope(x.data(), y.data(), x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i];
      my += y[i];
    }
    const double a = (my - kk * mx) / x.size();
    double e = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) e += std::pow(y[i] - a - kk * x[i], 2);
    if (lnA) *lnA = a;
    if (k) *k = kk;
    return e;
  };
  const auto best = boost::math::tools::brent_find_minima([&](double s) { return sse(s, nullptr, nullptr); },
                                                          std::log(span * 1e-9), std::log(span * 10.0), 60);
  RateFit f;
  double lnA = 0.0;
  sse(best.first, &lnA, &f.exponent);
  f.T_est = t_last + std::exp(best.first);
  f.amplitude = std::exp(lnA);
  for (const auto& x : series) {
    f.t.push_back(x.t);
    f.lambda_eff.push_back(x.lambda_eff);
    f.q.push_back(x.lambda_eff * x.lambda_eff / (f.T_est - x.t));
  }
  std::size_t dec = 0, total = 0, start = series.size();
  while (start > 0 && series[start - 1].u_peak >= peak / 10.0) --start;
  for (std::size_t i = start + 1; i < series.size(); ++i) {
    ++total;
    if (f.q[i] < f.q[i - 1]) ++dec;
  }
  f.decreasing_fraction = total ? static_cast<double>(dec) / total : 0.0;
  f.monotone_final_decade = total > 0 && dec == total;
  return f;
}

}  // namespace ksb
