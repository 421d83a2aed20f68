#include "ksblow/rate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ksblow/errors.hpp"
#include "ksblow/profiles.hpp"

namespace ksb {

namespace {

double log_abs(double tau) { return std::abs(std::log(tau)); }
double v_of(double tau) { return std::sqrt(2.0 * log_abs(tau)); }

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

double tau_checked(const RateFunction& p, double t, double lo, const char* who) {
  const auto& w = p.window();
  if (!(t > lo && t < w.T))
    throw DomainError(std::string(who) + ": t = " + fmt(t) + " outside (" + fmt(lo) + ", " + fmt(w.T) + ")");
  return w.T - t;
}

QuadratureSpec scaled_spec(double scale, double rel = 1e-11) {
  return {std::max(1e-300, 1e-15 * scale), rel, 4000};
}

// int_{lo}^{hi} g(d) dd / d, oriented, split at d = tau
double log_integral(const Fn& g, double lo, double hi, double tau, const QuadratureSpec& spec) {
  if (lo == hi) return 0.0;
  double sgn = 1.0;
  if (hi < lo) {
    std::swap(lo, hi);
    sgn = -1.0;
  }
  std::vector<double> pts{std::log(lo), std::log(hi)};
  if (tau > lo && tau < hi) pts.insert(pts.begin() + 1, std::log(tau));
  return sgn * quad([&](double x) { return g(std::exp(x)); }, pts, spec);
}

double residual_tau(const RateFunction& p, double tau, const QuadratureSpec& spec) {
  const auto& w = p.window();
  const double lam2 = p.lambda_sq_tau(tau), reach = w.tau_max() - tau;
  if (!(lam2 > 0.0) && !p.is_zero()) throw DomainError("nonlocal_residual: lambda^2 = " + fmt(lam2) + " must be > 0");
  if (p.is_zero()) return 0.0;
  if (!(lam2 < reach))
    throw DomainError("nonlocal_residual: lambda^2 = " + fmt(lam2) + " >= t + epsT = " + fmt(reach));
  QuadratureSpec s = spec;
  s.abs_tol = std::max(spec.abs_tol, 1e-15 * std::abs(p.at_tau(tau)));
  const double memory = log_integral([&](double d) { return p.at_tau(tau + d); }, lam2, reach, tau, s);
  return -memory + RateConstants::standard().kappa * p.at_tau(tau) + p.int_p_over_tau(w.tau_max());
}

struct LocalScales {
  double tau, L, v, N, inner;
};

LocalScales local_scales(const TimeWindow& w, double tau, double sigma, const char* who) {
  LocalScales s;
  s.tau = tau;
  s.L = log_abs(tau);
  s.v = std::sqrt(2.0 * s.L);
  s.N = std::pow(s.L, 0.25);
  s.inner = tau * std::exp(-sigma * s.v);
  if (!((1.0 + s.N) * tau < w.tau_max()))
    throw DomainError(std::string(who) + ": t - N(t)(T - t) = " + fmt(w.T - (1.0 + s.N) * tau) +
                      " below -epsT = " + fmt(-w.epsT));
  return s;
}

double tail_of(const std::vector<double>& f, const std::vector<double>& tau, const LogNorm& n) {
  double v = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) v = std::max(v, n.weight(tau[i]) * std::abs(f[i]));
  return v;
}

}  // namespace

void LogNorm::validate() const {
  if (!(gamma_exp >= 1.0)) throw DomainError("LogNorm: gamma_exp = " + fmt(gamma_exp) + " must be >= 1");
  if (!std::isfinite(m)) throw DomainError("LogNorm: m must be finite");
}

double LogNorm::weight(double tau) const {
  const double L = log_abs(tau);
  return std::pow(L, m) * std::exp(gamma_exp * std::sqrt(2.0 * L));
}

double LogNorm::of(const std::function<double(double)>& f, const std::vector<double>& taus) const {
  double v = 0.0;
  for (double tau : taus) v = std::max(v, weight(tau) * std::abs(f(tau)));
  return v;
}

double LogNorm::of(const RateFunction& p, const std::vector<double>& taus) const {
  return of([&p](double tau) { return p.at_tau(tau); }, taus);
}

double nonlocal_residual(const RateFunction& p, double t, const QuadratureSpec& spec) {
  return residual_tau(p, tau_checked(p, t, 0.0, "nonlocal_residual"), spec);
}

double f_star(double t, const RateFunction& p_star, const QuadratureSpec& spec) {
  const double tau = tau_checked(p_star, t, -0.5 * p_star.window().T, "f_star");
  return -residual_tau(p_star, tau, spec);
}

double f_star(double t, const TimeWindow& w, const QuadratureSpec& spec) {
  return f_star(t, RateFunction::star(w), spec);
}

namespace {

// e^{w} f at ln tau = -w^2/2; the resolvent integrals in v = sqrt(2|ln tau|)
double resolvent_integrand(const Fn& f_of_log_tau, double w) {
  if (w > 700.0) return 0.0;
  const double y = f_of_log_tau(-0.5 * w * w);
  if (!std::isfinite(y)) throw DomainError("resolvent_T0: non-finite f at ln tau = " + fmt(-0.5 * w * w));
  return std::exp(w) * y;
}

double resolvent_piece(const Fn& f, double v_lo, double v_hi) {
  if (v_hi <= v_lo) return 0.0;
  const double scale = std::max(std::abs(resolvent_integrand(f, v_lo)), std::abs(resolvent_integrand(f, v_hi)));
  return quad([&](double w) { return resolvent_integrand(f, w); }, v_lo, v_hi, scaled_spec(scale, 1e-10));
}

double resolvent_tail(const Fn& f, double v) {
  const double scale = std::abs(resolvent_integrand(f, v));
  return quad_to_inf([&](double w) { return resolvent_integrand(f, w); }, v, scaled_spec(scale, 1e-9));
}

// Below tau = e^{-690} f is continued with the decay shape of `norm`.
Fn log_form(const std::function<double(double)>& f_of_tau, const LogNorm& norm) {
  constexpr double x_min = -690.0;
  const double f_min = f_of_tau(std::exp(x_min));
  return [f_of_tau, norm, f_min](double x) {
    if (x >= x_min) return f_of_tau(std::exp(x));
    const double shift = norm.gamma_exp * (std::sqrt(-2.0 * x) - std::sqrt(-2.0 * x_min));
    return f_min * std::exp(-shift) * std::pow(x / x_min, -norm.m);
  };
}

}  // namespace

double resolvent_T0_at(const std::function<double(double)>& f, const LogNorm& norm, const TimeWindow& w,
                       double tau) {
  norm.validate();
  w.validate();
  if (!(tau > 0.0 && tau <= w.tau_max()))
    throw DomainError("resolvent_T0: tau = " + fmt(tau) + " outside (0, T + epsT]");
  const double v = v_of(tau), fv = f(tau);
  if (!std::isfinite(fv)) throw DomainError("resolvent_T0: non-finite f at tau = " + fmt(tau));
  const Fn fl = log_form(f, norm);
  const double J = norm.gamma_exp == 1.0 ? resolvent_piece(fl, v_of(w.tau_max()), v) : -resolvent_tail(fl, v);
  return std::exp(-v) / v * J - fv / v;
}

namespace {

// Below the first node: g = e^{-v} J(v) / v - f / v with J(v) = J0 + int_{v0}^{v} e^w f.
class ResolventTail : public RateFunction::TailModel {
 public:
  ResolventTail(RateFunction f, double v0, double J0) : f_(std::move(f)), v0_(v0), J0_(J0) {}

  double value(double tau) const override {
    const double v = v_of(tau);
    return std::exp(-v) * J(v) / v - f_.at_tau(tau) / v;
  }
  double slope(double tau) const override {
    const double v = v_of(tau), g = value(tau);
    return (g / tau - f_.dp_dtau(tau)) / v + g / (v * v * tau);
  }
  double integral(double tau, bool over_tau) const override {
    const double v = v_of(tau);
    if (over_tau) return G(v);
    // int_0^tau g = tau G(tau) - int_0^tau G
    const double scale = std::abs(G(v)) * tau;
    // the integrand is below 1e-290 of its scale past w = 37
    const double inner = v < 37.0 ? quad([this](double w) { return G(w) * std::exp(-0.5 * w * w) * w; }, v, 37.0,
                                         scaled_spec(scale, 1e-10))
                                  : 0.0;
    return tau * G(v) - inner;
  }

 private:
  RateFunction f_;
  double v0_, J0_;
  double J(double v) const { return J0_ + resolvent_piece([this](double x) { return f_.at_log_tau(x); }, v0_, v); }
  double G(double v) const { return std::exp(-v) * J(v); }
};

}  // namespace

RateFunction resolvent_T0(const RateFunction& fr, const LogNorm& norm) {
  norm.validate();
  const auto& w = fr.window();
  const auto& tau = fr.taus();
  const Fn f = [&fr](double x) { return fr.at_log_tau(x); };
  const std::size_t n = tau.size();
  std::vector<double> v(n), fv(fr.values()), J(n, 0.0), g(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = v_of(tau[i]);
  if (norm.gamma_exp == 1.0) {
    // J(v) = int_{v(tau_max)}^{v}, nodes ascend in tau so v descends
    J[n - 1] = resolvent_piece(f, v_of(w.tau_max()), v[n - 1]);
    for (std::size_t i = n - 1; i-- > 0;) J[i] = J[i + 1] + resolvent_piece(f, v[i + 1], v[i]);
  } else {
    J[0] = -resolvent_tail(f, v[0]);
    for (std::size_t i = 1; i < n; ++i) J[i] = J[i - 1] - resolvent_piece(f, v[i], v[i - 1]);
  }
  for (std::size_t i = 0; i < n; ++i) g[i] = std::exp(-v[i]) / v[i] * J[i] - fv[i] / v[i];
  auto tail = std::make_shared<const ResolventTail>(fr, v[0], J[0]);
  return RateFunction(w, tau, std::move(g), tail);
}

double A_sigma(const RateFunction& p1, double t, double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0)) throw DomainError("A_sigma: sigma = " + fmt(sigma) + " must be in (0, 1)");
  const auto& w = p1.window();
  const auto s = local_scales(w, tau_checked(p1, t, -w.epsT, "A_sigma"), sigma, "A_sigma");
  const double pt = p1.at_tau(s.tau);
  const auto spec = scaled_spec(std::abs(pt));
  const double t1 = -quad([&](double x) { return p1.at_tau(std::exp(x)) - pt; }, std::log(s.tau),
                          std::log((1.0 + s.N) * s.tau), spec);
  const double t2 = -log_integral([&](double d) { return pt - p1.at_tau(s.tau + d); }, s.inner, s.N * s.tau, s.tau, spec);
  const double t3 = pt + p1.lambda_sq_tau(s.tau) / (2.0 * s.tau);
  return t1 + t2 + t3;
}

double B1_op(const RateFunction& p1, const RateFunction& p_star, double t) {
  const auto& w = p1.window();
  const auto s = local_scales(w, tau_checked(p1, t, -w.epsT, "B1_op"), 0.5, "B1_op");
  const double lam2s = p_star.lambda_sq_tau(s.tau), lam2_1 = p1.lambda_sq_tau(s.tau);
  const double lam2 = lam2s + lam2_1, X = lam2_1 / lam2s;
  if (!(X > -1.0)) throw DomainError("B1_op: X = " + fmt(X) + " must be > -1");
  if (!(lam2 < w.tau_max() - s.tau) || !(lam2s < w.tau_max() - s.tau))
    throw DomainError("B1_op: lambda^2 reaches beyond t + epsT");
  const double ps = p_star.at_tau(s.tau), q = p1.at_tau(s.tau);
  const auto spec = scaled_spec(std::abs(ps));
  const double Y = -lam2_1 / (2.0 * s.tau * ps);
  const double b1 = log_integral([&](double d) { return p1.at_tau(s.tau + d); }, lam2, lam2s, s.tau, spec);
  const double b2 = -ps * (std::log1p(X) - X);
  const double b3 = -ps * (X - Y);
  const double b4 = -std::log1p(1.0 / s.N) * q;
  const double b5 = s.tau * quad([&](double x) { return p1.at_tau(std::exp(x)) / (std::exp(x) - s.tau); },
                                 std::log((1.0 + s.N) * s.tau), std::log(w.tau_max()), spec);
  const double c_star = RateConstants::standard().c_star;
  const double b6 = -std::log(lam2s / (c_star * s.tau * std::exp(-s.v))) * q;
  return b1 + b2 + b3 + b4 + b5 + b6;
}

double sigma_remainder(const RateFunction& p, const RateFunction& p_star, double t, double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0))
    throw DomainError("sigma_remainder: sigma = " + fmt(sigma) + " must be in (0, 1)");
  const auto& w = p.window();
  const double tau = tau_checked(p, t, -w.epsT, "sigma_remainder");
  const double inner = tau * std::exp(-sigma * v_of(tau)), lam2s = p_star.lambda_sq_tau(tau);
  const double pt = p.at_tau(tau);
  return log_integral([&](double d) { return pt - p.at_tau(tau + d); }, lam2s, inner, tau, scaled_spec(std::abs(pt)));
}

double star_log_remainder(const RateFunction& p1, const RateFunction& p_star, double t) {
  const auto& w = p1.window();
  const double tau = tau_checked(p1, t, -w.epsT, "star_log_remainder");
  const double lam2s = p_star.lambda_sq_tau(tau), lam2 = lam2s + p1.lambda_sq_tau(tau);
  if (!(lam2 > 0.0)) throw DomainError("star_log_remainder: lambda^2 = " + fmt(lam2) + " must be > 0");
  const double ps = p_star.at_tau(tau);
  return -log_integral([&](double d) { return p_star.at_tau(tau + d) - ps; }, lam2, lam2s, tau,
                       scaled_spec(std::abs(ps)));
}

double ode_lhs(const RateFunction& p, double t) {
  const double tau = tau_checked(p, t, -p.window().epsT, "ode_lhs");
  return p.int_p_over_tau(tau) - v_of(tau) * p.at_tau(tau);
}

namespace {

std::vector<ResidualSample> residual_profile(const RateSolveOptions& opt, const RateFunction& ps,
                                             const RateFunction& p1, const RateFunction* p2) {
  const auto& w = opt.window;
  const RateFunction sum1 = ps + p1;
  std::optional<RateFunction> sum2;
  if (p2) sum2 = sum1 + *p2;
  std::vector<ResidualSample> out;
  const double a = std::log(opt.profile_lo * w.T), b = std::log(opt.profile_hi * w.T);
  const std::size_t n = std::max<std::size_t>(opt.profile_points, 2);
  for (std::size_t i = 0; i < n; ++i) {
    ResidualSample r;
    r.tau = std::exp(b + (a - b) * static_cast<double>(i) / (n - 1));
    r.t = w.T - r.tau;
    r.R_pstar = residual_tau(ps, r.tau, {1e-300, 1e-11, 4000});
    r.R_p1 = residual_tau(sum1, r.tau, {1e-300, 1e-11, 4000});
    r.R_p2 = sum2 ? residual_tau(*sum2, r.tau, {1e-300, 1e-11, 4000}) : r.R_p1;
    const double L = log_abs(r.tau);
    r.weighted = std::abs(r.R_p2) * std::pow(L, 0.25) * std::exp(std::sqrt(2.0 * L));
    if (!std::isfinite(r.R_pstar) || !std::isfinite(r.R_p1) || !std::isfinite(r.R_p2))
      throw SolveError("rate: non-finite residual at T - t = " + fmt(r.tau));
    out.push_back(r);
  }
  return out;
}

double weighted_sup(const std::vector<ResidualSample>& prof, double ResidualSample::*field) {
  double v = 0.0;
  for (const auto& r : prof) {
    const double L = log_abs(r.tau);
    v = std::max(v, std::abs(r.*field) * std::pow(L, 0.25) * std::exp(std::sqrt(2.0 * L)));
  }
  return v;
}

}  // namespace

RateSolveReport picard_solve_p1(const RateSolveOptions& opt) {
  const auto& w = opt.window;
  w.validate();
  if (!(opt.sigma > 0.0 && opt.sigma < 0.5))
    throw DomainError("picard_solve_p1: sigma = " + fmt(opt.sigma) + " must be in (0, 1/2)");
  if (opt.max_iters < 1) throw DomainError("picard_solve_p1: max_iters must be >= 1");
  if (!(opt.tol > 0.0)) throw DomainError("picard_solve_p1: tol must be > 0");
  const auto tau = RateFunction::default_nodes(w, opt.nodes, opt.tau_min_factor);
  const std::size_t n = tau.size();
  const RateFunction ps = RateFunction::star(w, opt.nodes, opt.tau_min_factor);
  const LogNorm hnorm{1.0, 0.25};
  const TailShape htail{1.0, 0.25};

  std::vector<double> eta(n), fs(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = w.T - tau[i];
    eta[i] = eta_cutoff(t / w.T);
    if (eta[i] > 0.0 && !opt.zero_forcing) fs[i] = f_star(t, ps);
  }
  std::vector<double> h(n);
  for (std::size_t i = 0; i < n; ++i) h[i] = eta[i] * fs[i];

  RateSolveReport rep{ps, RateFunction(w, tau, h, htail), RateFunction(w, tau, std::vector<double>(n, 0.0)),
                      std::nullopt, {}, {}, {}, 0, false};
  auto solve_p1 = [&](const RateFunction& hf) { return resolvent_T0(hf, hnorm); };
  int growth = 0;
  for (int k = 0; k < opt.max_iters; ++k) {
    const RateFunction p1 = solve_p1(rep.h);
    std::vector<double> next(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      if (eta[i] == 0.0) continue;
      const double t = w.T - tau[i];
      next[i] = eta[i] * (fs[i] + A_sigma(p1, t, opt.sigma) + B1_op(p1, ps, t));
      if (!std::isfinite(next[i])) throw SolveError("picard_solve_p1: non-finite iterate at T - t = " + fmt(tau[i]));
    }
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i) d = std::max(d, hnorm.weight(tau[i]) * std::abs(next[i] - rep.h.values()[i]));
    rep.h = RateFunction(w, tau, std::move(next), htail);
    rep.distances.push_back(d);
    rep.iterations = k + 1;
    if (d < opt.tol) {
      rep.converged = true;
      break;
    }
    const std::size_t m = rep.distances.size();
    growth = (m >= 2 && rep.distances[m - 1] > rep.distances[m - 2]) ? growth + 1 : 0;
    if (growth >= 3) {
      std::string hist;
      for (double x : rep.distances) hist += " " + fmt(x);
      throw SolveError("picard_solve_p1: iterates diverge, distances:" + hist);
    }
  }
  rep.p1 = solve_p1(rep.h);

  auto& c = rep.fitted_norm_constants;
  c["f_star_1_0.25"] = tail_of(fs, tau, hnorm);
  c["h_1_0.25"] = hnorm.of(rep.h, tau);
  c["p1_1_0.25"] = hnorm.of(rep.p1, tau);
  double ratio = 0.0;
  for (std::size_t k = 2; k < rep.distances.size(); ++k)
    if (rep.distances[k - 1] > 0.0) ratio = std::max(ratio, rep.distances[k] / rep.distances[k - 1]);
  c["contraction_ratio"] = ratio;
  rep.residual_profile = residual_profile(opt, ps, rep.p1, nullptr);
  c["residual_pstar"] = weighted_sup(rep.residual_profile, &ResidualSample::R_pstar);
  c["residual_p1"] = weighted_sup(rep.residual_profile, &ResidualSample::R_p1);
  return rep;
}

RateFunction second_correction_p2(const RateFunction& p1, const RateFunction& p_star, double sigma) {
  if (!(sigma > 0.0 && sigma < 1.0))
    throw DomainError("second_correction_p2: sigma = " + fmt(sigma) + " must be in (0, 1)");
  const auto& w = p1.window();
  const auto& tau = p1.taus();
  std::vector<double> rhs(tau.size(), 0.0);
  for (std::size_t i = 0; i < tau.size(); ++i) {
    const double t = w.T - tau[i], e = eta_cutoff(t / w.T);
    if (e > 0.0) rhs[i] = -e * sigma_remainder(p1, p_star, t, sigma);
  }
  const RateFunction r(w, tau, std::move(rhs), TailShape{1.0 + sigma, 0.25});
  return resolvent_T0(r, LogNorm{1.0 + sigma, 0.25});
}

RateSolveReport solve_rate(const RateSolveOptions& opt) {
  RateSolveReport rep = picard_solve_p1(opt);
  if (!opt.second_correction) return rep;
  rep.p2 = second_correction_p2(rep.p1, rep.p_star, opt.sigma);
  rep.residual_profile = residual_profile(opt, rep.p_star, rep.p1, &*rep.p2);
  rep.fitted_norm_constants["p2_1+sigma_0.75"] =
      LogNorm{1.0 + opt.sigma, 0.75}.of(*rep.p2, rep.p1.taus());
  rep.fitted_norm_constants["residual_p2"] = weighted_sup(rep.residual_profile, &ResidualSample::R_p2);
  return rep;
}

}  // namespace ksb
