#include "ksblow/philambda.hpp"

#include <algorithm>
#include <cmath>
// pchip.hpp in Boost 1.74 calls isnan unqualified
using std::isnan;
#include <boost/math/interpolators/pchip.hpp>
#include <map>
#include <mutex>
#include <sstream>

#include "ksblow/errors.hpp"
#include "ksblow/specialfn.hpp"

namespace ksb {

namespace {

constexpr double kSqrt2 = 1.41421356237309504880;

double shape(double tau) { return std::exp(-std::sqrt(2.0 * std::abs(std::log(tau)))); }

double tail_shape(double tau, const TailShape& s) {
  const double L = std::abs(std::log(tau));
  return std::exp(-s.gamma_exp * std::sqrt(2.0 * L)) * std::pow(L, -s.m);
}

// 1 - e^{-x}(1 + x)
double heat_F(double x) {
  if (x < 1e-2) return x * x * (0.5 - x * (1.0 / 3.0 - x * (1.0 / 8.0 - x / 30.0)));
  return -std::expm1(-x) - x * std::exp(-x);
}

double beta_cached(const Cutoff& c) {
  static std::mutex m;
  static std::map<int, double> cache;
  std::lock_guard<std::mutex> lock(m);
  const int key = static_cast<int>(c.kind());
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  const double b = beta_const(c);
  cache.emplace(key, b);
  return b;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> TimeWindow::violations() const {
  std::vector<std::string> out;
  if (!(T > 0.0)) out.push_back("T = " + fmt(T) + " must be > 0");
  if (!(epsT > 0.0)) out.push_back("epsT = " + fmt(epsT) + " must be > 0");
  if (!(delta > 0.0)) out.push_back("delta = " + fmt(delta) + " must be > 0");
  if (!out.empty()) return out;
  if (!(T < epsT)) out.push_back("T = " + fmt(T) + " must be < epsT = " + fmt(epsT));
  if (!(epsT < 1.0)) out.push_back("epsT = " + fmt(epsT) + " must be < 1");
  if (out.empty()) {
    const double lt = std::abs(std::log(T)), le = std::abs(std::log(epsT));
    const double lhs = std::exp(-2.0 * kSqrt2 * std::sqrt(lt)) * std::sqrt(lt) / T;
    const double rhs = std::exp(-kSqrt2 * std::sqrt(le)) / epsT;
    if (!(lhs >= rhs))
      out.push_back("T = " + fmt(T) + ", epsT = " + fmt(epsT) +
                    " violate e^{-4a sqrt|ln T|} sqrt|ln T| / T >= e^{-2a sqrt|ln epsT|} / epsT (" +
                    fmt(lhs) + " < " + fmt(rhs) + ")");
  }
  return out;
}

void TimeWindow::validate() const {
  const auto v = violations();
  if (v.empty()) return;
  std::string msg = "invalid time window:";
  for (const auto& s : v) msg += " " + s + ";";
  throw DomainError(msg);
}

struct RateFunction::Interp {
  boost::math::interpolators::pchip<std::vector<double>> f;
  Interp(std::vector<double> x, std::vector<double> y) : f(std::move(x), std::move(y)) {}
};

namespace {

class ShapeTail : public RateFunction::TailModel {
 public:
  explicit ShapeTail(TailShape s) : s_(s) {}
  double value(double tau) const override { return tail_shape(tau, s_); }
  double value_log(double x) const override {
    const double L = std::abs(x);
    return std::exp(-s_.gamma_exp * std::sqrt(2.0 * L)) * std::pow(L, -s_.m);
  }
  double slope(double tau) const override {
    const double L = std::abs(std::log(tau));
    return tail_shape(tau, s_) * (s_.gamma_exp / std::sqrt(2.0 * L) + s_.m / L) / tau;
  }
  // in v = sqrt(2|ln s|)
  double integral(double tau, bool over_tau) const override {
    const double u = std::sqrt(2.0 * std::abs(std::log(tau)));
    const double g = s_.gamma_exp, m = s_.m;
    const double ref = std::exp(-g * u) * std::pow(0.5 * u * u, -m) * u * (over_tau ? 1.0 : std::exp(-0.5 * u * u));
    Fn f = over_tau ? Fn([g, m](double x) { return std::exp(-g * x) * std::pow(0.5 * x * x, -m) * x; })
                    : Fn([g, m](double x) { return std::exp(-g * x - 0.5 * x * x) * std::pow(0.5 * x * x, -m) * x; });
    return quad_to_inf(f, u, {std::max(1e-300, 1e-17 * ref), 1e-11, 2000});
  }

 private:
  TailShape s_;
};

}  // namespace

RateFunction::RateFunction(TimeWindow w, std::vector<double> tau_nodes, std::vector<double> p_values,
                           TailShape tail)
    : window_(w), tau_(std::move(tau_nodes)), p_(std::move(p_values)) {
  if (!(tail.gamma_exp > 0.0) || !std::isfinite(tail.m)) throw DomainError("RateFunction: tail needs gamma_exp > 0");
  if (!tau_.empty() && !p_.empty() && tau_[0] > 0.0 && tau_[0] < 1.0)
    tail_.push_back({p_[0] / tail_shape(tau_[0], tail), std::make_shared<const ShapeTail>(tail)});
  build();
}

RateFunction::RateFunction(TimeWindow w, std::vector<double> tau_nodes, std::vector<double> p_values,
                           std::shared_ptr<const TailModel> tail)
    : window_(w), tau_(std::move(tau_nodes)), p_(std::move(p_values)) {
  if (!tail) throw DomainError("RateFunction: null tail model");
  tail_.push_back({1.0, std::move(tail)});
  build();
}

RateFunction::RateFunction(TimeWindow w, std::vector<double> tau_nodes, std::vector<double> p_values,
                           std::vector<TailTerm> tail)
    : window_(w), tau_(std::move(tau_nodes)), p_(std::move(p_values)), tail_(std::move(tail)) {
  build();
}

void RateFunction::build() {
  window_.validate();
  const std::size_t n = tau_.size();
  if (n < 4 || p_.size() != n) throw DomainError("RateFunction: need >= 4 nodes and matching values");
  for (std::size_t i = 0; i < n; ++i) {
    if (!(tau_[i] > 0.0) || (i > 0 && !(tau_[i] > tau_[i - 1])))
      throw DomainError("RateFunction: tau nodes must be positive and strictly increasing");
    if (!std::isfinite(p_[i])) throw DomainError("RateFunction: non-finite value at tau = " + fmt(tau_[i]));
  }
  if (!(tau_[0] < 1.0)) throw DomainError("RateFunction: first node must be < 1");
  if (tau_.back() < window_.tau_max() * (1.0 - 1e-12))
    throw DomainError("RateFunction: nodes must reach T + epsT");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = std::log(tau_[i]);
  interp_ = std::make_shared<const Interp>(std::move(x), std::vector<double>(p_));
  for (double v : p_) p_scale_ = std::max(p_scale_, std::abs(v));

  cum_p_.assign(n, 0.0);
  cum_p_over_tau_.assign(n, 0.0);
  cum_p_[0] = tail_integral(tau_[0], false);
  cum_p_over_tau_[0] = tail_integral(tau_[0], true);
  for (std::size_t i = 1; i < n; ++i) {
    cum_p_[i] = cum_p_[i - 1] + piece_integral(tau_[i - 1], tau_[i], false);
    cum_p_over_tau_[i] = cum_p_over_tau_[i - 1] + piece_integral(tau_[i - 1], tau_[i], true);
  }
}

double RateFunction::tail_value(double tau) const {
  double v = 0.0;
  for (const auto& k : tail_)
    if (k.amp != 0.0) v += k.amp * k.model->value(tau);
  return v;
}

double RateFunction::at_log_tau(double x) const {
  if (x >= std::log(tau_[0])) return at_tau(std::exp(x));
  double v = 0.0;
  for (const auto& k : tail_)
    if (k.amp != 0.0) v += k.amp * k.model->value_log(x);
  return v;
}

double RateFunction::tail_slope(double tau) const {
  double v = 0.0;
  for (const auto& k : tail_)
    if (k.amp != 0.0) v += k.amp * k.model->slope(tau);
  return v;
}

double RateFunction::tail_integral(double tau, bool over_tau) const {
  double v = 0.0;
  for (const auto& k : tail_)
    if (k.amp != 0.0) v += k.amp * k.model->integral(tau, over_tau);
  return v;
}

std::vector<double> RateFunction::default_nodes(const TimeWindow& w, std::size_t n, double tau_min_factor) {
  w.validate();
  if (n < 4) throw DomainError("RateFunction: need >= 4 nodes");
  const double a = std::log(tau_min_factor * w.T), b = std::log(w.tau_max());
  std::vector<double> tau(n);
  for (std::size_t i = 0; i < n; ++i) tau[i] = std::exp(a + (b - a) * static_cast<double>(i) / (n - 1));
  tau.back() = w.tau_max();
  return tau;
}

RateFunction RateFunction::sample(const TimeWindow& w, const std::vector<double>& tau_nodes,
                                  const std::function<double(double)>& p_of_tau, TailShape tail) {
  std::vector<double> p(tau_nodes.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = p_of_tau(tau_nodes[i]);
  return RateFunction(w, tau_nodes, std::move(p), tail);
}

RateFunction RateFunction::sample(const TimeWindow& w, const std::function<double(double)>& p_of_tau,
                                  std::size_t n, double tau_min_factor) {
  return sample(w, default_nodes(w, n, tau_min_factor), p_of_tau);
}

RateFunction RateFunction::star(const TimeWindow& w, std::size_t n, double tau_min_factor) {
  // p_star_tau rejects tau >= 1; the formula itself is used on the whole window.
  const double c = RateConstants::standard().c_star;
  return sample(w, [c](double tau) { return -0.5 * c * shape(tau); }, n, tau_min_factor);
}

double RateFunction::at_tau(double tau) const {
  if (tau <= 0.0) return 0.0;
  if (tau < tau_[0]) return tail_value(tau);
  if (tau > tau_.back()) {
    if (tau > tau_.back() * (1.0 + 1e-10)) throw DomainError("RateFunction: tau = " + fmt(tau) + " beyond T + epsT");
    tau = tau_.back();
  }
  return interp_->f(std::log(tau));
}

double RateFunction::dp_dtau(double tau) const {
  if (!(tau > 0.0)) throw DomainError("RateFunction: derivative needs tau > 0");
  if (tau < tau_[0]) return tail_slope(tau);
  tau = std::min(tau, tau_.back());
  return interp_->f.prime(std::log(tau)) / tau;
}

double RateFunction::piece_integral(double lo, double hi, bool over_tau) const {
  if (hi <= lo) return 0.0;
  const auto& f = interp_->f;
  Fn g = over_tau ? Fn([&f](double x) { return f(x); }) : Fn([&f](double x) { return f(x) * std::exp(x); });
  const double scale = p_scale_ * (over_tau ? 1.0 : hi);
  return quad(g, std::log(lo), std::log(hi), {std::max(1e-300, 1e-16 * scale), 1e-13, 200});
}

double RateFunction::lambda_sq_tau(double tau) const {
  if (tau <= 0.0) return 0.0;
  if (tau > tau_.back() * (1.0 + 1e-10)) throw DomainError("RateFunction: tau = " + fmt(tau) + " beyond T + epsT");
  if (tau < tau_[0]) return -2.0 * tail_integral(tau, false);
  const auto it = std::upper_bound(tau_.begin(), tau_.end(), tau);
  const std::size_t k = static_cast<std::size_t>(it - tau_.begin()) - 1;
  return -2.0 * (cum_p_[k] + piece_integral(tau_[k], std::min(tau, tau_.back()), false));
}

double RateFunction::int_p_over_tau(double tau) const {
  if (tau <= 0.0) return 0.0;
  if (tau > tau_.back() * (1.0 + 1e-10)) throw DomainError("RateFunction: tau = " + fmt(tau) + " beyond T + epsT");
  if (tau < tau_[0]) return tail_integral(tau, true);
  const auto it = std::upper_bound(tau_.begin(), tau_.end(), tau);
  const std::size_t k = static_cast<std::size_t>(it - tau_.begin()) - 1;
  return cum_p_over_tau_[k] + piece_integral(tau_[k], std::min(tau, tau_.back()), true);
}

RateFunction RateFunction::operator+(const RateFunction& o) const {
  if (o.tau_ != tau_ || o.window_.T != window_.T || o.window_.epsT != window_.epsT)
    throw DomainError("RateFunction: sum needs identical nodes and window");
  std::vector<double> p(p_.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = p_[i] + o.p_[i];
  auto tail = tail_;
  tail.insert(tail.end(), o.tail_.begin(), o.tail_.end());
  return RateFunction(window_, tau_, std::move(p), std::move(tail));
}

RateFunction RateFunction::scaled(double c) const {
  std::vector<double> p(p_);
  for (double& v : p) v *= c;
  auto tail = tail_;
  for (auto& k : tail) k.amp *= c;
  return RateFunction(window_, tau_, std::move(p), std::move(tail));
}

namespace {

struct Frame {
  double tau, lam2, lam, p, sq;
};

Frame frame_at(const RateFunction& rate, double t) {
  const auto& w = rate.window();
  if (!(t > -w.epsT && t < w.T))
    throw DomainError("eval_E: t = " + fmt(t) + " outside (-epsT, T) = (" + fmt(-w.epsT) + ", " + fmt(w.T) + ")");
  Frame f;
  f.tau = w.T - t;
  f.lam2 = rate.lambda_sq_tau(f.tau);
  if (!(f.lam2 > 0.0)) throw DomainError("eval_E: lambda^2 = " + fmt(f.lam2) + " must be > 0");
  f.lam = std::sqrt(f.lam2);
  f.p = rate.at_tau(f.tau);
  f.sq = std::sqrt(w.delta * f.tau);
  return f;
}

// int_{Y1}^{Y2} U(y) chi(lam y / sq) y dy
double inner_mass_piece(double y1, double y2, const Frame& f, const Cutoff& c) {
  if (y2 <= y1) return 0.0;
  return quad([&](double y) { return bubble_U(y) * c(f.lam * y / f.sq) * y; }, y1, y2, {1e-15, 1e-12, 200});
}

double E_terms(double r, const Frame& f, const Cutoff& c, SourceParts parts, double enclosed) {
  const double y = r / f.lam, w = r / f.sq;
  double e = 0.0;
  if (parts != SourceParts::commutator_only) e += f.p / (f.lam2 * f.lam2) * Z0(y) * c(w);
  if (parts != SourceParts::kernel_only && w > 1.0 && w < 2.0) {
    const double c1 = c.d1(w), c2 = c.d2(w);
    const double U = bubble_U(y);
    const double vr = -enclosed / r;
    e += -U * c1 * w / (2.0 * f.lam2 * f.tau);
    e += 2.0 * c1 * bubble_U_prime(y) / (f.lam2 * f.lam * f.sq);
    e += (c2 + c1 / w) * U / (f.sq * f.sq * f.lam2);
    e += -U * c1 * vr / (f.lam2 * f.sq);
  }
  return e;
}

}  // namespace

double eval_E(double r, double t, const RateFunction& rate, const Cutoff& cutoff, SourceParts parts) {
  if (!(r >= 0.0)) throw DomainError("eval_E: r = " + fmt(r) + " must be >= 0");
  const Frame f = frame_at(rate, t);
  double enclosed = 0.0;
  if (r > f.sq && r < 2.0 * f.sq) {
    const double y1 = f.sq / f.lam;
    enclosed = 4.0 * y1 * y1 / (1.0 + y1 * y1) + inner_mass_piece(y1, r / f.lam, f, cutoff);
  }
  return E_terms(r, f, cutoff, parts, enclosed);
}

std::vector<double> eval_E_profile(const RadialGrid& g, double t, const RateFunction& rate, const Cutoff& cutoff,
                                   SourceParts parts) {
  const Frame f = frame_at(rate, t);
  std::vector<double> out(g.size());
  const double y1 = f.sq / f.lam;
  double enclosed = 4.0 * y1 * y1 / (1.0 + y1 * y1);
  double ylast = y1;
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double r = g.r(i);
    if (r > f.sq && r < 2.0 * f.sq) {
      const double y = r / f.lam;
      enclosed += inner_mass_piece(ylast, y, f, cutoff);
      ylast = y;
    }
    out[i] = E_terms(r, f, cutoff, parts, enclosed);
  }
  return out;
}

RadialField implicit_heat6_step(const RadialField& state, double dt, const std::vector<double>& source) {
  if (!(dt > 0.0)) throw DomainError("step_phi_lambda: dt = " + fmt(dt) + " must be > 0");
  const auto& g = *state.grid;
  const std::size_t n = g.size();
  if (n < 3) throw DomainError("step_phi_lambda: need >= 3 nodes");
  if (source.size() != n) throw DomainError("step_phi_lambda: source size mismatch");
  const auto& fc = g.faces();
  // control volume [f_{i-1}, f_i] with weight r^5, f_{-1} = 0 and f_{n-1} = R
  std::vector<double> sub(n, 0.0), diag(n, 0.0), sup(n, 0.0), rhs(n);
  auto face = [&](std::size_t i) { return i + 1 < n ? fc[i] : g.outer(); };
  double prev6 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double f6 = std::pow(face(i), 6);
    const double vol = (f6 - prev6) / 6.0;
    prev6 = f6;
    double left = 0.0, right = 0.0;
    if (i > 0) left = std::pow(fc[i - 1], 5) / (g.r(i) - g.r(i - 1));
    if (i + 1 < n) right = std::pow(fc[i], 5) / (g.r(i + 1) - g.r(i));
    const double k = dt / vol;
    sub[i] = -k * left;
    sup[i] = -k * right;
    diag[i] = 1.0 + k * (left + right);
    rhs[i] = state[i] + dt * source[i];
  }
  // Thomas algorithm
  for (std::size_t i = 1; i < n; ++i) {
    if (diag[i - 1] == 0.0 || !std::isfinite(diag[i - 1]))
      throw SolveError("step_phi_lambda: singular tridiagonal pivot at row " + std::to_string(i - 1));
    const double m = sub[i] / diag[i - 1];
    diag[i] -= m * sup[i - 1];
    rhs[i] -= m * rhs[i - 1];
  }
  if (diag[n - 1] == 0.0 || !std::isfinite(diag[n - 1]))
    throw SolveError("step_phi_lambda: singular tridiagonal pivot at last row");
  std::vector<double> x(n);
  x[n - 1] = rhs[n - 1] / diag[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) x[i] = (rhs[i] - sup[i] * x[i + 1]) / diag[i];
  for (double v : x)
    if (!std::isfinite(v)) throw SolveError("step_phi_lambda: non-finite solution");
  return RadialField(state.grid, std::move(x));
}

RadialField step_phi_lambda(const RadialField& state, double t, double dt, const RateFunction& rate,
                            const Cutoff& cutoff, SourceParts parts) {
  if (!(dt > 0.0)) throw DomainError("step_phi_lambda: dt = " + fmt(dt) + " must be > 0");
  return implicit_heat6_step(state, dt, eval_E_profile(*state.grid, t + dt, rate, cutoff, parts));
}

std::vector<PhiCheckpoint> run_phi_lambda(const RateFunction& rate, std::vector<double> taus,
                                          const PhiRunOptions& opt, const Cutoff& cutoff) {
  const auto& w = rate.window();
  if (taus.empty()) throw DomainError("run_phi_lambda: no checkpoints");
  std::sort(taus.begin(), taus.end(), std::greater<>());
  for (double tau : taus)
    if (!(tau > 0.0 && tau < w.tau_max())) throw DomainError("run_phi_lambda: checkpoint tau = " + fmt(tau) + " outside (0, T + epsT)");
  if (!(opt.dt_fraction > 0.0 && opt.dt_fraction <= 0.2))
    throw DomainError("run_phi_lambda: dt_fraction = " + fmt(opt.dt_fraction) + " must be in (0, 0.2]");
  const double lam_min = std::sqrt(rate.lambda_sq_tau(taus.back()));
  const double R = opt.outer_radius_factor * std::sqrt(w.tau_max());
  auto grid = std::make_shared<const RadialGrid>(RadialGrid::geometric(opt.nodes, R, opt.resolution_factor * lam_min));
  RadialField phi(grid, std::vector<double>(grid->size(), 0.0));

  std::vector<PhiCheckpoint> out;
  double t = -w.epsT;
  int steps = 0;
  for (double tau_c : taus) {
    const double tc = w.T - tau_c;
    while (t < tc) {
      double dt = opt.dt_fraction * (w.T - t);
      if (t + 1.25 * dt >= tc) dt = tc - t;
      phi = step_phi_lambda(phi, t, dt, rate, cutoff, opt.parts);
      t = (dt == tc - t) ? tc : t + dt;
      ++steps;
    }
    PhiCheckpoint c;
    c.t = t;
    c.tau = tau_c;
    c.mass = integrate_2d(phi);
    c.lambda = std::sqrt(rate.lambda_sq_tau(tau_c));
    c.center = phi[0];
    const double u = std::sqrt(2.0 * std::abs(std::log(tau_c)));
    for (std::size_t i = 0; i < grid->size() && grid->r(i) <= std::sqrt(tau_c); ++i) {
      const double r = grid->r(i);
      c.weighted_sup = std::max(c.weighted_sup, std::abs(phi[i]) * (c.lambda * c.lambda + r * r) * std::exp(u));
    }
    c.steps = steps;
    out.push_back(c);
  }
  return out;
}

namespace {

// int_0^{zc2} F(k z^2) Z0(z) chi(z / zc1) z dz
double kernel_inner(double k, double zc1, const Cutoff& c) {
  std::vector<double> pts{0.0, 2.0 * zc1};
  for (double b : {1.0, 1.0 / std::sqrt(k), zc1})
    if (b > 0.0 && b < 2.0 * zc1) pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  return quad([&](double z) { return heat_F(k * z * z) * Z0(z) * c(z / zc1) * z; }, pts, {1e-15, 1e-10, 2000});
}

void check_checkpoint_time(const RateFunction& rate, double t, const char* who) {
  const auto& w = rate.window();
  if (!(t > -w.T / 2.0 && t < w.T))
    throw DomainError(std::string(who) + ": t = " + fmt(t) + " outside (-T/2, T)");
}

}  // namespace

double mass_phi1_duhamel(const RateFunction& rate, double t, const Cutoff& cutoff, const QuadratureSpec& spec) {
  const auto& w = rate.window();
  if (t == -w.epsT || rate.is_zero()) return 0.0;
  check_checkpoint_time(rate, t, "mass_phi1_duhamel");
  const double tau = w.T - t;
  const double lam2t = rate.lambda_sq_tau(tau);
  // integrand in sigma = ln(t - s)
  auto g = [&](double sigma) {
    const double d = std::exp(sigma);
    const double tau_s = tau + d;
    const double l2 = rate.lambda_sq_tau(tau_s);
    const double ps = rate.at_tau(tau_s);
    if (ps == 0.0) return 0.0;
    const double zc1 = std::sqrt(w.delta * tau_s / l2);
    return 2.0 * kPi * ps / l2 * kernel_inner(l2 / (4.0 * d), zc1, cutoff) * d;
  };
  const double lo = std::log(1e-3 * lam2t), hi = std::log(t + w.epsT);
  std::vector<double> pts{lo, std::log(lam2t), std::log(tau), hi};
  std::sort(pts.begin(), pts.end());
  QuadratureSpec s = spec;
  s.abs_tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(rate.at_tau(tau)));
  const double main = quad(g, pts, s);
  // below the cut the integrand is flat in s: rectangle on [t - e^lo, t]
  return main + g(lo);
}

double expansion_rhs(const RateFunction& rate, double t, const QuadratureSpec& spec) {
  check_checkpoint_time(rate, t, "expansion_rhs");
  const auto& w = rate.window();
  if (rate.is_zero()) return 0.0;
  const double tau = w.T - t;
  const double lam2 = rate.lambda_sq_tau(tau);
  if (!(lam2 < t + w.epsT)) throw DomainError("expansion_rhs: lambda^2 = " + fmt(lam2) + " >= t + epsT");
  const double kappa = RateConstants::standard().kappa;
  std::vector<double> pts{std::log(lam2), std::log(t + w.epsT)};
  if (tau > lam2 && tau < t + w.epsT) pts.insert(pts.begin() + 1, std::log(tau));
  QuadratureSpec s = spec;
  s.abs_tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(rate.at_tau(tau)));
  const double memory = quad([&](double sg) { return rate.at_tau(tau + std::exp(sg)); }, pts, s);
  return 4.0 * kPi * (rate.int_p_over_tau(w.tau_max()) - memory + kappa * rate.at_tau(tau));
}

double phi1_expansion_terms(const RateFunction& rate, double t, const Cutoff& cutoff, const QuadratureSpec& spec) {
  check_checkpoint_time(rate, t, "phi1_expansion_terms");
  const auto& w = rate.window();
  if (rate.is_zero()) return 0.0;
  const double tau = w.T - t;
  const double local = expansion_rhs(rate, t, spec) - 4.0 * kPi * rate.int_p_over_tau(w.tau_max());
  // G(K) = int_1^inf F(K z^2) z^{-3} (1 - chi(z)) dz; beyond z = 2 in closed form
  auto G = [&](double K) {
    const double near = quad([&](double z) { return heat_F(K * z * z) * (1.0 - cutoff(z)) / (z * z * z); }, 1.0, 2.0,
                             {1e-300, 1e-11, 200});
    return near - std::expm1(-4.0 * K) / 8.0;
  };
  auto g = [&](double sigma) {
    const double d = std::exp(sigma), tau_s = tau + d;
    return rate.at_tau(tau_s) / tau_s * G(w.delta * tau_s / (4.0 * d)) * d;
  };
  const double lo = std::log(1e-6 * tau), hi = std::log(t + w.epsT);
  QuadratureSpec s = spec;
  s.abs_tol = std::max(spec.abs_tol, spec.rel_tol * std::abs(rate.at_tau(tau)));
  std::vector<double> pts{lo, std::log(tau), hi};
  std::sort(pts.begin(), pts.end());
  const double cut = quad(g, pts, s) + g(lo);
  return local + 32.0 * kPi / w.delta * cut;
}

double cutoff_mass_term(const RateFunction& rate, double t, const Cutoff& cutoff) {
  const auto& w = rate.window();
  const double tau = w.T - t;
  return 16.0 * kPi * beta_cached(cutoff) * rate.lambda_sq_tau(tau) / (w.delta * tau);
}

double mass_at_T_formula(double epsT) {
  if (!(epsT > 0.0 && epsT < 1.0)) throw DomainError("mass_at_T_formula: epsT = " + fmt(epsT) + " must be in (0, 1)");
  const double x = std::sqrt(2.0 * std::abs(std::log(epsT)));
  return 2.0 * kSqrt2 * kPi * std::exp(-(kEulerGamma + 2.0)) * x * std::exp(-x);
}

}  // namespace ksb
