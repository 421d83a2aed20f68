#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ksblow/profiles.hpp"
#include "ksblow/quadrature.hpp"
#include "ksblow/radial.hpp"

namespace ksb {

// Time interval (-epsT, T) and the cutoff scale delta.
struct TimeWindow {
  double T = 1e-4;
  double epsT = 1e-1;
  double delta = 0.1;

  // Human-readable list of violated constraints, empty when valid.
  std::vector<std::string> violations() const;
  void validate() const;
  double tau_max() const { return T + epsT; }
  double tau(double t) const { return T - t; }
};

// Decay below the first node: e^{-gamma sqrt(2|ln tau|)} |ln tau|^{-m}.
struct TailShape {
  double gamma_exp = 1.0;
  double m = 0.0;
};

// p(t) = lambda * lambda'(t) sampled on nodes log-uniform in tau = T - t,
// monotone cubic in ln(tau), continued below the first node with a TailShape.
class RateFunction {
 public:
  // Continuation below the first node.
  class TailModel {
   public:
    virtual ~TailModel() = default;
    virtual double value(double tau) const = 0;
    // value at tau = e^x, for x where e^x underflows
    virtual double value_log(double x) const { return value(std::exp(x)); }
    virtual double slope(double tau) const = 0;
    // int_0^tau, of value / s when over_tau
    virtual double integral(double tau, bool over_tau) const = 0;
  };

  RateFunction(TimeWindow w, std::vector<double> tau_nodes, std::vector<double> p_values, TailShape tail = {});
  RateFunction(TimeWindow w, std::vector<double> tau_nodes, std::vector<double> p_values,
               std::shared_ptr<const TailModel> tail);

  static std::vector<double> default_nodes(const TimeWindow& w, std::size_t n = 400,
                                           double tau_min_factor = 1e-6);
  static RateFunction sample(const TimeWindow& w, const std::function<double(double)>& p_of_tau,
                             std::size_t n = 400, double tau_min_factor = 1e-6);
  static RateFunction sample(const TimeWindow& w, const std::vector<double>& tau_nodes,
                             const std::function<double(double)>& p_of_tau, TailShape tail = {});
  static RateFunction star(const TimeWindow& w, std::size_t n = 400, double tau_min_factor = 1e-6);

  const TimeWindow& window() const { return window_; }
  const std::vector<double>& taus() const { return tau_; }
  const std::vector<double>& values() const { return p_; }

  double at_tau(double tau) const;
  // p at tau = e^x, usable far below the first node
  double at_log_tau(double x) const;
  double operator()(double t) const { return at_tau(window_.tau(t)); }
  // dp/dtau (note dp/dt = -dp/dtau).
  double dp_dtau(double tau) const;

  // -2 int_0^tau p.
  double lambda_sq_tau(double tau) const;
  double lambda_sq(double t) const { return lambda_sq_tau(window_.tau(t)); }
  // int_0^tau p(s) / s ds, i.e. int_t^T p(s) / (T - s) ds.
  double int_p_over_tau(double tau) const;

  bool is_zero() const { return p_scale_ == 0.0; }

  RateFunction operator+(const RateFunction& o) const;
  RateFunction scaled(double c) const;

 private:
  struct Interp;
  struct TailTerm {
    double amp;
    std::shared_ptr<const TailModel> model;
  };
  TimeWindow window_;
  std::vector<double> tau_, p_;
  std::shared_ptr<const Interp> interp_;
  std::vector<double> cum_p_, cum_p_over_tau_;
  std::vector<TailTerm> tail_;
  double p_scale_ = 0.0;

  RateFunction(TimeWindow w, std::vector<double> tau_nodes, std::vector<double> p_values,
               std::vector<TailTerm> tail);
  void build();
  double piece_integral(double tau_lo, double tau_hi, bool over_tau) const;
  double tail_value(double tau) const;
  double tail_slope(double tau) const;
  double tail_integral(double tau, bool over_tau) const;

};

enum class SourceParts { full, kernel_only, commutator_only };

// E(r, t; lambda) for the radial case with alpha = 1.
double eval_E(double r, double t, const RateFunction& rate, const Cutoff& cutoff = Cutoff::quintic(),
              SourceParts parts = SourceParts::full);
std::vector<double> eval_E_profile(const RadialGrid& g, double t, const RateFunction& rate,
                                   const Cutoff& cutoff = Cutoff::quintic(),
                                   SourceParts parts = SourceParts::full);

// Implicit Euler step of phi_t = Delta_6 phi + source with the source given per node.
RadialField implicit_heat6_step(const RadialField& state, double dt, const std::vector<double>& source);

// One implicit Euler step of phi_t = phi_rr + (5/r) phi_r + E(t + dt) on a
// conservative six-dimensional finite-volume discretization, zero outer flux.
RadialField step_phi_lambda(const RadialField& state, double t, double dt, const RateFunction& rate,
                            const Cutoff& cutoff = Cutoff::quintic(),
                            SourceParts parts = SourceParts::full);

struct PhiRunOptions {
  std::size_t nodes = 2400;
  double outer_radius_factor = 12.0;  // R = factor * sqrt(T + epsT)
  double resolution_factor = 0.05;    // first step relative to the smallest lambda
  double dt_fraction = 1.0 / 50.0;    // dt <= fraction * (T - t)
  SourceParts parts = SourceParts::full;
};

struct PhiCheckpoint {
  double t = 0.0;
  double tau = 0.0;
  double mass = 0.0;
  double lambda = 0.0;
  double center = 0.0;
  // sup over r <= sqrt(T - t) of |phi| (lambda^2 + r^2) e^{sqrt(2|ln(T - t)|)}
  double weighted_sup = 0.0;
  int steps = 0;
};

// Steps from phi(-epsT) = 0 and reports at each requested tau (descending).
std::vector<PhiCheckpoint> run_phi_lambda(const RateFunction& rate, std::vector<double> checkpoint_taus,
                                          const PhiRunOptions& opt = {},
                                          const Cutoff& cutoff = Cutoff::quintic());

// Mass of the kernel-sourced part by the heat-kernel representation.
double mass_phi1_duhamel(const RateFunction& rate, double t, const Cutoff& cutoff = Cutoff::quintic(),
                         const QuadratureSpec& spec = {1e-13, 1e-9, 4000});

// 4 pi int_{-eps}^T p/(T-s) - 4 pi int_{-eps}^{t-lambda^2} p/(t-s) + 4 pi kappa p(t).
double expansion_rhs(const RateFunction& rate, double t, const QuadratureSpec& spec = {1e-15, 1e-10, 4000});

// Explicit part of the kernel-sourced mass expansion: the two local terms and
// the cutoff double integral; the unknown constant is not included.
double phi1_expansion_terms(const RateFunction& rate, double t, const Cutoff& cutoff = Cutoff::quintic(),
                            const QuadratureSpec& spec = {1e-15, 1e-9, 4000});

// 16 pi beta lambda^2 / (delta (T - t)).
double cutoff_mass_term(const RateFunction& rate, double t, const Cutoff& cutoff = Cutoff::quintic());

// 2 sqrt(2) pi e^{-(gamma+2)} x e^{-x}, x = sqrt(2|ln epsT|).
double mass_at_T_formula(double epsT);

}  // namespace ksb
