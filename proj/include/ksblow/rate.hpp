#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ksblow/philambda.hpp"
#include "ksblow/profiles.hpp"
#include "ksblow/quadrature.hpp"

namespace ksb {

// ||p||_{gamma,m} = sup |ln tau|^m e^{gamma sqrt(2|ln tau|)} |p|, tau = T - t.
struct LogNorm {
  double gamma_exp = 1.0;
  double m = 0.0;

  void validate() const;
  double weight(double tau) const;
  // sup over the given tau values
  double of(const std::function<double(double)>& f_of_tau, const std::vector<double>& taus) const;
  double of(const RateFunction& p, const std::vector<double>& taus) const;
};

// -int_{-eps}^{t-lambda^2} p/(t-s) + (gamma+1-ln4) p(t) + int_{-eps}^T p/(T-s), t in (0, T).
double nonlocal_residual(const RateFunction& p, double t, const QuadratureSpec& spec = {1e-300, 1e-11, 4000});

// Resolvent of int_t^T g/(T-s) - sqrt(2|ln(T-t)|) g = f. `norm` describes the
// decay of f and fixes the constant (zero for gamma = 1, decay at T otherwise).
double resolvent_T0_at(const std::function<double(double)>& f_of_tau, const LogNorm& norm, const TimeWindow& w,
                       double tau);
// On the nodes of f, continued below the first node by the exact resolvent of f's tail.
RateFunction resolvent_T0(const RateFunction& f, const LogNorm& norm);

// Computable part of the forcing: equals -nonlocal_residual(p_star, t), t in (-T/2, T).
double f_star(double t, const RateFunction& p_star, const QuadratureSpec& spec = {1e-300, 1e-11, 4000});
double f_star(double t, const TimeWindow& w, const QuadratureSpec& spec = {1e-300, 1e-11, 4000});

// Local difference operator; N(t) = |ln(T-t)|^{1/4}, inner cut (T-t) e^{-sigma sqrt(2|ln(T-t)|)}.
double A_sigma(const RateFunction& p1, double t, double sigma);

// Nonlinear and far-field remainder of the linearized equation.
double B1_op(const RateFunction& p1, const RateFunction& p_star, double t);

// int over (t - (T-t) e^{-sigma sqrt(2|ln(T-t)|)}, t - lambda_star^2) of (p(t) - p(s))/(t - s).
double sigma_remainder(const RateFunction& p, const RateFunction& p_star, double t, double sigma);

// -int_{lambda^2}^{lambda_star^2} (p_star(T-t+d) - p_star(T-t))/d dd with lambda from p_star + p1.
double star_log_remainder(const RateFunction& p1, const RateFunction& p_star, double t);

// int_t^T p/(T-s) - sqrt(2|ln(T-t)|) p(t).
double ode_lhs(const RateFunction& p, double t);

struct ResidualSample {
  double t = 0.0;
  double tau = 0.0;
  double R_pstar = 0.0;
  double R_p1 = 0.0;
  double R_p2 = 0.0;
  double weighted = 0.0;  // |R_p2| |ln tau|^{1/4} e^{sqrt(2|ln tau|)}
};

struct RateSolveOptions {
  TimeWindow window{};
  double sigma = 0.45;
  int max_iters = 40;
  double tol = 1e-9;
  std::size_t nodes = 400;
  double tau_min_factor = 1e-6;
  // residual profile on tau in [lo, hi] * T
  double profile_lo = 1e-4;
  double profile_hi = 0.5;
  std::size_t profile_points = 41;
  bool second_correction = true;
  bool zero_forcing = false;  // replace f_star by 0
};

struct RateSolveReport {
  RateFunction p_star;
  RateFunction h;
  RateFunction p1;
  std::optional<RateFunction> p2;
  std::vector<ResidualSample> residual_profile;
  std::map<std::string, double> fitted_norm_constants;
  std::vector<double> distances;  // weighted sup distance of successive iterates
  int iterations = 0;
  bool converged = false;
};

RateSolveReport picard_solve_p1(const RateSolveOptions& opt = {});

// Solves the resolvent equation with right-hand side -eta(t/T) sigma_remainder(p1).
RateFunction second_correction_p2(const RateFunction& p1, const RateFunction& p_star, double sigma);

// picard_solve_p1 followed by second_correction_p2 and the residual profile.
RateSolveReport solve_rate(const RateSolveOptions& opt = {});

}  // namespace ksb
