#pragma once

#include <functional>
#include <vector>

namespace ksb {

using Fn = std::function<double(double)>;

enum class PanelRule { gk15 };

struct QuadratureSpec {
  double abs_tol = 1e-14;
  double rel_tol = 1e-11;
  int max_subdivisions = 4000;
  PanelRule scheme = PanelRule::gk15;

  void validate() const;
  QuadratureSpec tightened(double factor) const;
};

struct QuadResult {
  double value = 0.0;
  double abs_error = 0.0;
  int evals = 0;
  int panels = 0;
  bool converged = true;
};

// Globally adaptive Gauss-Kronrod on [a, b]; interior breakpoints seed the
// initial panels. Does not throw on non-convergence, check `converged`.
QuadResult integrate(const Fn& f, double a, double b, const QuadratureSpec& spec = {});
QuadResult integrate(const Fn& f, const std::vector<double>& points,
                     const QuadratureSpec& spec = {});

// [a, inf) through x = a + (1 - s) / s.
QuadResult integrate_to_inf(const Fn& f, double a, const QuadratureSpec& spec = {});

// Throwing variants returning only the value.
double quad(const Fn& f, double a, double b, const QuadratureSpec& spec = {});
double quad(const Fn& f, const std::vector<double>& points, const QuadratureSpec& spec = {});
double quad_to_inf(const Fn& f, double a, const QuadratureSpec& spec = {});

}  // namespace ksb
