#pragma once

#include "ksblow/profiles.hpp"
#include "ksblow/quadrature.hpp"

namespace ksb {

// Ei(x) = -int_{-x}^inf e^{-t}/t dt for x < 0: power series for |x| <= 5,
// Lentz continued fraction of E1 beyond.
double expint_Ei(double x);

// int_0^inf e^{-u^2/4} Z0(u a) u du by adaptive quadrature, a > 1.
double gaussian_Z0_integral(double a, const QuadratureSpec& spec = {});
// Closed-form leading behaviour -(2/a^4)[Ei(-1/(4a^2)) + 1].
double gaussian_Z0_closed(double a);

// int_0^{z1} z^3 Z0(z) dz from the primitive -8[(2+3z^2)/(1+z^2)^2 + ln(1+z^2)].
double cubic_moment_Z0(double z1);

// (1/w^4)[1 - e^{-w^2/4}(1 + w^2/4)], series branch for small w.
double heat6_factor(double w);

// int_0^inf (1 - chi0(s)) / s^3 ds.
double beta_const(const Cutoff& cutoff, const QuadratureSpec& spec = {});

}  // namespace ksb
