#pragma once

#include "ksblow/radial.hpp"

namespace ksb {

struct Decomposition {
  double a = 0.0;
  RadialField phi_perp;
  RadialField g_perp;
};

// d_rho psi for psi = (-Delta)^{-1} phi: -(1/rho) int_0^rho phi s ds, 0 at rho = 0.
RadialField inv_laplacian_gradient(const RadialField& phi);

// psi = (-Delta)^{-1} phi normalized to vanish at infinity; requires zero mass.
RadialField inv_laplacian_decaying(const RadialField& phi);

// Conservative node-centred discretization of div(U grad(phi/U - psi)).
RadialField apply_L(const RadialField& phi);

// Splits a zero-mass field into (a/2) Z0 plus an orthogonal part.
// Throws DomainError when |mass| > mass_tol * int |phi|.
Decomposition decompose(const RadialField& phi, double mass_tol = 1e-6);

// Radial phi with L[phi] = h, normalized so that its kernel coefficient a is 0.
// Moments are checked relative to int |h| and int |h| rho^2.
RadialField solve_L(const RadialField& h, bool enforce_moments, double moment_tol = 1e-6);

// 2 pi int phi rho drho including the power-law tail estimate.
double total_mass(const RadialField& phi, double decay_power = 4.0);

}  // namespace ksb
