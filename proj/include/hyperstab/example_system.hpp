#pragma once

#include "hyperstab/params.hpp"

namespace hyperstab::example {

/// Built-in demonstration plant with m = 2 leftward states whose kernels
/// have closed forms, used as the reference problem for verification runs.
///
///   lambda = 1, mu = (2, 1),
///   sigma(x,y,eta) = x^3 (x+1) (y - 1/2)(eta - 1/2),
///   W_1 = W_2 = x (x+1) e^x (y - 1/2),
///   theta_1 = -3 y (y-1), theta_2 = -2 y (y-1),
///   psi = 0, Q_1 = 8 (y - 1/2), Q_2 = -8 (y - 2).
ContinuumParams continuum_params();

/// The n+m family sampled from the continuum plant at y = i/n.
DiscreteParams discrete_params(int n);

/// Closed-form kernel values (0-based segment indices).
///   K_1^0 = y(y-1)            on the segment x/2 <= xi <= x
///   K_1^1 = e^{x-2 xi} y(y-1) on the segment xi <= x/2
///   K_2^1 = e^{2(x-xi)} y(y-1) on the whole triangle
///   L_{1,2}^1 = -2 e^{x-2 xi}, L_{2,2}^1 = -2 e^{2(x-xi)}, all others 0.
double closed_form_K(int i, int p, double x, double xi, double y);
double closed_form_L(int i, int j, int p, double x, double xi);

/// Initial data used by the verification simulations:
/// u0_i = q_{i,1} + q_{i,2} and v0 = (1, 1).
double initial_u(int i, int n, double x);
double initial_v(int j, double x);

} // namespace hyperstab::example
