#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hyperstab/errors.hpp"

namespace hyperstab {

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;
using Fn3 = std::function<double(double, double, double)>;

/// Plant data for the ensemble-plus-m system. All indices are 0-based in
/// code; file formats and reports use 1-based labels.
///
/// Immutable by convention after construction: nothing in the library writes
/// to a params object, so concurrent reads are safe.
struct ContinuumParams {
    int m = 0;
    Fn2 lambda;                        ///< lambda(x,y) > 0, rightward speed
    std::vector<Fn1> mu;               ///< mu[j](x), strictly ordered families
    Fn3 sigma;                         ///< sigma(x,y,eta), in-domain self-coupling
    std::vector<Fn2> W;                ///< W[j](x,y), v -> u coupling
    std::vector<Fn2> theta;            ///< theta[j](x,y), u -> v coupling
    std::vector<std::vector<Fn1>> psi; ///< psi[i][j](x), psi[j][j] == 0
    std::vector<Fn1> Q;                ///< Q[j](y), reflection at x = 0
    /// Boundary data at x=1 for the lower-triangular kernels, l1[i][j] with
    /// j < i. Entries with j >= i are ignored.
    std::vector<std::vector<Fn1>> l1;

    /// Cell edges of known y-discontinuities (step lifts). Empty means the
    /// parameters are continuous in y.
    std::vector<double> y_edges;

    bool continuous_in_y() const { return y_edges.empty(); }
};

/// Plant data for the finite n+m system. The coupling sums carry an implicit
/// 1/n scaling in the dynamics; the arrays stored here are unscaled.
struct DiscreteParams {
    int n = 0;
    int m = 0;
    std::vector<Fn1> lambda;                 ///< lambda[i](x), i = 0..n-1
    std::vector<std::vector<Fn1>> sigma;     ///< sigma[i][l](x), n x n
    std::vector<std::vector<Fn1>> w;         ///< w[i][j](x), n x m
    std::vector<std::vector<Fn1>> theta;     ///< theta[j][i](x), m x n
    std::vector<std::vector<double>> q;      ///< q[i][j], n x m
    std::vector<Fn1> mu;                     ///< mu[j](x), m
    std::vector<std::vector<Fn1>> psi;       ///< psi[i][j](x), m x m
    std::vector<std::vector<Fn1>> l1;        ///< optional boundary data, m x m
};

struct Violation {
    std::string assumption; ///< which requirement failed
    std::string location;   ///< grid point / index where it failed
    double value = 0.0;
};

struct ValidationReport {
    bool pass = true;
    std::vector<Violation> violations;
};

/// Checks positivity, speed ordering, psi diagonal, and boundary-data
/// compatibility on a uniform check grid (points per axis).
ValidationReport validate(const ContinuumParams& p, int check_grid = 101);
ValidationReport validate(const DiscreteParams& d, int check_grid = 101);

enum class LiftInterpolation { PiecewiseLinear, CubicSpline };

/// Continuum parameters interpolating the discrete arrays at y = i/n
/// (1-based i), constant on [0, 1/n]. The discrete mu, psi carry over.
ContinuumParams lift_discrete(const DiscreteParams& d,
                              LiftInterpolation interp = LiftInterpolation::PiecewiseLinear);

/// Step-function parameters, constant on the half-open cells ((i-1)/n, i/n].
/// The result carries y_edges so solvers can align quadrature with the jumps.
ContinuumParams make_step_params(const DiscreteParams& d);

/// Default boundary data for j < i: the constant -psi[i][j](1)/(mu_i(1)-mu_j(1)),
/// which satisfies the required compatibility at (1,1).
std::vector<std::vector<Fn1>> default_l1(const std::vector<Fn1>& mu,
                                         const std::vector<std::vector<Fn1>>& psi);

} // namespace hyperstab
