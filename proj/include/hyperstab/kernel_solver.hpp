#pragma once

#include <string>
#include <vector>

#include "hyperstab/kernel_tables.hpp"
#include "hyperstab/params.hpp"

namespace hyperstab {

struct SolveOptions {
    int nx = 129;        ///< table points in x
    int nr = 129;        ///< table points across each segment
    int ny = 65;         ///< total y nodes (aligned with cell edges when present)
    double tol = 1e-8;   ///< sup-norm update tolerance (L2 in y for the y-resolved family)
    int max_iter = 200;
    int threads = 0;     ///< 0 = HYPERSTAB_THREADS or hardware
};

/// Solves the kernel family by successive approximations along
/// characteristics, sweeping segments in dependency order. Throws
/// ConvergenceError (with the update history) if max_iter is exhausted.
ContinuumKernelSet solve_continuum_kernels(const ContinuumParams& p, const SolveOptions& opts = {});

/// Reflection-weighted moments of the y-resolved kernels at xi = 0 for the
/// strictly lower-triangular coupling of the target system. Normally filled
/// in by the solver; exposed for reuse on externally built tables.
std::vector<std::vector<double>> compute_G(const ContinuumKernelSet& ks, const ContinuumParams& p);

struct CouplingOptions {
    int nxy = 65;
    double tol = 1e-10;
    int max_terms = 60;
    bool full_4d = false;
    int threads = 0;
};

/// Solves the second-kind Volterra series for the leftward coupling row and
/// evaluates the rightward coupling from it.
CouplingTables solve_coupling_C(const ContinuumKernelSet& ks, const ContinuumParams& p,
                                const CouplingOptions& opts = {});

struct ResidualReport {
    double pde_K = 0;        ///< transport equation residual, y-resolved family
    double pde_L = 0;        ///< transport equation residual, scalar family
    double bc_diag_K = 0;    ///< xi = x condition residual
    double bc_diag_L = 0;
    double bc_xi0 = 0;       ///< xi = 0 reflection condition residual
    double bc_x1 = 0;        ///< x = 1 boundary-data residual
    double cont_K = 0;       ///< continuity across interior curves
    double cont_L = 0;
    double max_overall() const;
};

/// Pointwise finite-difference residuals of the kernel equations at interior
/// table nodes plus all boundary/continuity conditions.
ResidualReport kernel_residual(const ContinuumKernelSet& ks, const ContinuumParams& p);

/// All estimate constants by grid max / quadrature; kernel-dependent entries
/// (M_L, M_G) are filled when `ks` is given, coupling ones when `ct` is given.
KernelBounds compute_bounds(const ContinuumParams& p, const ContinuumKernelSet* ks = nullptr,
                            const CouplingTables* ct = nullptr, int check_grid = 129);

/// Analytic kernel tables of the built-in example plant on the given grid.
ContinuumKernelSet example_closed_form(int nx = 129, int nr = 129, int ny = 65);

/// Sup distance between two kernel sets on matching grids (largest pointwise
/// y-L2 distance for the y-resolved family, absolute value for the scalar
/// family). Used by verification studies.
struct KernelSupError {
    double K = 0;
    double L = 0;
};
KernelSupError kernel_sup_error(const ContinuumKernelSet& a, const ContinuumKernelSet& b);

} // namespace hyperstab
