#pragma once

#include <vector>

#include "hyperstab/kernel_solver.hpp"
#include "hyperstab/kernel_tables.hpp"
#include "hyperstab/params.hpp"

namespace hyperstab {

/// Exact kernels of the finite n+m plant, obtained by solving the kernel
/// equations with step parameters and reading the per-cell values. The
/// scalar family is shared with the step solve; the y-resolved family
/// collapses to one value per cell.
struct NmKernelSet {
    int n = 0;
    int m = 0;
    ContinuumKernelSet lift; ///< step-parameter solve (y-cellwise constant)
    /// Cell values k_{i,l}(x, xi), one table per segment, layout (a*nr+b)*n + l.
    std::vector<std::vector<double>> k;
    /// Largest within-cell deviation of the step solve from cell constancy.
    double cellwise_deviation = 0.0;

    const LTable& ell(int i, int j, int p) const {
        return lift.L[static_cast<std::size_t>(lift.seg_index(i, p))][static_cast<std::size_t>(j)];
    }
    const double* k_row(int seg, int a, int b) const {
        return k[static_cast<std::size_t>(seg)].data() +
               (static_cast<std::size_t>(a) * lift.K[static_cast<std::size_t>(seg)].g.nr + b) * n;
    }
};

/// Solves the n+m kernels through the step-parameter lift. The y grid is
/// aligned with the n cells regardless of the requested ny.
NmKernelSet solve_nm_kernels(const DiscreteParams& d, const SolveOptions& opts = {});

struct DistanceReport {
    int n = 0;
    double K_distance = 0.0;      ///< max pointwise y-L2 distance to the step extension
    double L_distance = 0.0;      ///< max absolute scalar-family distance
    double L_vector_distance = 0.0; ///< max euclidean distance of the scalar-family rows
    std::vector<double> L_distance_by_pair; ///< keyed i*m+j
    bool resampled = false;
};

/// Approximation distance between continuum kernels and the exact n+m set.
DistanceReport kernel_distance(const ContinuumKernelSet& cont, const NmKernelSet& nm, int n);

struct NmBcReport {
    double diag = 0.0;     ///< transport-speed weighted diagonal condition
    double xi0 = 0.0;      ///< reflection condition rows with zero right side
    double isometry = 0.0; ///< scaled vector norm vs step-extension L2 norm
};

/// Boundary-condition residuals of the extracted n+m kernels against the
/// discrete plant data, plus the step-extension isometry identity.
NmBcReport nm_boundary_residual(const NmKernelSet& nm, const DiscreteParams& d);

} // namespace hyperstab
