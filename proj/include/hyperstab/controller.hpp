#pragma once

#include <span>
#include <string>
#include <vector>

#include "hyperstab/kernel_nm.hpp"
#include "hyperstab/kernel_tables.hpp"

namespace hyperstab {

enum class SamplingMode { MeanValue, Pointwise };

/// Feedback gains at the actuated boundary x = 1, per family and segment.
struct GainSegment {
    int i = 0, p = 0;
    std::vector<double> xi; ///< nodes on [rho(i,p+1,1), rho(i,p,1)]
    std::vector<double> k;  ///< layout (b*n + l)
    std::vector<double> l;  ///< layout (b*m + j)
};

struct SampledGains {
    int n = 0, m = 0;
    SamplingMode mode = SamplingMode::MeanValue;
    bool pointwise_on_discontinuous = false; ///< warning flag
    std::vector<GainSegment> segs;           ///< ordered like kernel segments

    int seg_index(int i, int p) const;
    double eval_k(int i, int l, double xi) const;  ///< segment-resolved
    double eval_l(int i, int j, double xi) const;
    /// One-sided evaluation pinned to a segment (for values on the jump curves).
    double eval_k_on_segment(int i, int p, int l, double xi) const;
    double eval_l_on_segment(int i, int p, int j, double xi) const;
};

/// Gain construction from continuum kernels: mean-value mode integrates the
/// y-cells, pointwise mode samples at y = l/n.
SampledGains sample_gains(const ContinuumKernelSet& ks, int n, SamplingMode mode);

/// Exact-kernel gains read off an n+m kernel set at x = 1.
SampledGains gains_from_nm(const NmKernelSet& nm);

/// State columns on a uniform x grid.
struct StateView {
    int n = 0, m = 0, nx = 0;
    const double* u = nullptr; ///< row-major (i * nx + g)
    const double* v = nullptr; ///< row-major (j * nx + g)
};

/// Feedback law evaluation: per output i, the segment-split quadrature of the
/// sampled gains against the state columns.
std::vector<double> eval_control_sampled(const SampledGains& g, const StateView& s);

/// Continuum feedback on a finite-row state, i.e. the mean-value gain
/// evaluation of the kernel integrals (exact for the step extension).
std::vector<double> eval_control_continuum(const ContinuumKernelSet& ks, const StateView& s);

/// Exact-kernel feedback law.
std::vector<double> eval_control_exact(const NmKernelSet& nm, const StateView& s);

struct GapReport {
    std::vector<double> k_gap;     ///< per i: max over xi of the scaled vector gap
    std::vector<double> l_gap;     ///< per i: max over xi of the euclidean row gap
    std::vector<double> aggregate; ///< per i: k_gap + l_gap
    double max_aggregate = 0.0;
};

/// Perturbation coefficients between sampled and exact gains.
GapReport control_gap(const SampledGains& g, const NmKernelSet& nm);

/// CSV export (columns: i, p, l-or-j, xi, value).
void save_gains_csv(const SampledGains& g, const std::string& k_file, const std::string& l_file);

} // namespace hyperstab
