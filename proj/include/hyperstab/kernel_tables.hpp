#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "hyperstab/geometry.hpp"
#include "hyperstab/numerics.hpp"
#include "hyperstab/params.hpp"
#include "hyperstab/ygrid.hpp"

namespace hyperstab {

/// Structured grid over one segment in mapped coordinates: uniform x in
/// [0,1] and uniform relative position r in [0,1] between the lower and
/// upper bounding curves.
struct SegmentGrid {
    int i = 0, p = 0; ///< 0-based family and segment indices
    int nx = 0, nr = 0;
    std::vector<double> lo; ///< xi of the lower curve p+1 at each x node
    std::vector<double> up; ///< xi of the upper curve p at each x node

    double x_of(int a) const { return static_cast<double>(a) / (nx - 1); }
    double r_of(int b) const { return static_cast<double>(b) / (nr - 1); }

    double lo_at(double x) const { return lerp_uniform(lo, 0.0, 1.0, x); }
    double up_at(double x) const { return lerp_uniform(up, 0.0, 1.0, x); }

    double xi_of(int a, int b) const {
        return lo[static_cast<std::size_t>(a)] +
               r_of(b) * (up[static_cast<std::size_t>(a)] - lo[static_cast<std::size_t>(a)]);
    }

    /// Mapped coordinate of a physical point; r clamped to [0,1].
    double r_at(double x, double xi) const {
        const double l = lo_at(x), u = up_at(x);
        if (u - l < 1e-300) return 0.0;
        const double r = (xi - l) / (u - l);
        return r < 0.0 ? 0.0 : (r > 1.0 ? 1.0 : r);
    }
};

/// y-resolved kernel table on one segment; values laid out (a, b, c) with the
/// y index c contiguous.
struct KTable {
    SegmentGrid g;
    int nyn = 0;
    std::vector<double> v;

    double* row(int a, int b) {
        return v.data() + (static_cast<std::size_t>(a) * g.nr + b) * nyn;
    }
    const double* row(int a, int b) const {
        return v.data() + (static_cast<std::size_t>(a) * g.nr + b) * nyn;
    }
};

/// Scalar kernel table on one segment, layout (a, b).
struct LTable {
    SegmentGrid g;
    std::vector<double> v;

    double& at(int a, int b) { return v[static_cast<std::size_t>(a) * g.nr + b]; }
    double at(int a, int b) const { return v[static_cast<std::size_t>(a) * g.nr + b]; }
};

/// Solved coupling tables of the target system, stored on a uniform (x, xi)
/// grid over the triangle (entries with xi > x are zero).
struct CouplingTables {
    int nxy = 0; ///< points per (x, xi) axis
    YGrid ygrid;
    /// Cminus[j], layout ((a*nxy)+b)*nyn + c.
    std::vector<std::vector<double>> Cminus;
    /// Reduced table of the 4-argument coupling integrated over its last
    /// argument, same layout as Cminus entries.
    std::vector<double> Cplus_reduced;
    /// Optional full 4-D table, layout (((a*nxy)+b)*nyn + c)*nyn + e; empty
    /// unless requested.
    std::vector<double> Cplus;
    int terms_used = 0;
    double last_term_sup = 0.0;
    std::vector<double> term_sups; ///< sup norm of every series term, in order
};

/// Constants of the successive-approximation and decay estimates, evaluated
/// by grid max / quadrature.
struct KernelBounds {
    double m_lambda = 0, m_mu = 0;
    double M_lambda = 0, M_mu = 0;
    double M_sigma = 0, M_W = 0, M_theta = 0, M_psi = 0;
    double M_Q = 0, M_Q1 = 0;
    double M_lambda1 = 0, M_mu1 = 0;
    double M_B = 0;
    double eps = 0;
    double M_lambda_eps = 0, M_mu_eps = 0;
    double M = 0, M_KL = 0;
    double M_L = 0, M_Cplus = 0, M_Cminus = 0, M_G = 0;
};

/// Full solved kernel family with its grids and solve statistics.
struct ContinuumKernelSet {
    int m = 0;
    SegmentMap map;
    YGrid ygrid;

    std::vector<std::pair<int, int>> segments; ///< (i, p) pairs, p ascending per i
    std::vector<KTable> K;                     ///< indexed like `segments`
    std::vector<std::vector<LTable>> L;        ///< L[seg][j]

    std::vector<double> x_nodes;        ///< shared x grid of the tables
    /// G tables on x_nodes, keyed i*m+j; identically zero for i <= j.
    std::vector<std::vector<double>> G;

    int iterations = 0;
    double final_delta = 0.0;
    double tol = 0.0;
    std::vector<double> update_history;

    int seg_index(int i, int p) const;

    double eval_K_on_segment(int i, int p, double x, double xi, double y) const;
    double eval_L_on_segment(int i, int j, int p, double x, double xi) const;
    /// Fills all y-node values of K_i at (x, xi) on segment p.
    void eval_K_row_on_segment(int i, int p, double x, double xi, std::span<double> out) const;

    /// Segment-resolved evaluation (points on interior curves resolve to the
    /// segment above, matching SegmentMap::segment_of).
    double eval_K(int i, double x, double xi, double y) const;
    double eval_L(int i, int j, double x, double xi) const;
    void eval_K_row(int i, double x, double xi, std::span<double> out) const;

    double eval_G(int i, int j, double x) const;

    std::uint64_t content_hash() const;
};

/// Directory serialization: one CSV per table plus manifest.json.
void save_kernels(const ContinuumKernelSet& ks, const std::string& dir);
ContinuumKernelSet load_kernels(const std::string& dir, const ContinuumParams& p);

} // namespace hyperstab
