#pragma once

#include <string>
#include <vector>

#include "hyperstab/numerics.hpp"
#include "hyperstab/params.hpp"

namespace hyperstab {

/// Segment decomposition of the triangle 0 <= xi <= x <= 1.
///
/// Curves are indexed 0-based: curve c for i <= c <= m, where curve i is the
/// diagonal xi = x, curve m is the axis xi = 0, and interior curves follow
/// phi_c^{-1}(phi_i(x)). Segment p (i <= p <= m-1) lies between curve p+1
/// (below) and curve p (above).
class SegmentMap {
public:
    SegmentMap() = default;

    int m() const { return m_; }
    double phi(int j, double x) const { return phi_[static_cast<std::size_t>(j)](x); }
    double phi_inv(int j, double s) const { return phi_[static_cast<std::size_t>(j)].inverse(s); }
    double phi_end(int j) const { return phi_[static_cast<std::size_t>(j)].range_hi(); }

    /// xi-value of curve c at x.
    double rho(int i, int c, double x) const {
        if (c >= m_) return 0.0;
        if (c == i) return x;
        return phi_inv(c, phi(i, x));
    }

    /// Segment index owning (x, xi): the smallest p with xi >= rho(i, p+1, x).
    /// A point exactly on an interior curve belongs to the segment above it.
    int segment_of(int i, double x, double xi) const;

    friend SegmentMap build_segment_map(const ContinuumParams& p, int grid_resolution);

private:
    int m_ = 0;
    std::vector<MonotoneTable> phi_;
};

/// Tabulates phi_j by composite quadrature at the given resolution and
/// prepares monotone inverses. Throws GeometryError if a phi tabulation is
/// not strictly increasing (mu sign error).
SegmentMap build_segment_map(const ContinuumParams& p, int grid_resolution = 257);

enum class BoundaryTag {
    KDiagonal,        ///< xi = x, kernel value fixed by the theta data
    KContinuity,      ///< interior curve, value pulled from the segment above
    LDiagonal,        ///< xi = x, value fixed by the psi data
    LArtificialX1,    ///< x = 1, value fixed by the l1 data
    LContinuityUpper, ///< interior curve, value from the segment above
    LContinuityLower, ///< interior curve, value from the segment below
    LXiZero,          ///< xi = 0, value fixed by the reflection integral
    Degenerate        ///< zero-length path at the corner (0,0)
};

std::string to_string(BoundaryTag t);

struct PathNode {
    double s;
    double x;
    double xi;
};

/// A characteristic projection traced from a start point to its terminal
/// boundary, sampled at quadrature nodes.
struct CharacteristicPath {
    bool k_family = true;
    int i = 0, j = 0, p = 0; ///< 0-based indices; j unused for the K family
    double y = 0.0;          ///< ensemble parameter (K family only)
    std::vector<PathNode> nodes;
    double s_f = 0.0;
    double x_f = 0.0, xi_f = 0.0;
    BoundaryTag terminal_bc = BoundaryTag::Degenerate;
};

/// Integration step commensurate with an Nx-point table grid.
double default_s_step(const ContinuumParams& p, int nx_resolution);

/// Traces d x/ds = -mu_i, d xi/ds = lambda(xi, y) from (x, xi) in segment
/// (i, pseg) until the upper segment boundary, with a classical 4th-order
/// one-step method and bisection event detection.
CharacteristicPath trace_K_characteristic(const ContinuumParams& p, const SegmentMap& map, int i,
                                          int pseg, double x, double xi, double y,
                                          double s_step = 0.0);

/// Traces d x/ds = eps*mu_i, d xi/ds = eps*mu_j with eps = +1 for i > j and
/// -1 otherwise, classifying the terminal boundary by the segment taxonomy.
CharacteristicPath trace_L_characteristic(const ContinuumParams& p, const SegmentMap& map, int i,
                                          int j, int pseg, double x, double xi,
                                          double s_step = 0.0);

/// Debug export, columns s, x, xi.
void write_path_csv(const CharacteristicPath& path, const std::string& file);

} // namespace hyperstab
