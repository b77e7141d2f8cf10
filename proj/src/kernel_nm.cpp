#include "hyperstab/kernel_nm.hpp"

#include <cmath>

#include "hyperstab/errors.hpp"

namespace hyperstab {

NmKernelSet solve_nm_kernels(const DiscreteParams& d, const SolveOptions& opts) {
    NmKernelSet nm;
    nm.n = d.n;
    nm.m = d.m;
    const auto step = make_step_params(d);
    nm.lift = solve_continuum_kernels(step, opts);

    const YGrid& yg = nm.lift.ygrid;
    const int per_cell = yg.per_cell();
    const int n = d.n;
    if (yg.n_cells() != n) throw ConfigError("step solve y grid not aligned with cells");

    nm.k.resize(nm.lift.K.size());
    for (std::size_t s = 0; s < nm.lift.K.size(); ++s) {
        const KTable& t = nm.lift.K[s];
        auto& kt = nm.k[s];
        kt.assign(static_cast<std::size_t>(t.g.nx) * t.g.nr * n, 0.0);
        for (int a = 0; a < t.g.nx; ++a)
            for (int b = 0; b < t.g.nr; ++b) {
                const double* row = t.row(a, b);
                double* out = kt.data() + (static_cast<std::size_t>(a) * t.g.nr + b) * n;
                for (int l = 0; l < n; ++l) {
                    // cell mean; the step solve is cellwise constant up to tol
                    double mean = 0.0;
                    const std::size_t base = static_cast<std::size_t>(l) * per_cell;
                    for (int c = 0; c < per_cell; ++c)
                        mean += yg.weights()[base + static_cast<std::size_t>(c)] * row[base + c];
                    mean *= n; // cell width 1/n
                    out[l] = mean;
                    for (int c = 0; c < per_cell; ++c)
                        nm.cellwise_deviation =
                            std::max(nm.cellwise_deviation, std::abs(row[base + c] - mean));
                }
            }
    }
    return nm;
}

DistanceReport kernel_distance(const ContinuumKernelSet& cont, const NmKernelSet& nm, int n) {
    DistanceReport rep;
    rep.n = n;
    const int m = cont.m;
    rep.L_distance_by_pair.assign(static_cast<std::size_t>(m) * m, 0.0);

    const YGrid& yg = nm.lift.ygrid; // sampling grid of the comparison
    const int nyn = yg.size();
    const int per_cell = yg.per_cell();
    // duplicate edge nodes of the step grid must query the owning cell
    const auto ypts = yg.eval_points();
    std::vector<double> crow(static_cast<std::size_t>(cont.ygrid.size()));
    std::vector<double> cvals(static_cast<std::size_t>(nyn));

    const bool same_grid = !cont.K.empty() && !nm.lift.K.empty() &&
                           cont.K[0].g.nx == nm.lift.K[0].g.nx &&
                           cont.K[0].g.nr == nm.lift.K[0].g.nr;
    rep.resampled = !same_grid;

    for (std::size_t s = 0; s < cont.segments.size(); ++s) {
        const auto [i, p] = cont.segments[s];
        const SegmentGrid& g = nm.lift.K[static_cast<std::size_t>(nm.lift.seg_index(i, p))].g;
        for (int a = 0; a < g.nx; ++a)
            for (int b = 0; b < g.nr; ++b) {
                const double x = g.x_of(a);
                const double xi = g.xi_of(a, b);
                cont.eval_K_row_on_segment(i, p, x, xi, crow);
                for (int c = 0; c < nyn; ++c)
                    cvals[static_cast<std::size_t>(c)] =
                        cont.ygrid.interp(crow, ypts[static_cast<std::size_t>(c)]);
                const double* kc = nm.k_row(nm.lift.seg_index(i, p), a, b);
                double s2 = 0.0;
                for (int l = 0; l < n; ++l) {
                    const std::size_t base = static_cast<std::size_t>(l) * per_cell;
                    for (int c = 0; c < per_cell; ++c) {
                        const double dv = cvals[base + static_cast<std::size_t>(c)] - kc[l];
                        s2 += yg.weights()[base + static_cast<std::size_t>(c)] * dv * dv;
                    }
                }
                rep.K_distance = std::max(rep.K_distance, std::sqrt(s2));

                double vec2 = 0.0;
                for (int j = 0; j < m; ++j) {
                    const double dl = cont.eval_L_on_segment(i, j, p, x, xi) -
                                      nm.ell(i, j, p).at(a, b);
                    auto& pairmax = rep.L_distance_by_pair[static_cast<std::size_t>(i) * m + j];
                    pairmax = std::max(pairmax, std::abs(dl));
                    rep.L_distance = std::max(rep.L_distance, std::abs(dl));
                    vec2 += dl * dl;
                }
                rep.L_vector_distance = std::max(rep.L_vector_distance, std::sqrt(vec2));
            }
    }
    return rep;
}

NmBcReport nm_boundary_residual(const NmKernelSet& nm, const DiscreteParams& d) {
    NmBcReport rep;
    const int n = nm.n, m = nm.m;
    for (int i = 0; i < m; ++i) {
        // diagonal rows of the topmost segment
        {
            const int s = nm.lift.seg_index(i, i);
            const SegmentGrid& g = nm.lift.K[static_cast<std::size_t>(s)].g;
            for (int a = 0; a < g.nx; ++a) {
                const double x = g.x_of(a);
                const double mui = d.mu[static_cast<std::size_t>(i)](x);
                const double* kr = nm.k_row(s, a, g.nr - 1);
                for (int l = 0; l < n; ++l) {
                    const double lam = d.lambda[static_cast<std::size_t>(l)](x);
                    const double th = d.theta[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)](x);
                    rep.diag = std::max(rep.diag, std::abs((mui + lam) * kr[l] + th));
                }
            }
        }
        // reflection rows of the bottom segment, zero right side for j >= i
        {
            const int s = nm.lift.seg_index(i, m - 1);
            const SegmentGrid& g = nm.lift.K[static_cast<std::size_t>(s)].g;
            for (int j = i; j < m; ++j) {
                const double muj0 = d.mu[static_cast<std::size_t>(j)](0.0);
                for (int a = 0; a < g.nx; ++a) {
                    const double* kr = nm.k_row(s, a, 0);
                    double acc = 0.0;
                    for (int l = 0; l < n; ++l)
                        acc += d.q[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)] *
                               d.lambda[static_cast<std::size_t>(l)](0.0) * kr[l];
                    acc /= n;
                    rep.xi0 = std::max(rep.xi0,
                                       std::abs(acc - muj0 * nm.ell(i, j, m - 1).at(a, 0)));
                }
            }
        }
    }
    // step-extension isometry identity at every table point
    const YGrid& yg = nm.lift.ygrid;
    const int per_cell = yg.per_cell();
    for (std::size_t s = 0; s < nm.lift.K.size(); ++s) {
        const SegmentGrid& g = nm.lift.K[s].g;
        for (int a = 0; a < g.nx; ++a)
            for (int b = 0; b < g.nr; ++b) {
                const double* kr = nm.k_row(static_cast<int>(s), a, b);
                double vec2 = 0.0;
                double l2 = 0.0;
                for (int l = 0; l < n; ++l) {
                    vec2 += kr[l] * kr[l];
                    const std::size_t base = static_cast<std::size_t>(l) * per_cell;
                    for (int c = 0; c < per_cell; ++c)
                        l2 += yg.weights()[base + static_cast<std::size_t>(c)] * kr[l] * kr[l];
                }
                rep.isometry = std::max(rep.isometry,
                                        std::abs(std::sqrt(vec2 / n) - std::sqrt(l2)));
            }
    }
    return rep;
}

} // namespace hyperstab
