#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "hyperstab/errors.hpp"

namespace hyperstab {

/// Quadrature/interpolation grid for the ensemble variable y in [0,1].
///
/// The grid is partitioned into cells whose interiors carry smooth data;
/// parameter discontinuities (step lifts of discrete plants) live exactly on
/// cell edges. Each cell holds its own nodes including both endpoints, so a
/// step function is represented without smearing: the node at a shared edge
/// exists twice, once per adjacent cell. Cells follow the half-open
/// convention ((l-1)/n, l/n]: a query at an interior edge resolves to the
/// left cell's right endpoint.
class YGrid {
public:
    YGrid() = default;

    static YGrid uniform(int n_nodes) {
        return YGrid({0.0, 1.0}, n_nodes);
    }

    static YGrid cells(int n_cells, int nodes_per_cell) {
        std::vector<double> edges(static_cast<std::size_t>(n_cells) + 1);
        for (int l = 0; l <= n_cells; ++l)
            edges[static_cast<std::size_t>(l)] = static_cast<double>(l) / n_cells;
        return YGrid(std::move(edges), nodes_per_cell);
    }

    YGrid(std::vector<double> edges, int nodes_per_cell)
        : edges_(std::move(edges)), per_cell_(nodes_per_cell) {
        if (edges_.size() < 2 || per_cell_ < 2)
            throw ConfigError("YGrid requires at least one cell and two nodes per cell");
        const int nc = n_cells();
        nodes_.reserve(static_cast<std::size_t>(nc) * per_cell_);
        weights_.reserve(nodes_.capacity());
        for (int l = 0; l < nc; ++l) {
            const double a = edges_[static_cast<std::size_t>(l)];
            const double b = edges_[static_cast<std::size_t>(l) + 1];
            const double h = (b - a) / (per_cell_ - 1);
            for (int k = 0; k < per_cell_; ++k) {
                nodes_.push_back(k + 1 == per_cell_ ? b : a + h * k);
                weights_.push_back((k == 0 || k + 1 == per_cell_) ? 0.5 * h : h);
            }
        }
    }

    int n_cells() const { return static_cast<int>(edges_.size()) - 1; }
    int per_cell() const { return per_cell_; }
    int size() const { return static_cast<int>(nodes_.size()); }
    const std::vector<double>& nodes() const { return nodes_; }
    const std::vector<double>& weights() const { return weights_; }
    const std::vector<double>& edges() const { return edges_; }

    /// Node positions nudged into their owning half-open cell, for sampling
    /// functions whose jumps sit exactly on cell edges.
    std::vector<double> eval_points() const {
        std::vector<double> pts(nodes_);
        for (int c = 0; c < n_cells(); ++c) {
            const std::size_t base = static_cast<std::size_t>(c) * per_cell_;
            const double lo = edges_[static_cast<std::size_t>(c)];
            const double hi = edges_[static_cast<std::size_t>(c) + 1];
            if (pts[base] <= lo) pts[base] = lo + (hi - lo) * 1e-9;
        }
        return pts;
    }

    /// Cell owning y under the half-open convention; y <= 0 maps to cell 0.
    int cell_of(double y) const {
        const int nc = n_cells();
        int lo = 0, hi = nc - 1;
        while (lo < hi) {
            const int mid = (lo + hi) / 2;
            if (y <= edges_[static_cast<std::size_t>(mid) + 1] + 1e-14) hi = mid;
            else lo = mid + 1;
        }
        return lo;
    }

    double integrate(std::span<const double> v) const {
        double s = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) s += weights_[k] * v[k];
        return s;
    }

    /// Piecewise-linear evaluation; within-cell interpolation only.
    double interp(std::span<const double> v, double y) const {
        const int c = cell_of(y);
        const double a = edges_[static_cast<std::size_t>(c)];
        const double b = edges_[static_cast<std::size_t>(c) + 1];
        double t = (y - a) / (b - a) * (per_cell_ - 1);
        t = std::min(std::max(t, 0.0), static_cast<double>(per_cell_ - 1));
        int k = std::min(static_cast<int>(t), per_cell_ - 2);
        const double w = t - k;
        const std::size_t base = static_cast<std::size_t>(c) * per_cell_;
        return v[base + static_cast<std::size_t>(k)] * (1.0 - w) + v[base + static_cast<std::size_t>(k) + 1] * w;
    }

    /// Integral of the piecewise-linear interpolant over [a,b] in [0,1].
    double integrate_interval(std::span<const double> v, double a, double b) const {
        if (b <= a) return 0.0;
        double total = 0.0;
        const int ca = cell_of(std::nextafter(a + 0.0, 1.0) == a ? a : a + 1e-15);
        const int cb = cell_of(b);
        for (int c = ca; c <= cb; ++c) {
            const double lo = std::max(a, edges_[static_cast<std::size_t>(c)]);
            const double hi = std::min(b, edges_[static_cast<std::size_t>(c) + 1]);
            if (hi <= lo) continue;
            total += integrate_in_cell(v, c, lo, hi);
        }
        return total;
    }

private:
    double integrate_in_cell(std::span<const double> v, int c, double lo, double hi) const {
        const double a = edges_[static_cast<std::size_t>(c)];
        const double b = edges_[static_cast<std::size_t>(c) + 1];
        const double h = (b - a) / (per_cell_ - 1);
        const std::size_t base = static_cast<std::size_t>(c) * per_cell_;
        auto value_at = [&](double y) {
            double t = (y - a) / (b - a) * (per_cell_ - 1);
            t = std::min(std::max(t, 0.0), static_cast<double>(per_cell_ - 1));
            int k = std::min(static_cast<int>(t), per_cell_ - 2);
            const double w = t - k;
            return v[base + static_cast<std::size_t>(k)] * (1.0 - w) + v[base + static_cast<std::size_t>(k) + 1] * w;
        };
        // walk node intervals clipped to [lo,hi]; integrand is linear on each
        double s = 0.0;
        int k0 = std::min(static_cast<int>((lo - a) / h), per_cell_ - 2);
        int k1 = std::min(static_cast<int>(std::ceil((hi - a) / h - 1e-12)), per_cell_ - 1);
        for (int k = k0; k < k1; ++k) {
            const double ya = std::max(lo, a + h * k);
            const double yb = std::min(hi, a + h * (k + 1));
            if (yb <= ya) continue;
            s += 0.5 * (value_at(ya) + value_at(yb)) * (yb - ya);
        }
        return s;
    }

    std::vector<double> edges_;
    int per_cell_ = 0;
    std::vector<double> nodes_;
    std::vector<double> weights_;
};

} // namespace hyperstab
