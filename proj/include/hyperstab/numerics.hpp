#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace hyperstab {

inline std::vector<double> linspace(double a, double b, int n) {
    std::vector<double> v(static_cast<std::size_t>(n));
    if (n == 1) {
        v[0] = a;
        return v;
    }
    const double h = (b - a) / (n - 1);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = a + h * i;
    v.back() = b;
    return v;
}

/// Composite trapezoid on a uniform grid.
inline double trapz(std::span<const double> f, double h) {
    if (f.size() < 2) return 0.0;
    double s = 0.5 * (f.front() + f.back());
    for (std::size_t i = 1; i + 1 < f.size(); ++i) s += f[i];
    return s * h;
}

/// Linear interpolation of uniformly sampled values on [a,b]; clamps outside.
inline double lerp_uniform(std::span<const double> f, double a, double b, double x) {
    const std::size_t n = f.size();
    if (n == 1) return f[0];
    const double t = (x - a) / (b - a) * static_cast<double>(n - 1);
    if (t <= 0.0) return f[0];
    if (t >= static_cast<double>(n - 1)) return f[n - 1];
    const auto i = static_cast<std::size_t>(t);
    const double w = t - static_cast<double>(i);
    return f[i] + w * (f[i + 1] - f[i]);
}

/// Strictly increasing function tabulated on a uniform grid, with a fast
/// inverse resampled onto a uniform grid of its range.
class MonotoneTable {
public:
    MonotoneTable() = default;

    /// `values` must be strictly increasing over the uniform grid on [a,b].
    MonotoneTable(double a, double b, std::vector<double> values, int inverse_resolution = 0)
        : a_(a), b_(b), v_(std::move(values)) {
        const int n = static_cast<int>(v_.size());
        const int ninv = inverse_resolution > 0 ? inverse_resolution : 4 * n;
        inv_lo_ = v_.front();
        inv_hi_ = v_.back();
        inv_.resize(static_cast<std::size_t>(ninv));
        // invert the piecewise-linear interpolant by a single monotone sweep
        const double hs = (inv_hi_ - inv_lo_) / (ninv - 1);
        std::size_t k = 0;
        const double hx = (b_ - a_) / (n - 1);
        for (int g = 0; g < ninv; ++g) {
            const double s = (g + 1 == ninv) ? inv_hi_ : inv_lo_ + hs * g;
            while (k + 2 < v_.size() && v_[k + 1] < s) ++k;
            const double denom = v_[k + 1] - v_[k];
            const double w = denom > 0.0 ? (s - v_[k]) / denom : 0.0;
            inv_[static_cast<std::size_t>(g)] = a_ + hx * (static_cast<double>(k) + std::clamp(w, 0.0, 1.0));
        }
    }

    double domain_lo() const { return a_; }
    double domain_hi() const { return b_; }
    double range_lo() const { return inv_lo_; }
    double range_hi() const { return inv_hi_; }

    double operator()(double x) const { return lerp_uniform(v_, a_, b_, x); }
    /// Inverse evaluation; clamps to the tabulated range.
    double inverse(double s) const { return lerp_uniform(inv_, inv_lo_, inv_hi_, s); }

    const std::vector<double>& values() const { return v_; }

private:
    double a_ = 0.0, b_ = 1.0;
    std::vector<double> v_;
    std::vector<double> inv_;
    double inv_lo_ = 0.0, inv_hi_ = 1.0;
};

/// Cumulative trapezoid of f over a uniform grid on [a,b]; result[0] = 0.
inline std::vector<double> cumulative_trapz(const std::function<double(double)>& f, double a,
                                            double b, int n) {
    std::vector<double> out(static_cast<std::size_t>(n), 0.0);
    const double h = (b - a) / (n - 1);
    double prev = f(a);
    for (int i = 1; i < n; ++i) {
        const double cur = f(a + h * i);
        out[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i - 1)] + 0.5 * h * (prev + cur);
        prev = cur;
    }
    return out;
}

/// Function values tabulated on a uniform 2-D grid, bilinear evaluation.
class Table2D {
public:
    Table2D() = default;
    Table2D(int nx, int ny, double x_lo, double x_hi, double y_lo, double y_hi)
        : nx_(nx), ny_(ny), x_lo_(x_lo), x_hi_(x_hi), y_lo_(y_lo), y_hi_(y_hi),
          v_(static_cast<std::size_t>(nx) * ny, 0.0) {}

    double& at(int i, int j) { return v_[static_cast<std::size_t>(i) * ny_ + j]; }
    double at(int i, int j) const { return v_[static_cast<std::size_t>(i) * ny_ + j]; }
    int nx() const { return nx_; }
    int ny() const { return ny_; }

    double operator()(double x, double y) const {
        double tx = (x - x_lo_) / (x_hi_ - x_lo_) * (nx_ - 1);
        double ty = (y - y_lo_) / (y_hi_ - y_lo_) * (ny_ - 1);
        tx = std::clamp(tx, 0.0, static_cast<double>(nx_ - 1));
        ty = std::clamp(ty, 0.0, static_cast<double>(ny_ - 1));
        int i = std::min(static_cast<int>(tx), nx_ - 2);
        int j = std::min(static_cast<int>(ty), ny_ - 2);
        if (nx_ == 1) i = 0;
        if (ny_ == 1) j = 0;
        const double wx = std::clamp(tx - i, 0.0, 1.0);
        const double wy = std::clamp(ty - j, 0.0, 1.0);
        const double f00 = at(i, j), f10 = at(std::min(i + 1, nx_ - 1), j);
        const double f01 = at(i, std::min(j + 1, ny_ - 1));
        const double f11 = at(std::min(i + 1, nx_ - 1), std::min(j + 1, ny_ - 1));
        return (1 - wx) * ((1 - wy) * f00 + wy * f01) + wx * ((1 - wy) * f10 + wy * f11);
    }

private:
    int nx_ = 0, ny_ = 0;
    double x_lo_ = 0, x_hi_ = 1, y_lo_ = 0, y_hi_ = 1;
    std::vector<double> v_;
};

/// Gaussian elimination with partial pivoting; A is row-major n x n, overwritten.
inline std::vector<double> solve_dense(std::vector<double> A, std::vector<double> b) {
    const int n = static_cast<int>(b.size());
    for (int col = 0; col < n; ++col) {
        int piv = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(A[static_cast<std::size_t>(r) * n + col]) >
                std::abs(A[static_cast<std::size_t>(piv) * n + col]))
                piv = r;
        if (piv != col) {
            for (int c = 0; c < n; ++c)
                std::swap(A[static_cast<std::size_t>(col) * n + c], A[static_cast<std::size_t>(piv) * n + c]);
            std::swap(b[static_cast<std::size_t>(col)], b[static_cast<std::size_t>(piv)]);
        }
        const double d = A[static_cast<std::size_t>(col) * n + col];
        for (int r = col + 1; r < n; ++r) {
            const double f = A[static_cast<std::size_t>(r) * n + col] / d;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c)
                A[static_cast<std::size_t>(r) * n + c] -= f * A[static_cast<std::size_t>(col) * n + c];
            b[static_cast<std::size_t>(r)] -= f * b[static_cast<std::size_t>(col)];
        }
    }
    for (int r = n - 1; r >= 0; --r) {
        double s = b[static_cast<std::size_t>(r)];
        for (int c = r + 1; c < n; ++c) s -= A[static_cast<std::size_t>(r) * n + c] * b[static_cast<std::size_t>(c)];
        b[static_cast<std::size_t>(r)] = s / A[static_cast<std::size_t>(r) * n + r];
    }
    return b;
}

/// Natural cubic spline through (x_i, y_i) with uniform or non-uniform nodes.
class CubicSpline {
public:
    CubicSpline() = default;
    CubicSpline(std::vector<double> xs, std::vector<double> ys)
        : x_(std::move(xs)), y_(std::move(ys)) {
        const int n = static_cast<int>(x_.size());
        m_.assign(static_cast<std::size_t>(n), 0.0);
        if (n < 3) return;
        std::vector<double> a(static_cast<std::size_t>(n), 0.0), b(static_cast<std::size_t>(n), 2.0),
            c(static_cast<std::size_t>(n), 0.0), d(static_cast<std::size_t>(n), 0.0);
        for (int i = 1; i + 1 < n; ++i) {
            const double hl = x_[static_cast<std::size_t>(i)] - x_[static_cast<std::size_t>(i - 1)];
            const double hr = x_[static_cast<std::size_t>(i + 1)] - x_[static_cast<std::size_t>(i)];
            a[static_cast<std::size_t>(i)] = hl / (hl + hr);
            c[static_cast<std::size_t>(i)] = hr / (hl + hr);
            d[static_cast<std::size_t>(i)] = 6.0 / (hl + hr) *
                ((y_[static_cast<std::size_t>(i + 1)] - y_[static_cast<std::size_t>(i)]) / hr -
                 (y_[static_cast<std::size_t>(i)] - y_[static_cast<std::size_t>(i - 1)]) / hl);
        }
        // Thomas algorithm, natural end conditions m_0 = m_{n-1} = 0
        for (int i = 2; i + 1 < n; ++i) {
            const double f = a[static_cast<std::size_t>(i)] / b[static_cast<std::size_t>(i - 1)];
            b[static_cast<std::size_t>(i)] -= f * c[static_cast<std::size_t>(i - 1)];
            d[static_cast<std::size_t>(i)] -= f * d[static_cast<std::size_t>(i - 1)];
        }
        for (int i = n - 2; i >= 1; --i) {
            double s = d[static_cast<std::size_t>(i)];
            if (i + 2 < n) s -= c[static_cast<std::size_t>(i)] * m_[static_cast<std::size_t>(i + 1)];
            m_[static_cast<std::size_t>(i)] = s / b[static_cast<std::size_t>(i)];
        }
    }

    double operator()(double x) const {
        const int n = static_cast<int>(x_.size());
        if (n == 0) return 0.0;
        if (n == 1) return y_[0];
        if (x <= x_.front()) x = x_.front();
        if (x >= x_.back()) x = x_.back();
        std::size_t i = static_cast<std::size_t>(
            std::upper_bound(x_.begin(), x_.end(), x) - x_.begin());
        if (i > 0) --i;
        if (i + 1 >= x_.size()) i = x_.size() - 2;
        const double h = x_[i + 1] - x_[i];
        const double t = (x - x_[i]) / h;
        const double a = y_[i], b = y_[i + 1];
        const double ma = m_[i], mb = m_[i + 1];
        return (1 - t) * a + t * b +
               h * h / 6.0 * ((1 - t) * ((1 - t) * (1 - t) - 1) * ma + t * (t * t - 1) * mb);
    }

private:
    std::vector<double> x_, y_, m_;
};

/// FNV-1a over raw bytes; used for deterministic artifact hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t len, std::uint64_t seed = 1469598103934665603ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    std::uint64_t h = seed;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::vector<double>& v, std::uint64_t seed = 1469598103934665603ull) {
    return fnv1a(v.data(), v.size() * sizeof(double), seed);
}

} // namespace hyperstab
