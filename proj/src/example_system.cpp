#include "hyperstab/example_system.hpp"

#include <cmath>

namespace hyperstab::example {

ContinuumParams continuum_params() {
    ContinuumParams p;
    p.m = 2;
    p.lambda = [](double, double) { return 1.0; };
    p.mu = {[](double) { return 2.0; }, [](double) { return 1.0; }};
    p.sigma = [](double x, double y, double eta) {
        return x * x * x * (x + 1.0) * (y - 0.5) * (eta - 0.5);
    };
    auto w = [](double x, double y) { return x * (x + 1.0) * std::exp(x) * (y - 0.5); };
    p.W = {w, w};
    p.theta = {[](double, double y) { return -3.0 * y * (y - 1.0); },
               [](double, double y) { return -2.0 * y * (y - 1.0); }};
    auto zero1 = [](double) { return 0.0; };
    p.psi = {{zero1, zero1}, {zero1, zero1}};
    p.Q = {[](double y) { return 8.0 * (y - 0.5); }, [](double y) { return -8.0 * (y - 2.0); }};
    p.l1 = default_l1(p.mu, p.psi); // constant 0 here since psi == 0
    return p;
}

DiscreteParams discrete_params(int n) {
    DiscreteParams d;
    d.n = n;
    d.m = 2;
    auto node = [n](int i) { return static_cast<double>(i + 1) / n; };
    d.lambda.assign(static_cast<std::size_t>(n), [](double) { return 1.0; });
    d.sigma.resize(static_cast<std::size_t>(n));
    d.w.resize(static_cast<std::size_t>(n));
    d.q.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double yi = node(i);
        d.sigma[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(n));
        for (int l = 0; l < n; ++l) {
            const double yl = node(l);
            d.sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)] = [yi, yl](double x) {
                return x * x * x * (x + 1.0) * (yi - 0.5) * (yl - 0.5);
            };
        }
        auto wi = [yi](double x) { return x * (x + 1.0) * std::exp(x) * (yi - 0.5); };
        d.w[static_cast<std::size_t>(i)] = {wi, wi};
        d.q[static_cast<std::size_t>(i)] = {8.0 * (yi - 0.5), -8.0 * (yi - 2.0)};
    }
    d.theta.resize(2);
    d.theta[0].resize(static_cast<std::size_t>(n));
    d.theta[1].resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double yi = node(i);
        d.theta[0][static_cast<std::size_t>(i)] = [yi](double) { return -3.0 * yi * (yi - 1.0); };
        d.theta[1][static_cast<std::size_t>(i)] = [yi](double) { return -2.0 * yi * (yi - 1.0); };
    }
    d.mu = {[](double) { return 2.0; }, [](double) { return 1.0; }};
    auto zero1 = [](double) { return 0.0; };
    d.psi = {{zero1, zero1}, {zero1, zero1}};
    d.l1 = default_l1(d.mu, d.psi);
    return d;
}

double closed_form_K(int i, int p, double x, double xi, double y) {
    const double yy = y * (y - 1.0);
    if (i == 0 && p == 0) return yy;
    if (i == 0 && p == 1) return std::exp(x - 2.0 * xi) * yy;
    if (i == 1 && p == 1) return std::exp(2.0 * (x - xi)) * yy;
    return 0.0;
}

double closed_form_L(int i, int j, int p, double x, double xi) {
    if (i == 0 && j == 1 && p == 1) return -2.0 * std::exp(x - 2.0 * xi);
    if (i == 1 && j == 1 && p == 1) return -2.0 * std::exp(2.0 * (x - xi));
    return 0.0;
}

double initial_u(int i, int n, double x) {
    (void)x;
    const double yi = static_cast<double>(i + 1) / n;
    return 8.0 * (yi - 0.5) - 8.0 * (yi - 2.0);
}

double initial_v(int j, double x) {
    (void)j;
    (void)x;
    return 1.0;
}

} // namespace hyperstab::example
