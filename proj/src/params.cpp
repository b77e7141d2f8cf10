#include "hyperstab/params.hpp"

#include <cmath>
#include <memory>
#include <sstream>

#include "hyperstab/numerics.hpp"

namespace hyperstab {

namespace {

std::string grid_point(double x) {
    std::ostringstream os;
    os << "x=" << x;
    return os.str();
}

std::string grid_point(double x, double y) {
    std::ostringstream os;
    os << "x=" << x << ",y=" << y;
    return os.str();
}

double eval_or_config_error(const Fn1& f, double x, const char* name) {
    if (!f) throw ConfigError(std::string(name) + " is not set");
    try {
        return f(x);
    } catch (const std::exception& e) {
        throw ConfigError(std::string(name) + " not evaluable: " + e.what());
    }
}

double eval_or_config_error(const Fn2& f, double x, double y, const char* name) {
    if (!f) throw ConfigError(std::string(name) + " is not set");
    try {
        return f(x, y);
    } catch (const std::exception& e) {
        throw ConfigError(std::string(name) + " not evaluable: " + e.what());
    }
}

void check_speed_ordering(const std::vector<Fn1>& mu, const std::vector<double>& xs,
                          ValidationReport& rep) {
    const int m = static_cast<int>(mu.size());
    // mu_m(x) > 0
    for (double x : xs) {
        const double v = eval_or_config_error(mu[static_cast<std::size_t>(m - 1)], x, "mu");
        if (!(v > 0.0)) {
            rep.violations.push_back({"mu_m positivity", grid_point(x), v});
            break;
        }
    }
    // min_x mu_j > max_x mu_{j+1}
    for (int j = 0; j + 1 < m; ++j) {
        double mn = 1e300, mx = -1e300, at_mn = 0, at_mx = 0;
        for (double x : xs) {
            const double a = eval_or_config_error(mu[static_cast<std::size_t>(j)], x, "mu");
            const double b = eval_or_config_error(mu[static_cast<std::size_t>(j) + 1], x, "mu");
            if (a < mn) { mn = a; at_mn = x; }
            if (b > mx) { mx = b; at_mx = x; }
        }
        if (!(mn > mx)) {
            std::ostringstream os;
            os << "min mu_" << j + 1 << " at " << grid_point(at_mn) << " vs max mu_" << j + 2
               << " at " << grid_point(at_mx);
            rep.violations.push_back({"speed ordering", os.str(), mn - mx});
        }
    }
}

void check_psi_diagonal(const std::vector<std::vector<Fn1>>& psi, const std::vector<double>& xs,
                        ValidationReport& rep) {
    for (std::size_t j = 0; j < psi.size(); ++j) {
        for (double x : xs) {
            const double v = eval_or_config_error(psi[j][j], x, "psi");
            if (v != 0.0) {
                std::ostringstream os;
                os << "psi_" << j + 1 << "," << j + 1 << " at " << grid_point(x);
                rep.violations.push_back({"psi diagonal zero", os.str(), v});
                break;
            }
        }
    }
}

} // namespace

ValidationReport validate(const ContinuumParams& p, int check_grid) {
    ValidationReport rep;
    if (p.m < 1) throw ConfigError("ContinuumParams.m must be >= 1");
    if (static_cast<int>(p.mu.size()) != p.m || static_cast<int>(p.theta.size()) != p.m ||
        static_cast<int>(p.W.size()) != p.m || static_cast<int>(p.Q.size()) != p.m ||
        static_cast<int>(p.psi.size()) != p.m)
        throw ConfigError("ContinuumParams field sizes inconsistent with m");
    const auto xs = linspace(0.0, 1.0, check_grid);

    bool lambda_ok = true;
    for (double x : xs) {
        for (double y : xs) {
            const double v = eval_or_config_error(p.lambda, x, y, "lambda");
            if (!(v > 0.0)) {
                rep.violations.push_back({"lambda positivity", grid_point(x, y), v});
                lambda_ok = false;
                break;
            }
        }
        if (!lambda_ok) break;
    }

    check_speed_ordering(p.mu, xs, rep);
    check_psi_diagonal(p.psi, xs, rep);

    // boundary-data compatibility at xi = 1 for j < i
    for (int i = 0; i < p.m; ++i) {
        for (int j = 0; j < i; ++j) {
            if (static_cast<int>(p.l1.size()) <= i || static_cast<int>(p.l1[static_cast<std::size_t>(i)].size()) <= j ||
                !p.l1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)])
                throw ConfigError("missing boundary data l1 for pair (" + std::to_string(i + 1) +
                                  "," + std::to_string(j + 1) + ")");
            const double mui = eval_or_config_error(p.mu[static_cast<std::size_t>(i)], 1.0, "mu");
            const double muj = eval_or_config_error(p.mu[static_cast<std::size_t>(j)], 1.0, "mu");
            const double psij = eval_or_config_error(p.psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], 1.0, "psi");
            const double want = -psij / (mui - muj);
            const double got = eval_or_config_error(p.l1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)], 1.0, "l1");
            if (std::abs(got - want) > 1e-10 * (1.0 + std::abs(want))) {
                std::ostringstream os;
                os << "l1_" << i + 1 << "," << j + 1 << "(1)";
                rep.violations.push_back({"boundary-data compatibility", os.str(), got - want});
            }
        }
    }

    rep.pass = rep.violations.empty();
    return rep;
}

ValidationReport validate(const DiscreteParams& d, int check_grid) {
    ValidationReport rep;
    if (d.n < 1 || d.m < 1) throw ConfigError("DiscreteParams.n and .m must be >= 1");
    if (static_cast<int>(d.lambda.size()) != d.n || static_cast<int>(d.mu.size()) != d.m)
        throw ConfigError("DiscreteParams field sizes inconsistent with n, m");
    const auto xs = linspace(0.0, 1.0, check_grid);

    for (int i = 0; i < d.n; ++i) {
        bool bad = false;
        for (double x : xs) {
            const double v = eval_or_config_error(d.lambda[static_cast<std::size_t>(i)], x, "lambda");
            if (!(v > 0.0)) {
                std::ostringstream os;
                os << "lambda_" << i + 1 << " at " << grid_point(x);
                rep.violations.push_back({"lambda positivity", os.str(), v});
                bad = true;
                break;
            }
        }
        if (bad) break;
    }

    check_speed_ordering(d.mu, xs, rep);
    check_psi_diagonal(d.psi, xs, rep);

    rep.pass = rep.violations.empty();
    return rep;
}

std::vector<std::vector<Fn1>> default_l1(const std::vector<Fn1>& mu,
                                         const std::vector<std::vector<Fn1>>& psi) {
    const int m = static_cast<int>(mu.size());
    std::vector<std::vector<Fn1>> l1(static_cast<std::size_t>(m), std::vector<Fn1>(static_cast<std::size_t>(m)));
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < i; ++j) {
            const double c = -psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](1.0) /
                             (mu[static_cast<std::size_t>(i)](1.0) - mu[static_cast<std::size_t>(j)](1.0));
            l1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = [c](double) { return c; };
        }
    }
    return l1;
}

namespace {

/// Interpolates nodal values f(i) given at y = (i+1)/n, constant on [0, 1/n].
class NodalInterp {
public:
    NodalInterp(int n, LiftInterpolation mode) : n_(n), mode_(mode) {}

    double eval(const std::function<double(int)>& nodal, double y) const {
        if (n_ == 1) return nodal(0);
        const double y1 = 1.0 / n_;
        if (y <= y1) return nodal(0);
        if (y >= 1.0) return nodal(n_ - 1);
        if (mode_ == LiftInterpolation::PiecewiseLinear) {
            const double t = (y - y1) / (1.0 - y1) * (n_ - 1);
            const int k = std::min(static_cast<int>(t), n_ - 2);
            const double w = t - k;
            return nodal(k) * (1.0 - w) + nodal(k + 1) * w;
        }
        std::vector<double> xs(static_cast<std::size_t>(n_)), ys(static_cast<std::size_t>(n_));
        for (int i = 0; i < n_; ++i) {
            xs[static_cast<std::size_t>(i)] = static_cast<double>(i + 1) / n_;
            ys[static_cast<std::size_t>(i)] = nodal(i);
        }
        return CubicSpline(std::move(xs), std::move(ys))(y);
    }

private:
    int n_;
    LiftInterpolation mode_;
};

} // namespace

ContinuumParams lift_discrete(const DiscreteParams& d, LiftInterpolation interp) {
    auto rep = validate(d);
    if (!rep.pass) throw ConfigError("lift_discrete: discrete parameters fail validation");

    const int n = d.n;
    const int m = d.m;
    auto ni = std::make_shared<NodalInterp>(n, interp);
    // shared_ptr copies of the arrays keep the returned closures self-contained
    auto dd = std::make_shared<DiscreteParams>(d);

    ContinuumParams c;
    c.m = m;
    c.mu = d.mu;
    c.psi = d.psi;
    c.lambda = [ni, dd](double x, double y) {
        return ni->eval([&](int i) { return dd->lambda[static_cast<std::size_t>(i)](x); }, y);
    };
    c.sigma = [ni, dd](double x, double y, double eta) {
        return ni->eval(
            [&](int i) {
                return ni->eval([&](int l) { return dd->sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)](x); }, eta);
            },
            y);
    };
    c.W.resize(static_cast<std::size_t>(m));
    c.theta.resize(static_cast<std::size_t>(m));
    c.Q.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        c.W[static_cast<std::size_t>(j)] = [ni, dd, j](double x, double y) {
            return ni->eval([&](int i) { return dd->w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](x); }, y);
        };
        c.theta[static_cast<std::size_t>(j)] = [ni, dd, j](double x, double y) {
            return ni->eval([&](int i) { return dd->theta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)](x); }, y);
        };
        c.Q[static_cast<std::size_t>(j)] = [ni, dd, j](double y) {
            return ni->eval([&](int i) { return dd->q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]; }, y);
        };
    }
    c.l1 = d.l1.empty() ? default_l1(c.mu, c.psi) : d.l1;

    auto crep = validate(c);
    if (!crep.pass) {
        std::string msg = "lift_discrete: lifted parameters fail validation:";
        for (const auto& v : crep.violations) msg += " [" + v.assumption + " at " + v.location + "]";
        throw ConfigError(msg);
    }
    return c;
}

namespace {

/// Cell index for the half-open partition ((i-1)/n, i/n], robust to fp noise
/// at the edges: an edge value l/n maps to cell l.
int step_cell(double y, int n) {
    if (y <= 0.0) return 0;
    const int c = static_cast<int>(std::ceil(y * n - 1e-12)) - 1;
    return std::min(std::max(c, 0), n - 1);
}

} // namespace

ContinuumParams make_step_params(const DiscreteParams& d) {
    auto rep = validate(d);
    if (!rep.pass) throw ConfigError("make_step_params: discrete parameters fail validation");

    const int n = d.n;
    const int m = d.m;
    auto dd = std::make_shared<DiscreteParams>(d);

    ContinuumParams c;
    c.m = m;
    c.mu = d.mu;
    c.psi = d.psi;
    c.lambda = [dd, n](double x, double y) { return dd->lambda[static_cast<std::size_t>(step_cell(y, n))](x); };
    c.sigma = [dd, n](double x, double y, double eta) {
        return dd->sigma[static_cast<std::size_t>(step_cell(y, n))][static_cast<std::size_t>(step_cell(eta, n))](x);
    };
    c.W.resize(static_cast<std::size_t>(m));
    c.theta.resize(static_cast<std::size_t>(m));
    c.Q.resize(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) {
        c.W[static_cast<std::size_t>(j)] = [dd, n, j](double x, double y) {
            return dd->w[static_cast<std::size_t>(step_cell(y, n))][static_cast<std::size_t>(j)](x);
        };
        c.theta[static_cast<std::size_t>(j)] = [dd, n, j](double x, double y) {
            return dd->theta[static_cast<std::size_t>(j)][static_cast<std::size_t>(step_cell(y, n))](x);
        };
        c.Q[static_cast<std::size_t>(j)] = [dd, n, j](double y) {
            return dd->q[static_cast<std::size_t>(step_cell(y, n))][static_cast<std::size_t>(j)];
        };
    }
    c.l1 = d.l1.empty() ? default_l1(c.mu, c.psi) : d.l1;
    c.y_edges.resize(static_cast<std::size_t>(n) + 1);
    for (int l = 0; l <= n; ++l) c.y_edges[static_cast<std::size_t>(l)] = static_cast<double>(l) / n;
    return c;
}

} // namespace hyperstab
