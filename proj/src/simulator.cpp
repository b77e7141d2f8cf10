#include "hyperstab/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "hyperstab/errors.hpp"
#include "hyperstab/numerics.hpp"

namespace hyperstab {

ControllerHook zero_controller(int m) {
    return [m](const StateSnapshot&) { return std::vector<double>(static_cast<std::size_t>(m), 0.0); };
}

ControllerHook sampled_gain_controller(SampledGains gains) {
    return [g = std::move(gains)](const StateSnapshot& s) { return eval_control_sampled(g, s.view()); };
}

double e_norm(const StateSnapshot& s) {
    const double dx = 1.0 / (s.nx - 1);
    double acc = 0.0;
    for (int g = 0; g < s.nx; ++g) {
        double val = 0.0;
        for (int i = 0; i < s.n; ++i) {
            const double uv = s.u[static_cast<std::size_t>(i) * s.nx + g];
            val += uv * uv;
        }
        val /= s.n;
        for (int j = 0; j < s.m; ++j) {
            const double vv = s.v[static_cast<std::size_t>(j) * s.nx + g];
            val += vv * vv;
        }
        acc += (g == 0 || g + 1 == s.nx) ? 0.5 * dx * val : dx * val;
    }
    return std::sqrt(acc);
}

double ec_norm(const TargetSnapshot& s) {
    const double dx = 1.0 / (s.nx - 1);
    double acc = 0.0;
    for (int g = 0; g < s.nx; ++g) {
        double val = 0.0;
        for (int i = 0; i < s.n; ++i) {
            const double uv = s.alpha[static_cast<std::size_t>(i) * s.nx + g];
            val += uv * uv;
        }
        val /= s.n;
        for (int j = 0; j < s.m; ++j) {
            const double vv = s.beta[static_cast<std::size_t>(j) * s.nx + g];
            val += vv * vv;
        }
        acc += (g == 0 || g + 1 == s.nx) ? 0.5 * dx * val : dx * val;
    }
    return std::sqrt(acc);
}

namespace {

/// Plant coefficients tabulated on the simulator grid.
struct SimTables {
    int n, m, nx;
    double dx;
    std::vector<double> lam;   ///< (i * nx + g)
    std::vector<double> mu;    ///< (j * nx + g)
    std::vector<double> sig;   ///< ((i * n + l) * nx + g)
    std::vector<double> w;     ///< ((i * m + j) * nx + g)
    std::vector<double> th;    ///< ((j * n + i) * nx + g)
    std::vector<double> psi;   ///< ((j * m + l) * nx + g)
    std::vector<double> q;     ///< (i * m + j)
    double vmax = 0.0;

    SimTables(const DiscreteParams& d, int nx_) : n(d.n), m(d.m), nx(nx_), dx(1.0 / (nx_ - 1)) {
        lam.resize(static_cast<std::size_t>(n) * nx);
        mu.resize(static_cast<std::size_t>(m) * nx);
        sig.resize(static_cast<std::size_t>(n) * n * nx);
        w.resize(static_cast<std::size_t>(n) * m * nx);
        th.resize(static_cast<std::size_t>(m) * n * nx);
        psi.resize(static_cast<std::size_t>(m) * m * nx);
        q.resize(static_cast<std::size_t>(n) * m);
        for (int g = 0; g < nx; ++g) {
            const double x = dx * g;
            for (int i = 0; i < n; ++i) {
                lam[static_cast<std::size_t>(i) * nx + g] = d.lambda[static_cast<std::size_t>(i)](x);
                for (int l = 0; l < n; ++l)
                    sig[(static_cast<std::size_t>(i) * n + l) * nx + g] =
                        d.sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)](x);
                for (int j = 0; j < m; ++j)
                    w[(static_cast<std::size_t>(i) * m + j) * nx + g] =
                        d.w[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](x);
            }
            for (int j = 0; j < m; ++j) {
                mu[static_cast<std::size_t>(j) * nx + g] = d.mu[static_cast<std::size_t>(j)](x);
                for (int i = 0; i < n; ++i)
                    th[(static_cast<std::size_t>(j) * n + i) * nx + g] =
                        d.theta[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)](x);
                for (int l = 0; l < m; ++l)
                    psi[(static_cast<std::size_t>(j) * m + l) * nx + g] =
                        d.psi[static_cast<std::size_t>(j)][static_cast<std::size_t>(l)](x);
            }
        }
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j)
                q[static_cast<std::size_t>(i) * m + j] = d.q[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        for (double v : lam) vmax = std::max(vmax, v);
        for (double v : mu) vmax = std::max(vmax, v);
    }
};

void rhs(const SimTables& T, const std::vector<double>& u, const std::vector<double>& v,
         std::vector<double>& du, std::vector<double>& dv) {
    const int n = T.n, m = T.m, nx = T.nx;
    const double inv_dx = 1.0 / T.dx;
    for (int i = 0; i < n; ++i) {
        const double* uc = u.data() + static_cast<std::size_t>(i) * nx;
        double* out = du.data() + static_cast<std::size_t>(i) * nx;
        out[0] = 0.0; // inflow row imposed algebraically
        for (int g = 1; g < nx; ++g) {
            double val = -T.lam[static_cast<std::size_t>(i) * nx + g] * (uc[g] - uc[g - 1]) * inv_dx;
            double cpl = 0.0;
            for (int l = 0; l < n; ++l)
                cpl += T.sig[(static_cast<std::size_t>(i) * n + l) * nx + g] *
                       u[static_cast<std::size_t>(l) * nx + g];
            val += cpl / n;
            for (int j = 0; j < m; ++j)
                val += T.w[(static_cast<std::size_t>(i) * m + j) * nx + g] *
                       v[static_cast<std::size_t>(j) * nx + g];
            out[g] = val;
        }
    }
    for (int j = 0; j < m; ++j) {
        const double* vc = v.data() + static_cast<std::size_t>(j) * nx;
        double* out = dv.data() + static_cast<std::size_t>(j) * nx;
        for (int g = 0; g + 1 < nx; ++g) {
            double val = T.mu[static_cast<std::size_t>(j) * nx + g] * (vc[g + 1] - vc[g]) * inv_dx;
            double cpl = 0.0;
            for (int i = 0; i < n; ++i)
                cpl += T.th[(static_cast<std::size_t>(j) * n + i) * nx + g] *
                       u[static_cast<std::size_t>(i) * nx + g];
            val += cpl / n;
            for (int l = 0; l < m; ++l)
                val += T.psi[(static_cast<std::size_t>(j) * m + l) * nx + g] *
                       v[static_cast<std::size_t>(l) * nx + g];
            out[g] = val;
        }
        out[nx - 1] = 0.0; // actuated row imposed algebraically
    }
}

} // namespace

Trajectory simulate(const DiscreteParams& d, const ControllerHook& control, const SimOptions& opts,
                    const std::function<double(int, double)>& u0,
                    const std::function<double(int, double)>& v0) {
    auto vrep = validate(d);
    if (!vrep.pass) throw ConfigError("simulate: discrete parameters fail validation");
    if (opts.nx < 8) throw ConfigError("simulate: nx must be >= 8");
    const SimTables T(d, opts.nx);
    const int n = T.n, m = T.m, nx = T.nx;

    StateSnapshot s;
    s.n = n;
    s.m = m;
    s.nx = nx;
    s.u.resize(static_cast<std::size_t>(n) * nx);
    s.v.resize(static_cast<std::size_t>(m) * nx);
    for (int i = 0; i < n; ++i)
        for (int g = 0; g < nx; ++g)
            s.u[static_cast<std::size_t>(i) * nx + g] = u0(i, T.dx * g);
    for (int j = 0; j < m; ++j)
        for (int g = 0; g < nx; ++g)
            s.v[static_cast<std::size_t>(j) * nx + g] = v0(j, T.dx * g);

    auto impose_bc = [&](StateSnapshot& y) {
        const std::vector<double> U = control(y);
        for (int j = 0; j < m; ++j)
            y.v[static_cast<std::size_t>(j) * nx + nx - 1] = U[static_cast<std::size_t>(j)];
        for (int i = 0; i < n; ++i) {
            double val = 0.0;
            for (int j = 0; j < m; ++j)
                val += T.q[static_cast<std::size_t>(i) * m + j] * y.v[static_cast<std::size_t>(j) * nx];
            y.u[static_cast<std::size_t>(i) * nx] = val;
        }
        return U;
    };

    Trajectory tr;
    const double dt =
        opts.dt_override > 0.0 ? opts.dt_override : opts.cfl * T.dx / std::max(T.vmax, 1e-12);
    const int steps = opts.T > 0.0 ? std::max(1, static_cast<int>(std::ceil(opts.T / dt - 1e-9))) : 0;
    tr.dt = dt;
    tr.steps = steps;

    std::vector<double> U0 = impose_bc(s);
    const double initial_norm = e_norm(s);
    auto save = [&](const StateSnapshot& y, const std::vector<double>& U) {
        tr.snapshots.push_back(y);
        tr.controls.push_back(U);
        tr.e_norms.push_back(e_norm(y));
        if (!std::isfinite(tr.e_norms.back()) ||
            tr.e_norms.back() > opts.blowup_factor * std::max(initial_norm, 1e-300))
            throw BlowupError("state norm exceeded the guard threshold", y.t, tr.e_norms.back());
    };
    save(s, U0);

    StateSnapshot stage = s;
    std::vector<double> k1(s.u.size()), k2(s.u.size()), k3(s.u.size()), k4(s.u.size());
    std::vector<double> k1v(s.v.size()), k2v(s.v.size()), k3v(s.v.size()), k4v(s.v.size());

    for (int step = 0; step < steps; ++step) {
        const double h = std::min(dt, opts.T - step * dt);
        rhs(T, s.u, s.v, k1, k1v);

        auto blend = [&](const std::vector<double>& ku, const std::vector<double>& kv, double f) {
            for (std::size_t q = 0; q < s.u.size(); ++q) stage.u[q] = s.u[q] + f * ku[q];
            for (std::size_t q = 0; q < s.v.size(); ++q) stage.v[q] = s.v[q] + f * kv[q];
        };
        stage.t = s.t + 0.5 * h;
        blend(k1, k1v, 0.5 * h);
        impose_bc(stage);
        rhs(T, stage.u, stage.v, k2, k2v);

        blend(k2, k2v, 0.5 * h);
        impose_bc(stage);
        rhs(T, stage.u, stage.v, k3, k3v);

        stage.t = s.t + h;
        blend(k3, k3v, h);
        impose_bc(stage);
        rhs(T, stage.u, stage.v, k4, k4v);

        for (std::size_t q = 0; q < s.u.size(); ++q)
            s.u[q] += h / 6.0 * (k1[q] + 2 * k2[q] + 2 * k3[q] + k4[q]);
        for (std::size_t q = 0; q < s.v.size(); ++q)
            s.v[q] += h / 6.0 * (k1v[q] + 2 * k2v[q] + 2 * k3v[q] + k4v[q]);
        s.t += h;
        const std::vector<double> U = impose_bc(s);

        if ((step + 1) % opts.save_stride == 0 || step + 1 == steps) save(s, U);
    }
    return tr;
}

// ---------------------------------------------------------------------------
// Transform machinery
// ---------------------------------------------------------------------------

TransformOperator::TransformOperator(const ContinuumKernelSet& ks, int n, int nx)
    : ks_(&ks), n_(n), nx_(nx), m_(ks.m), dx_(1.0 / (nx - 1)) {
    plans_.resize(static_cast<std::size_t>(m_) * nx_);
    for (int i = 0; i < m_; ++i) {
        for (int g = 0; g < nx_; ++g) {
            auto& plan = plans_[static_cast<std::size_t>(i) * nx_ + g];
            const double X = dx_ * g;
            if (X <= 1e-14) continue;
            // breakpoints: interior curves of family i at height X, descending
            std::vector<double> bp;
            for (int c = i + 1; c < m_; ++c) bp.push_back(ks.map.rho(i, c, X));
            // union nodes per sub-interval [lo, hi] with the owning segment
            double hi = X;
            for (int p = i; p < m_; ++p) {
                const double lo = p < m_ - 1 ? bp[static_cast<std::size_t>(p - i)] : 0.0;
                if (hi - lo > 1e-14) {
                    // trapezoid nodes: lo, grid nodes inside, hi
                    std::vector<double> nodes;
                    nodes.push_back(lo);
                    for (int gg = static_cast<int>(std::floor(lo / dx_)) + 1; gg * dx_ < hi - 1e-14 && gg < nx_;
                         ++gg)
                        if (gg * dx_ > lo + 1e-14) nodes.push_back(gg * dx_);
                    nodes.push_back(hi);
                    for (std::size_t k = 0; k + 1 < nodes.size(); ++k) {
                        const double w = 0.5 * (nodes[k + 1] - nodes[k]);
                        plan.push_back({nodes[k], w, p, 0});
                        plan.push_back({nodes[k + 1], w, p, 0});
                    }
                }
                hi = lo;
            }
        }
    }

    // cache the cell-mean gain rows at every plan entry; they do not depend
    // on the state
    std::vector<double> row(static_cast<std::size_t>(ks.ygrid.size()));
    for (int i = 0; i < m_; ++i)
        for (int g = 0; g < nx_; ++g) {
            const double X = dx_ * g;
            for (auto& e : plans_[static_cast<std::size_t>(i) * nx_ + g]) {
                e.gain_off = gains_.size();
                ks.eval_K_row_on_segment(i, e.p, X, e.xi, row);
                for (int l = 0; l < n_; ++l)
                    gains_.push_back(n_ * ks.ygrid.integrate_interval(row, static_cast<double>(l) / n_,
                                                                      static_cast<double>(l + 1) / n_));
            }
        }

    // fold the scalar-family quadrature onto grid nodes for the forward solve
    Lw_.resize(static_cast<std::size_t>(nx_));
    for (int g = 0; g < nx_; ++g) {
        auto& W = Lw_[static_cast<std::size_t>(g)];
        W.assign(static_cast<std::size_t>(m_) * m_ * (g + 1), 0.0);
        const double X = dx_ * g;
        for (int i = 0; i < m_; ++i) {
            for (const auto& e : plans_[static_cast<std::size_t>(i) * nx_ + g]) {
                const double t = std::clamp(e.xi, 0.0, X) / dx_;
                const int h0 = std::min(static_cast<int>(t), g > 0 ? g - 1 : 0);
                const double wloc = t - h0;
                for (int j = 0; j < m_; ++j) {
                    const double lv = ks.eval_L_on_segment(i, j, e.p, X, e.xi);
                    if (lv == 0.0) continue;
                    W[(static_cast<std::size_t>(i) * m_ + j) * (g + 1) + h0] += e.w * lv * (1 - wloc);
                    W[(static_cast<std::size_t>(i) * m_ + j) * (g + 1) + std::min(h0 + 1, g)] +=
                        e.w * lv * wloc;
                }
            }
        }
    }
}

namespace {

double lerp_col(const double* col, int nx, double x) {
    const double t = std::clamp(x, 0.0, 1.0) * (nx - 1);
    const int g0 = std::min(static_cast<int>(t), nx - 2);
    const double w = t - g0;
    return col[g0] * (1 - w) + col[g0 + 1] * w;
}

} // namespace

double TransformOperator::kernel_part(int i, int g, const std::vector<double>& u) const {
    const auto& plan = plans_[static_cast<std::size_t>(i) * nx_ + g];
    double acc = 0.0;
    for (const auto& e : plan) {
        const double* kbar = gains_.data() + e.gain_off;
        double uval = 0.0;
        for (int l = 0; l < n_; ++l)
            if (kbar[l] != 0.0)
                uval += kbar[l] * lerp_col(u.data() + static_cast<std::size_t>(l) * nx_, nx_, e.xi);
        acc += e.w * uval / n_;
    }
    return acc;
}

TargetSnapshot TransformOperator::apply(const StateSnapshot& s) const {
    if (s.nx != nx_ || s.n != n_ || s.m != m_)
        throw ConfigError("TransformOperator::apply: state grid mismatch");
    TargetSnapshot t;
    t.t = s.t;
    t.n = s.n;
    t.m = s.m;
    t.nx = s.nx;
    t.alpha = s.u;
    t.beta.assign(static_cast<std::size_t>(m_) * nx_, 0.0);
    for (int g = 0; g < nx_; ++g) {
        for (int i = 0; i < m_; ++i) {
            const auto& W = Lw_[static_cast<std::size_t>(g)];
            double lpart = 0.0;
            for (int j = 0; j < m_; ++j) {
                const double* wrow = W.data() + (static_cast<std::size_t>(i) * m_ + j) * (g + 1);
                const double* vcol = s.v.data() + static_cast<std::size_t>(j) * nx_;
                for (int h = 0; h <= g; ++h) lpart += wrow[h] * vcol[h];
            }
            t.beta[static_cast<std::size_t>(i) * nx_ + g] =
                s.v[static_cast<std::size_t>(i) * nx_ + g] - lpart - kernel_part(i, g, s.u);
        }
    }
    return t;
}

StateSnapshot TransformOperator::invert(const TargetSnapshot& t) const {
    if (t.nx != nx_ || t.m != m_) throw ConfigError("TransformOperator::invert: grid mismatch");
    StateSnapshot s;
    s.t = t.t;
    s.n = t.n;
    s.m = t.m;
    s.nx = t.nx;
    s.u = t.alpha;
    s.v.assign(static_cast<std::size_t>(m_) * nx_, 0.0);

    // second-kind Volterra system solved by forward substitution in x
    for (int g = 0; g < nx_; ++g) {
        const auto& W = Lw_[static_cast<std::size_t>(g)];
        std::vector<double> rhsv(static_cast<std::size_t>(m_));
        for (int i = 0; i < m_; ++i) {
            double acc = t.beta[static_cast<std::size_t>(i) * nx_ + g] + kernel_part(i, g, s.u);
            for (int j = 0; j < m_; ++j) {
                const double* wrow = W.data() + (static_cast<std::size_t>(i) * m_ + j) * (g + 1);
                const double* vcol = s.v.data() + static_cast<std::size_t>(j) * nx_;
                for (int h = 0; h < g; ++h) acc += wrow[h] * vcol[h];
            }
            rhsv[static_cast<std::size_t>(i)] = acc;
        }
        std::vector<double> A(static_cast<std::size_t>(m_) * m_, 0.0);
        for (int i = 0; i < m_; ++i)
            for (int j = 0; j < m_; ++j)
                A[static_cast<std::size_t>(i) * m_ + j] =
                    (i == j ? 1.0 : 0.0) -
                    W[(static_cast<std::size_t>(i) * m_ + j) * (g + 1) + g];
        const auto vg = solve_dense(std::move(A), std::move(rhsv));
        for (int j = 0; j < m_; ++j) s.v[static_cast<std::size_t>(j) * nx_ + g] = vg[static_cast<std::size_t>(j)];
    }
    return s;
}

std::vector<double> TransformOperator::control(const StateSnapshot& s) const {
    std::vector<double> U(static_cast<std::size_t>(m_));
    const int g = nx_ - 1;
    for (int i = 0; i < m_; ++i) {
        const auto& W = Lw_[static_cast<std::size_t>(g)];
        double lpart = 0.0;
        for (int j = 0; j < m_; ++j) {
            const double* wrow = W.data() + (static_cast<std::size_t>(i) * m_ + j) * (g + 1);
            const double* vcol = s.v.data() + static_cast<std::size_t>(j) * nx_;
            for (int h = 0; h <= g; ++h) lpart += wrow[h] * vcol[h];
        }
        U[static_cast<std::size_t>(i)] = lpart + kernel_part(i, g, s.u);
    }
    return U;
}

// ---------------------------------------------------------------------------
// Decay certificates
// ---------------------------------------------------------------------------

LyapunovParams choose_lyapunov_params(const KernelBounds& b, int m, double margin) {
    LyapunovParams lp;
    const double bound =
        std::max((2.0 * b.m_lambda * (b.M_sigma + b.M_Cplus) + 2.0) / (b.m_lambda * b.m_lambda),
                 (b.M_W * b.M_W + b.M_Cminus * b.M_Cminus + m * b.M_G) / b.m_mu);
    lp.delta = margin * bound;
    lp.c_V = lp.delta - bound;
    lp.D.resize(static_cast<std::size_t>(m));
    const double qfac = std::max(b.M_Q * b.M_Q, 1.0);
    for (int j = 0; j < m; ++j) {
        const int j1 = j + 1; // 1-based position in the chain
        lp.D[static_cast<std::size_t>(j)] =
            margin * (1.0 + (m - j1) * m * b.M_G * std::exp(lp.delta) / (lp.delta * b.m_mu)) * qfac;
    }
    lp.F.assign(static_cast<std::size_t>(m), 0.0);
    for (int j = 0; j < m; ++j)
        for (int i2 = j + 1; i2 < m; ++i2) lp.F[static_cast<std::size_t>(j)] += lp.D[static_cast<std::size_t>(i2)];
    return lp;
}

double lyapunov_value(const TargetSnapshot& t, const LyapunovParams& lp, const ContinuumParams& p,
                      int n) {
    const double dx = 1.0 / (t.nx - 1);
    double acc = 0.0;
    for (int g = 0; g < t.nx; ++g) {
        const double x = dx * g;
        double val = 0.0;
        for (int i = 0; i < n; ++i) {
            const double a = t.alpha[static_cast<std::size_t>(i) * t.nx + g];
            val += std::exp(-lp.delta * x) * a * a / p.lambda(x, static_cast<double>(i + 1) / n) / n;
        }
        for (int j = 0; j < t.m; ++j) {
            const double bvl = t.beta[static_cast<std::size_t>(j) * t.nx + g];
            val += std::exp(lp.delta * x) * lp.D[static_cast<std::size_t>(j)] * bvl * bvl /
                   p.mu[static_cast<std::size_t>(j)](x);
        }
        acc += (g == 0 || g + 1 == t.nx) ? 0.5 * dx * val : dx * val;
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Family convergence study
// ---------------------------------------------------------------------------

ConvergenceReport convergence_study(const std::function<DiscreteParams(int)>& family,
                                    const std::vector<int>& n_list,
                                    const std::function<double(int, int, double)>& u0_of_n,
                                    const std::function<double(int, double)>& v0,
                                    const ControllerHook& control_of_m,
                                    const ConvergenceOptions& opts) {
    if (n_list.empty()) throw ConfigError("convergence_study: empty n list");
    ConvergenceReport rep;
    rep.n_list = n_list;
    rep.n_ref = opts.n_ref_factor * *std::max_element(n_list.begin(), n_list.end());

    auto run_all = [&](int nx) {
        // a shared time step keeps saved states on identical time grids
        double dt = 1e300;
        auto dt_of = [&](const DiscreteParams& d) {
            SimTables T(d, nx);
            return opts.sim.cfl * T.dx / std::max(T.vmax, 1e-12);
        };
        const DiscreteParams dref = family(rep.n_ref);
        dt = std::min(dt, dt_of(dref));
        for (int n : n_list) dt = std::min(dt, dt_of(family(n)));
        SimOptions so = opts.sim;
        so.nx = nx;
        so.dt_override = opts.sim.T / std::ceil(opts.sim.T / dt);

        auto ref = simulate(dref, control_of_m, so,
                            [&](int i, double x) { return u0_of_n(rep.n_ref, i, x); }, v0);

        std::vector<double> dist;
        for (int n : n_list) {
            const bool divides = rep.n_ref % n == 0;
            auto tr = simulate(family(n), control_of_m, so,
                               [&](int i, double x) { return u0_of_n(n, i, x); }, v0);
            double worst = 0.0;
            for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
                const auto& a = tr.snapshots[k];
                const auto& b = ref.snapshots[std::min(k, ref.snapshots.size() - 1)];
                // cell means of the reference rows over each coarse cell
                double acc = 0.0;
                const double dxg = 1.0 / (nx - 1);
                for (int g = 0; g < nx; ++g) {
                    double val = 0.0;
                    for (int i = 0; i < n; ++i) {
                        double mean = 0.0;
                        if (divides) {
                            const int kk = rep.n_ref / n;
                            for (int r = 0; r < kk; ++r)
                                mean += b.u[static_cast<std::size_t>(i * kk + r) * nx + g];
                            mean /= kk;
                        } else {
                            // resample by averaging the reference cells overlapping cell i
                            const double lo = static_cast<double>(i) / n, hi = static_cast<double>(i + 1) / n;
                            int cnt = 0;
                            for (int r = 0; r < rep.n_ref; ++r) {
                                const double mid = (r + 0.5) / rep.n_ref;
                                if (mid > lo && mid <= hi) {
                                    mean += b.u[static_cast<std::size_t>(r) * nx + g];
                                    ++cnt;
                                }
                            }
                            mean /= std::max(cnt, 1);
                        }
                        const double dv = a.u[static_cast<std::size_t>(i) * nx + g] - mean;
                        val += dv * dv;
                    }
                    val /= n;
                    for (int j = 0; j < a.m; ++j) {
                        const double dv = a.v[static_cast<std::size_t>(j) * nx + g] -
                                          b.v[static_cast<std::size_t>(j) * nx + g];
                        val += dv * dv;
                    }
                    acc += (g == 0 || g + 1 == nx) ? 0.5 * dxg * val : dxg * val;
                }
                worst = std::max(worst, std::sqrt(acc));
            }
            dist.push_back(worst);
            if (nx == opts.sim.nx) rep.resampled.push_back(!divides);
        }
        return dist;
    };

    rep.distances = run_all(opts.sim.nx);
    rep.ratio_last_first = rep.distances.back() / std::max(rep.distances.front(), 1e-300);
    if (opts.check_nx_sensitivity) {
        const auto fine = run_all(2 * (opts.sim.nx - 1) + 1);
        double worst = 0.0;
        for (std::size_t k = 0; k < fine.size(); ++k)
            worst = std::max(worst, std::abs(fine[k] - rep.distances[k]) /
                                        std::max(rep.distances[k], 1e-300));
        rep.nx_sensitivity = worst;
    }
    return rep;
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

void save_trajectory_csv(const Trajectory& tr, const std::string& file) {
    std::ofstream os(file);
    os.precision(17);
    if (tr.snapshots.empty()) return;
    const auto& s0 = tr.snapshots.front();
    os << "t";
    for (int i = 0; i < s0.n; ++i)
        for (int g = 0; g < s0.nx; ++g) os << ",u" << i + 1 << "_" << g;
    for (int j = 0; j < s0.m; ++j)
        for (int g = 0; g < s0.nx; ++g) os << ",v" << j + 1 << "_" << g;
    os << "\n";
    for (const auto& s : tr.snapshots) {
        os << s.t;
        for (double v : s.u) os << "," << v;
        for (double v : s.v) os << "," << v;
        os << "\n";
    }
}

void save_norms_csv(const Trajectory& tr, const std::vector<double>& lyap, const std::string& file) {
    std::ofstream os(file);
    os.precision(17);
    os << (lyap.empty() ? "t,e_norm" : "t,e_norm,lyapunov") << "\n";
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        os << tr.snapshots[k].t << "," << tr.e_norms[k];
        if (!lyap.empty()) os << "," << lyap[k];
        os << "\n";
    }
}

void save_controls_csv(const Trajectory& tr, const std::string& file) {
    std::ofstream os(file);
    os.precision(17);
    if (tr.snapshots.empty()) return;
    os << "t";
    for (std::size_t j = 0; j < tr.controls.front().size(); ++j) os << ",U" << j + 1;
    os << "\n";
    for (std::size_t k = 0; k < tr.snapshots.size(); ++k) {
        os << tr.snapshots[k].t;
        for (double v : tr.controls[k]) os << "," << v;
        os << "\n";
    }
}

} // namespace hyperstab
