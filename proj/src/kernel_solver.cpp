#include "hyperstab/kernel_solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "hyperstab/errors.hpp"
#include "hyperstab/example_system.hpp"
#include "hyperstab/threads.hpp"

namespace hyperstab {

namespace {

// ---------------------------------------------------------------------------
// Parameter tabulation. Every user function is sampled once onto regular
// grids so the fixed-point sweeps touch only flat arrays.
// ---------------------------------------------------------------------------

struct FineLoc {
    int g;
    double w;
};

class Tables {
public:
    Tables(const ContinuumParams& P, const SolveOptions& O)
        : m(P.m), nx(O.nx), nr(O.nr) {
        nfine = std::max(257, 2 * (nx - 1) + 1);
        hfine = 1.0 / (nfine - 1);

        if (P.y_edges.empty()) {
            yg = YGrid::uniform(O.ny);
        } else {
            const int ncells = static_cast<int>(P.y_edges.size()) - 1;
            const int per_cell =
                std::max(2, static_cast<int>(std::llround(static_cast<double>(O.ny - 1) / ncells)) + 1);
            yg = YGrid(P.y_edges, per_cell);
        }
        nyn = yg.size();
        const auto ypts = yg.eval_points();

        map = build_segment_map(P, nfine);

        lam.resize(static_cast<std::size_t>(nfine) * nyn);
        dlam.resize(lam.size());
        sig.resize(static_cast<std::size_t>(nfine) * nyn * nyn);
        th.assign(static_cast<std::size_t>(m), std::vector<double>(lam.size()));
        Wt.assign(static_cast<std::size_t>(m), std::vector<double>(lam.size()));
        mu.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(nfine)));
        dmu.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(nfine)));
        psi.assign(static_cast<std::size_t>(m),
                   std::vector<std::vector<double>>(static_cast<std::size_t>(m),
                                                    std::vector<double>(static_cast<std::size_t>(nfine))));
        l1.assign(static_cast<std::size_t>(m),
                  std::vector<std::vector<double>>(static_cast<std::size_t>(m)));
        Qt.assign(static_cast<std::size_t>(m), std::vector<double>(static_cast<std::size_t>(nyn)));

        for (int g = 0; g < nfine; ++g) {
            const double x = hfine * g;
            for (int c = 0; c < nyn; ++c)
                lam[idx2(g, c)] = P.lambda(x, ypts[static_cast<std::size_t>(c)]);
            for (int e = 0; e < nyn; ++e)
                for (int c = 0; c < nyn; ++c)
                    sig[(static_cast<std::size_t>(g) * nyn + e) * nyn + c] =
                        P.sigma(x, ypts[static_cast<std::size_t>(e)], ypts[static_cast<std::size_t>(c)]);
            for (int j = 0; j < m; ++j) {
                for (int c = 0; c < nyn; ++c) {
                    th[static_cast<std::size_t>(j)][idx2(g, c)] =
                        P.theta[static_cast<std::size_t>(j)](x, ypts[static_cast<std::size_t>(c)]);
                    Wt[static_cast<std::size_t>(j)][idx2(g, c)] =
                        P.W[static_cast<std::size_t>(j)](x, ypts[static_cast<std::size_t>(c)]);
                }
                mu[static_cast<std::size_t>(j)][static_cast<std::size_t>(g)] =
                    P.mu[static_cast<std::size_t>(j)](x);
                for (int i2 = 0; i2 < m; ++i2)
                    psi[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)][static_cast<std::size_t>(g)] =
                        P.psi[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)](x);
            }
        }
        for (int i2 = 0; i2 < m; ++i2)
            for (int j = 0; j < i2; ++j) {
                auto& t = l1[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)];
                t.resize(static_cast<std::size_t>(nfine));
                const Fn1& f = P.l1[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)];
                if (!f)
                    throw ConfigError("missing boundary data l1 for pair (" + std::to_string(i2 + 1) +
                                      "," + std::to_string(j + 1) + ")");
                for (int g = 0; g < nfine; ++g) t[static_cast<std::size_t>(g)] = f(hfine * g);
            }
        for (int j = 0; j < m; ++j)
            for (int c = 0; c < nyn; ++c)
                Qt[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)] =
                    P.Q[static_cast<std::size_t>(j)](ypts[static_cast<std::size_t>(c)]);

        // derivative tables, centered in the interior
        auto fd = [&](const std::vector<double>& f, std::vector<double>& df, int stride, int count) {
            for (int k = 0; k < count; ++k) {
                auto v = [&](int g) { return f[static_cast<std::size_t>(g) * stride + k]; };
                auto& d = df;
                d[static_cast<std::size_t>(0) * stride + k] = (-3 * v(0) + 4 * v(1) - v(2)) / (2 * hfine);
                for (int g = 1; g + 1 < nfine; ++g)
                    d[static_cast<std::size_t>(g) * stride + k] = (v(g + 1) - v(g - 1)) / (2 * hfine);
                d[static_cast<std::size_t>(nfine - 1) * stride + k] =
                    (3 * v(nfine - 1) - 4 * v(nfine - 2) + v(nfine - 3)) / (2 * hfine);
            }
        };
        fd(lam, dlam, nyn, nyn);
        for (int j = 0; j < m; ++j) fd(mu[static_cast<std::size_t>(j)], dmu[static_cast<std::size_t>(j)], 1, 1);

        // speed extrema for the path step
        vmax = 0.0;
        for (double v : lam) vmax = std::max(vmax, v);
        for (int j = 0; j < m; ++j)
            for (double v : mu[static_cast<std::size_t>(j)]) vmax = std::max(vmax, v);

        // characteristic coordinate along xi for each y node
        Phi.reserve(static_cast<std::size_t>(nyn));
        for (int c = 0; c < nyn; ++c) {
            std::vector<double> vals(static_cast<std::size_t>(nfine), 0.0);
            for (int g = 1; g < nfine; ++g)
                vals[static_cast<std::size_t>(g)] =
                    vals[static_cast<std::size_t>(g) - 1] +
                    0.5 * hfine * (1.0 / lam[idx2(g - 1, c)] + 1.0 / lam[idx2(g, c)]);
            Phi.emplace_back(0.0, 1.0, std::move(vals));
        }

        // group y nodes sharing identical characteristics (exact table equality)
        group_of.assign(static_cast<std::size_t>(nyn), -1);
        for (int c = 0; c < nyn; ++c) {
            for (std::size_t gidx = 0; gidx < group_rep.size(); ++gidx) {
                const auto& a = Phi[static_cast<std::size_t>(group_rep[gidx])].values();
                const auto& b = Phi[static_cast<std::size_t>(c)].values();
                bool same = true;
                for (std::size_t k = 0; k < a.size(); ++k)
                    if (a[k] != b[k]) { same = false; break; }
                if (same) {
                    group_of[static_cast<std::size_t>(c)] = static_cast<int>(gidx);
                    break;
                }
            }
            if (group_of[static_cast<std::size_t>(c)] < 0) {
                group_of[static_cast<std::size_t>(c)] = static_cast<int>(group_rep.size());
                group_rep.push_back(c);
            }
        }
        group_runs.resize(group_rep.size());
        for (std::size_t gidx = 0; gidx < group_rep.size(); ++gidx) {
            auto& runs = group_runs[gidx];
            int c = 0;
            while (c < nyn) {
                if (group_of[static_cast<std::size_t>(c)] != static_cast<int>(gidx)) { ++c; continue; }
                int c2 = c;
                while (c2 < nyn && group_of[static_cast<std::size_t>(c2)] == static_cast<int>(gidx)) ++c2;
                runs.push_back({c, c2 - c});
                c = c2;
            }
        }
    }

    std::size_t idx2(int g, int c) const { return static_cast<std::size_t>(g) * nyn + c; }

    FineLoc floc(double x) const {
        double t = x * (nfine - 1);
        t = std::clamp(t, 0.0, static_cast<double>(nfine - 1));
        const int g = std::min(static_cast<int>(t), nfine - 2);
        return {g, t - g};
    }

    double lam_at(double x, int c) const {
        const auto f = floc(x);
        return lam[idx2(f.g, c)] * (1 - f.w) + lam[idx2(f.g + 1, c)] * f.w;
    }
    double dlam_at(double x, int c) const {
        const auto f = floc(x);
        return dlam[idx2(f.g, c)] * (1 - f.w) + dlam[idx2(f.g + 1, c)] * f.w;
    }
    double mu_at(int j, double x) const {
        const auto f = floc(x);
        const auto& t = mu[static_cast<std::size_t>(j)];
        return t[static_cast<std::size_t>(f.g)] * (1 - f.w) + t[static_cast<std::size_t>(f.g) + 1] * f.w;
    }
    double dmu_at(int j, double x) const {
        const auto f = floc(x);
        const auto& t = dmu[static_cast<std::size_t>(j)];
        return t[static_cast<std::size_t>(f.g)] * (1 - f.w) + t[static_cast<std::size_t>(f.g) + 1] * f.w;
    }
    double psi_at(int i2, int j, double x) const {
        const auto f = floc(x);
        const auto& t = psi[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)];
        return t[static_cast<std::size_t>(f.g)] * (1 - f.w) + t[static_cast<std::size_t>(f.g) + 1] * f.w;
    }
    double theta_at(int j, double x, int c) const {
        const auto f = floc(x);
        const auto& t = th[static_cast<std::size_t>(j)];
        return t[idx2(f.g, c)] * (1 - f.w) + t[idx2(f.g + 1, c)] * f.w;
    }
    double W_at(int j, double x, int c) const {
        const auto f = floc(x);
        const auto& t = Wt[static_cast<std::size_t>(j)];
        return t[idx2(f.g, c)] * (1 - f.w) + t[idx2(f.g + 1, c)] * f.w;
    }
    double l1_at(int i2, int j, double xi) const {
        const auto f = floc(xi);
        const auto& t = l1[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)];
        return t[static_cast<std::size_t>(f.g)] * (1 - f.w) + t[static_cast<std::size_t>(f.g) + 1] * f.w;
    }

    int m, nx, nr;
    int nfine = 0, nyn = 0;
    double hfine = 0, vmax = 0;
    YGrid yg;
    SegmentMap map;

    std::vector<double> lam, dlam, sig;
    std::vector<std::vector<double>> th, Wt, mu, dmu, Qt;
    std::vector<std::vector<std::vector<double>>> psi, l1;
    std::vector<MonotoneTable> Phi;

    struct Run {
        int lo, len;
    };
    std::vector<int> group_of, group_rep;
    std::vector<std::vector<Run>> group_runs;
};

// ---------------------------------------------------------------------------
// Solver
// ---------------------------------------------------------------------------

class Solver {
public:
    Solver(const ContinuumParams& P, const SolveOptions& O) : P_(P), O_(O), T_(P, O) {
        if (O.nx < 8 || O.nr < 8 || O.ny < 8) throw ConfigError("solver grid must be >= 8 per axis");
        if (!(O.tol > 0.0)) throw ConfigError("solver tol must be positive");
        m_ = P.m;
        nx_ = O.nx;
        nr_ = O.nr;
        nyn_ = T_.nyn;
        hx_ = 1.0 / (nx_ - 1);
        ds_ = hx_ / T_.vmax;
        threads_ = resolve_threads(O.threads);

        for (int i = 0; i < m_; ++i)
            for (int p = i; p < m_; ++p) segs_.emplace_back(i, p);

        // shared curve tables per family keep adjacent segments exactly consistent
        for (int i = 0; i < m_; ++i) {
            auto& curves = curves_.emplace_back();
            curves.resize(static_cast<std::size_t>(m_ - i + 1));
            for (int c = i; c <= m_; ++c) {
                auto& col = curves[static_cast<std::size_t>(c - i)];
                col.resize(static_cast<std::size_t>(nx_));
                for (int a = 0; a < nx_; ++a) {
                    const double x = hx_ * a;
                    col[static_cast<std::size_t>(a)] = c == i ? x : (c == m_ ? 0.0 : T_.map.rho(i, c, x));
                }
            }
        }

        K_.resize(segs_.size());
        L_.resize(segs_.size());
        for (std::size_t s = 0; s < segs_.size(); ++s) {
            const auto [i, p] = segs_[s];
            SegmentGrid g;
            g.i = i;
            g.p = p;
            g.nx = nx_;
            g.nr = nr_;
            g.lo = curves_[static_cast<std::size_t>(i)][static_cast<std::size_t>(p + 1 - i)];
            g.up = curves_[static_cast<std::size_t>(i)][static_cast<std::size_t>(p - i)];
            K_[s].g = g;
            K_[s].nyn = nyn_;
            K_[s].v.assign(static_cast<std::size_t>(nx_) * nr_ * nyn_, 0.0);
            L_[s].resize(static_cast<std::size_t>(m_));
            for (int j = 0; j < m_; ++j) {
                L_[s][static_cast<std::size_t>(j)].g = g;
                L_[s][static_cast<std::size_t>(j)].v.assign(static_cast<std::size_t>(nx_) * nr_, 0.0);
            }
        }
        F_.assign(static_cast<std::size_t>(nx_) * nr_ * nyn_, 0.0);
        FL_.assign(static_cast<std::size_t>(nx_) * nr_, 0.0);
    }

    ContinuumKernelSet run() {
        std::vector<double> history;
        bool converged = false;
        int it = 0;
        while (it < O_.max_iter) {
            ++it;
            double delta = 0.0;
            for (std::size_t s = 0; s < segs_.size(); ++s)
                delta = std::max(delta, update_K_segment(static_cast<int>(s)));
            Lsnap_ = L_;
            for (int i = 0; i < m_; ++i)
                for (int j = 0; j < m_; ++j) delta = std::max(delta, sweep_L(i, j));
            history.push_back(delta);
            if (delta <= O_.tol) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw ConvergenceError("kernel iteration did not reach tol " + std::to_string(O_.tol) +
                                       " in " + std::to_string(O_.max_iter) + " sweeps",
                                   history);

        ContinuumKernelSet ks;
        ks.m = m_;
        ks.map = T_.map;
        ks.ygrid = T_.yg;
        ks.segments = segs_;
        ks.K = std::move(K_);
        ks.L = std::move(L_);
        ks.x_nodes = linspace(0.0, 1.0, nx_);
        ks.iterations = it;
        ks.final_delta = history.back();
        ks.tol = O_.tol;
        ks.update_history = std::move(history);
        ks.G = compute_G(ks, P_);
        return ks;
    }

private:
    int seg_index(int i, int p) const {
        for (std::size_t s = 0; s < segs_.size(); ++s)
            if (segs_[s].first == i && segs_[s].second == p) return static_cast<int>(s);
        throw GeometryError("bad segment request");
    }

    // --- forcing assembly -------------------------------------------------

    void assemble_K_forcing(int s) {
        const KTable& K = K_[static_cast<std::size_t>(s)];
        const auto& yw = T_.yg.weights();
        parallel_for(nx_, threads_, [&](int a) {
            std::vector<double> conv(static_cast<std::size_t>(nyn_));
            for (int b = 0; b < nr_; ++b) {
                const double xi = K.g.xi_of(a, b);
                const auto f = T_.floc(xi);
                const double* krow = K.row(a, b);
                double* Frow = F_.data() + (static_cast<std::size_t>(a) * nr_ + b) * nyn_;
                std::fill(conv.begin(), conv.end(), 0.0);
                for (int e = 0; e < nyn_; ++e) {
                    const double coef = yw[static_cast<std::size_t>(e)] * krow[e];
                    if (coef == 0.0) continue;
                    const double* s0 = T_.sig.data() + (static_cast<std::size_t>(f.g) * nyn_ + e) * nyn_;
                    const double* s1 = T_.sig.data() + (static_cast<std::size_t>(f.g + 1) * nyn_ + e) * nyn_;
                    const double c0 = coef * (1 - f.w), c1 = coef * f.w;
                    for (int c = 0; c < nyn_; ++c) conv[static_cast<std::size_t>(c)] += c0 * s0[c] + c1 * s1[c];
                }
                for (int c = 0; c < nyn_; ++c) {
                    double val = T_.dlam_at(xi, c) * krow[c] + conv[static_cast<std::size_t>(c)];
                    for (int l = 0; l < m_; ++l) {
                        const double lv = L_[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)].at(a, b);
                        if (lv != 0.0) val += lv * T_.theta_at(l, xi, c);
                    }
                    Frow[c] = val;
                }
            }
        });
    }

    void assemble_L_forcing(int s, int j) {
        const auto [i, p] = segs_[static_cast<std::size_t>(s)];
        (void)p;
        const KTable& K = K_[static_cast<std::size_t>(s)];
        const auto& yw = T_.yg.weights();
        parallel_for(nx_, threads_, [&](int a) {
            for (int b = 0; b < nr_; ++b) {
                const double xi = K.g.xi_of(a, b);
                const double* krow = K.row(a, b);
                const auto f = T_.floc(xi);
                // y-integral of the kernel row against the W column
                double iw = 0.0;
                const double* w0 = T_.Wt[static_cast<std::size_t>(j)].data() + static_cast<std::size_t>(f.g) * nyn_;
                const double* w1 = T_.Wt[static_cast<std::size_t>(j)].data() + static_cast<std::size_t>(f.g + 1) * nyn_;
                for (int c = 0; c < nyn_; ++c)
                    iw += yw[static_cast<std::size_t>(c)] * krow[c] * (w0[c] * (1 - f.w) + w1[c] * f.w);
                double val = T_.dmu_at(j, xi) *
                                 Lsnap_[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)].at(a, b) -
                             iw;
                for (int l = 0; l < m_; ++l) {
                    const double lv = Lsnap_[static_cast<std::size_t>(s)][static_cast<std::size_t>(l)].at(a, b);
                    if (lv != 0.0) val -= lv * T_.psi_at(l, j, xi);
                }
                FL_[static_cast<std::size_t>(a) * nr_ + b] = val;
            }
        });
    }

    // --- path machinery ---------------------------------------------------

    struct PathPoint {
        int a0, b0;
        double wa, wb;
    };

    PathPoint locate_in_segment(const SegmentGrid& g, double x, double xi) const {
        double tx = x * (nx_ - 1);
        tx = std::clamp(tx, 0.0, static_cast<double>(nx_ - 1));
        const int a0 = std::min(static_cast<int>(tx), nx_ - 2);
        const double wa = tx - a0;
        const double lo = g.lo[static_cast<std::size_t>(a0)] * (1 - wa) + g.lo[static_cast<std::size_t>(a0) + 1] * wa;
        const double up = g.up[static_cast<std::size_t>(a0)] * (1 - wa) + g.up[static_cast<std::size_t>(a0) + 1] * wa;
        double r = (up - lo) < 1e-300 ? 0.0 : (xi - lo) / (up - lo);
        r = std::clamp(r, 0.0, 1.0);
        double tr = r * (nr_ - 1);
        const int b0 = std::min(static_cast<int>(tr), nr_ - 2);
        return {a0, b0, wa, tr - b0};
    }

    static double bisect(const std::function<double(double)>& e, double lo, double hi) {
        for (int it = 0; it < 52; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (e(mid) >= 0.0) hi = mid;
            else lo = mid;
        }
        return hi;
    }

    // --- K sweep ----------------------------------------------------------

    double update_K_segment(int s) {
        assemble_K_forcing(s);
        const auto [i, p] = segs_[static_cast<std::size_t>(s)];
        KTable& K = K_[static_cast<std::size_t>(s)];
        const SegmentGrid& g = K.g;
        const auto& yw = T_.yg.weights();
        const KTable* neighbor = p > i ? &K_[static_cast<std::size_t>(seg_index(i, p - 1))] : nullptr;
        std::vector<double> row_delta(static_cast<std::size_t>(nx_), 0.0);

        parallel_for(nx_, threads_, [&](int a) {
            const double x = hx_ * a;
            const double phi_i_x = T_.map.phi(i, x);
            std::vector<double> pull(static_cast<std::size_t>(nyn_)), acc(static_cast<std::size_t>(nyn_));
            std::vector<double> d2(static_cast<std::size_t>(nr_), 0.0);
            for (int b = 0; b < nr_; ++b) {
                const double xi = g.xi_of(a, b);
                for (std::size_t gi = 0; gi < T_.group_rep.size(); ++gi) {
                    const int c0 = T_.group_rep[gi];
                    const auto& Xi = T_.Phi[static_cast<std::size_t>(c0)];
                    const double Phi0 = Xi(xi);
                    auto xi_at = [&](double sv) { return Xi.inverse(Phi0 + sv); };
                    auto x_at = [&](double sv) { return T_.map.phi_inv(i, phi_i_x - sv); };
                    auto ev = [&](double sv) {
                        return p == i ? xi_at(sv) - x_at(sv)
                                      : T_.map.phi(p, xi_at(sv)) - (phi_i_x - sv);
                    };
                    // terminal location
                    double s_f = 0.0;
                    if (ev(0.0) < -1e-13) {
                        const int cap = static_cast<int>(phi_i_x / ds_) + 2;
                        double s_lo = 0.0;
                        bool found = false;
                        for (int k = 1; k <= cap; ++k) {
                            const double s_hi = std::min(k * ds_, phi_i_x);
                            if (ev(s_hi) >= 0.0) {
                                s_f = bisect(ev, s_lo, s_hi);
                                found = true;
                                break;
                            }
                            s_lo = s_hi;
                            if (s_hi >= phi_i_x) break;
                        }
                        if (!found) s_f = phi_i_x;
                    }
                    const double xf = x_at(s_f);
                    // boundary pull
                    if (p == i) {
                        const auto fl = T_.floc(xf);
                        const double mui = T_.mu_at(i, xf);
                        for (const auto& run : T_.group_runs[gi])
                            for (int c = run.lo; c < run.lo + run.len; ++c) {
                                const double la =
                                    T_.lam[T_.idx2(fl.g, c)] * (1 - fl.w) + T_.lam[T_.idx2(fl.g + 1, c)] * fl.w;
                                const double t =
                                    T_.th[static_cast<std::size_t>(i)][T_.idx2(fl.g, c)] * (1 - fl.w) +
                                    T_.th[static_cast<std::size_t>(i)][T_.idx2(fl.g + 1, c)] * fl.w;
                                pull[static_cast<std::size_t>(c)] = -t / (la + mui);
                            }
                    } else {
                        double tx = xf * (nx_ - 1);
                        tx = std::clamp(tx, 0.0, static_cast<double>(nx_ - 1));
                        const int a0 = std::min(static_cast<int>(tx), nx_ - 2);
                        const double wa = tx - a0;
                        const double* r0 = neighbor->row(a0, 0);
                        const double* r1 = neighbor->row(a0 + 1, 0);
                        for (const auto& run : T_.group_runs[gi])
                            for (int c = run.lo; c < run.lo + run.len; ++c)
                                pull[static_cast<std::size_t>(c)] = r0[c] * (1 - wa) + r1[c] * wa;
                    }
                    // path quadrature of the forcing
                    for (const auto& run : T_.group_runs[gi])
                        std::fill(acc.begin() + run.lo, acc.begin() + run.lo + run.len, 0.0);
                    if (s_f > 0.0) {
                        integrate_forcing_K(g, gi, phi_i_x, i, Phi0, Xi, s_f, acc);
                    }
                    double* out = K.row(a, b);
                    for (const auto& run : T_.group_runs[gi])
                        for (int c = run.lo; c < run.lo + run.len; ++c) {
                            const double nv = pull[static_cast<std::size_t>(c)] + acc[static_cast<std::size_t>(c)];
                            const double dv = nv - out[c];
                            d2[static_cast<std::size_t>(b)] += yw[static_cast<std::size_t>(c)] * dv * dv;
                            out[c] = nv;
                        }
                }
            }
            double mx = 0.0;
            for (double v : d2) mx = std::max(mx, v);
            row_delta[static_cast<std::size_t>(a)] = std::sqrt(mx);
        });
        double delta = 0.0;
        for (double v : row_delta) delta = std::max(delta, v);
        return delta;
    }

    void integrate_forcing_K(const SegmentGrid& g, std::size_t gi, double phi_i_x, int i,
                             double Phi0, const MonotoneTable& Xi, double s_f,
                             std::vector<double>& acc) const {
        const auto& runs = T_.group_runs[gi];
        // trapezoid over fixed steps plus the partial terminal interval
        double s_prev = 0.0;
        PathPoint q_prev = locate_in_segment(g, T_.map.phi_inv(i, phi_i_x), Xi.inverse(Phi0));
        auto gather = [&](const PathPoint& q, int c) {
            const double* f00 = F_.data() + (static_cast<std::size_t>(q.a0) * nr_ + q.b0) * nyn_;
            const double* f01 = f00 + nyn_;
            const double* f10 = f00 + static_cast<std::size_t>(nr_) * nyn_;
            const double* f11 = f10 + nyn_;
            return (1 - q.wa) * ((1 - q.wb) * f00[c] + q.wb * f01[c]) +
                   q.wa * ((1 - q.wb) * f10[c] + q.wb * f11[c]);
        };
        while (s_prev < s_f) {
            const double s_next = std::min(s_prev + ds_, s_f);
            const PathPoint q_next =
                locate_in_segment(g, T_.map.phi_inv(i, phi_i_x - s_next), Xi.inverse(Phi0 + s_next));
            const double w = 0.5 * (s_next - s_prev);
            for (const auto& run : runs)
                for (int c = run.lo; c < run.lo + run.len; ++c)
                    acc[static_cast<std::size_t>(c)] += w * (gather(q_prev, c) + gather(q_next, c));
            s_prev = s_next;
            q_prev = q_next;
        }
    }

    // --- L sweep ----------------------------------------------------------

    double sweep_L(int i, int j) {
        double delta = 0.0;
        if (i > j) {
            for (int p = i; p < m_; ++p) delta = std::max(delta, update_L_segment(i, j, p));
        } else if (i == j) {
            for (int p = m_ - 1; p >= i; --p) delta = std::max(delta, update_L_segment(i, j, p));
        } else {
            for (int p = i; p < j; ++p) delta = std::max(delta, update_L_segment(i, j, p));
            for (int p = m_ - 1; p >= j; --p) delta = std::max(delta, update_L_segment(i, j, p));
        }
        return delta;
    }

    double update_L_segment(int i, int j, int p) {
        const int s = seg_index(i, p);
        assemble_L_forcing(s, j);
        LTable& L = L_[static_cast<std::size_t>(s)][static_cast<std::size_t>(j)];
        const SegmentGrid& g = L.g;
        const double eps = i > j ? 1.0 : -1.0;
        const bool chase_upper = (i > j) || (i < j && p < j);
        const auto& yw = T_.yg.weights();

        const LTable* upper_neighbor =
            (chase_upper && p > i) ? &L_[static_cast<std::size_t>(seg_index(i, p - 1))][static_cast<std::size_t>(j)]
                                   : nullptr;
        const LTable* lower_neighbor =
            (!chase_upper && p + 1 < m_)
                ? &L_[static_cast<std::size_t>(seg_index(i, p + 1))][static_cast<std::size_t>(j)]
                : nullptr;
        const KTable* K_axis = (!chase_upper && p + 1 == m_)
                                   ? &K_[static_cast<std::size_t>(seg_index(i, m_ - 1))]
                                   : nullptr;
        const double mu_j0 = T_.mu_at(j, 0.0);

        std::vector<double> row_delta(static_cast<std::size_t>(nx_), 0.0);
        parallel_for(nx_, threads_, [&](int a) {
            const double x = hx_ * a;
            const double phi_i_x = T_.map.phi(i, x);
            double dmax = 0.0;
            for (int b = 0; b < nr_; ++b) {
                const double xi = g.xi_of(a, b);
                const double phi_j_xi = T_.map.phi(j, xi);
                auto x_at = [&](double sv) { return T_.map.phi_inv(i, phi_i_x + eps * sv); };
                auto xi_at = [&](double sv) { return T_.map.phi_inv(j, phi_j_xi + eps * sv); };

                double s_f = 0.0;
                BoundaryTag tag;
                if (eps > 0) {
                    const double s_x1 = T_.map.phi_end(i) - phi_i_x;
                    auto ev = [&](double sv) {
                        return p == i ? xi_at(sv) - x_at(sv)
                                      : T_.map.phi(p, xi_at(sv)) - (phi_i_x + sv);
                    };
                    tag = BoundaryTag::LArtificialX1;
                    s_f = s_x1;
                    if (ev(0.0) >= -1e-13) {
                        s_f = 0.0;
                        tag = p == i ? BoundaryTag::LDiagonal : BoundaryTag::LContinuityUpper;
                    } else {
                        const int cap = static_cast<int>(s_x1 / ds_) + 2;
                        double s_lo = 0.0;
                        for (int k = 1; k <= cap; ++k) {
                            const double s_hi = std::min(k * ds_, s_x1);
                            if (ev(s_hi) >= 0.0) {
                                s_f = bisect(ev, s_lo, s_hi);
                                tag = p == i ? BoundaryTag::LDiagonal : BoundaryTag::LContinuityUpper;
                                break;
                            }
                            s_lo = s_hi;
                            if (s_hi >= s_x1) break;
                        }
                    }
                } else if (chase_upper) {
                    auto ev = [&](double sv) {
                        return p == i ? xi_at(sv) - x_at(sv)
                                      : T_.map.phi(p, xi_at(sv)) - (phi_i_x - sv);
                    };
                    tag = p == i ? BoundaryTag::LDiagonal : BoundaryTag::LContinuityUpper;
                    if (ev(0.0) < -1e-13) {
                        const double cap_s = phi_i_x;
                        const int cap = static_cast<int>(cap_s / ds_) + 2;
                        double s_lo = 0.0;
                        bool found = false;
                        for (int k = 1; k <= cap; ++k) {
                            const double s_hi = std::min(k * ds_, cap_s);
                            if (ev(s_hi) >= 0.0) {
                                s_f = bisect(ev, s_lo, s_hi);
                                found = true;
                                break;
                            }
                            s_lo = s_hi;
                            if (s_hi >= cap_s) break;
                        }
                        if (!found) s_f = cap_s;
                    }
                } else {
                    // terminal on the lower curve or the xi = 0 axis
                    if (p + 1 == m_) {
                        tag = BoundaryTag::LXiZero;
                        s_f = phi_j_xi;
                    } else {
                        tag = BoundaryTag::LContinuityLower;
                        auto ev = [&](double sv) {
                            return (phi_i_x - sv) - T_.map.phi(p + 1, xi_at(sv));
                        };
                        if (ev(0.0) < -1e-13) {
                            const double cap_s = phi_j_xi;
                            const int cap = static_cast<int>(cap_s / ds_) + 2;
                            double s_lo = 0.0;
                            bool found = false;
                            for (int k = 1; k <= cap; ++k) {
                                const double s_hi = std::min(k * ds_, cap_s);
                                if (ev(s_hi) >= 0.0) {
                                    s_f = bisect(ev, s_lo, s_hi);
                                    found = true;
                                    break;
                                }
                                s_lo = s_hi;
                                if (s_hi >= cap_s) break;
                            }
                            if (!found) s_f = cap_s;
                        }
                    }
                }

                const double xf = x_at(s_f);
                const double xif = xi_at(s_f);
                double pull = 0.0;
                switch (tag) {
                case BoundaryTag::LDiagonal:
                    pull = -T_.psi_at(i, j, xf) / (T_.mu_at(i, xf) - T_.mu_at(j, xf));
                    break;
                case BoundaryTag::LArtificialX1:
                    pull = T_.l1_at(i, j, xif);
                    break;
                case BoundaryTag::LContinuityUpper: {
                    pull = lerp_row(*upper_neighbor, 0, xf);
                    break;
                }
                case BoundaryTag::LContinuityLower: {
                    pull = lerp_row(*lower_neighbor, nr_ - 1, xf);
                    break;
                }
                case BoundaryTag::LXiZero: {
                    double tx = xf * (nx_ - 1);
                    tx = std::clamp(tx, 0.0, static_cast<double>(nx_ - 1));
                    const int a0 = std::min(static_cast<int>(tx), nx_ - 2);
                    const double wa = tx - a0;
                    const double* r0 = K_axis->row(a0, 0);
                    const double* r1 = K_axis->row(a0 + 1, 0);
                    double acc = 0.0;
                    for (int c = 0; c < nyn_; ++c) {
                        const double kv = r0[c] * (1 - wa) + r1[c] * wa;
                        acc += yw[static_cast<std::size_t>(c)] * kv * T_.lam[T_.idx2(0, c)] *
                               T_.Qt[static_cast<std::size_t>(j)][static_cast<std::size_t>(c)];
                    }
                    pull = acc / mu_j0;
                    break;
                }
                default:
                    break;
                }

                double acc = 0.0;
                if (s_f > 0.0) {
                    double s_prev = 0.0;
                    PathPoint q_prev = locate_in_segment(g, x, xi);
                    auto gather = [&](const PathPoint& q) {
                        const double* f0 = FL_.data() + static_cast<std::size_t>(q.a0) * nr_ + q.b0;
                        const double* f1 = f0 + nr_;
                        return (1 - q.wa) * ((1 - q.wb) * f0[0] + q.wb * f0[1]) +
                               q.wa * ((1 - q.wb) * f1[0] + q.wb * f1[1]);
                    };
                    while (s_prev < s_f) {
                        const double s_next = std::min(s_prev + ds_, s_f);
                        const PathPoint q_next = locate_in_segment(g, x_at(s_next), xi_at(s_next));
                        acc += 0.5 * (s_next - s_prev) * (gather(q_prev) + gather(q_next));
                        s_prev = s_next;
                        q_prev = q_next;
                    }
                }
                const double nv = pull + eps * acc;
                double& slot = L.at(a, b);
                dmax = std::max(dmax, std::abs(nv - slot));
                slot = nv;
            }
            row_delta[static_cast<std::size_t>(a)] = dmax;
        });
        double delta = 0.0;
        for (double v : row_delta) delta = std::max(delta, v);
        return delta;
    }

    double lerp_row(const LTable& t, int b, double x) const {
        double tx = x * (nx_ - 1);
        tx = std::clamp(tx, 0.0, static_cast<double>(nx_ - 1));
        const int a0 = std::min(static_cast<int>(tx), nx_ - 2);
        const double wa = tx - a0;
        return t.at(a0, b) * (1 - wa) + t.at(a0 + 1, b) * wa;
    }

    const ContinuumParams& P_;
    SolveOptions O_;
    Tables T_;
    int m_ = 0, nx_ = 0, nr_ = 0, nyn_ = 0, threads_ = 1;
    double hx_ = 0, ds_ = 0;
    std::vector<std::pair<int, int>> segs_;
    std::vector<std::vector<std::vector<double>>> curves_;
    std::vector<KTable> K_;
    std::vector<std::vector<LTable>> L_, Lsnap_;
    std::vector<double> F_, FL_;
};

} // namespace

ContinuumKernelSet solve_continuum_kernels(const ContinuumParams& p, const SolveOptions& opts) {
    auto rep = validate(p);
    if (!rep.pass) {
        std::string msg = "solve_continuum_kernels: parameters fail validation:";
        for (const auto& v : rep.violations) msg += " [" + v.assumption + " at " + v.location + "]";
        throw ConfigError(msg);
    }
    return Solver(p, opts).run();
}

std::vector<std::vector<double>> compute_G(const ContinuumKernelSet& ks, const ContinuumParams& p) {
    const int m = ks.m;
    const int nx = ks.K.empty() ? 2 : ks.K[0].g.nx;
    const int nyn = ks.ygrid.size();
    const auto ypts = ks.ygrid.eval_points();
    const auto& yw = ks.ygrid.weights();

    std::vector<double> lam0(static_cast<std::size_t>(nyn));
    for (int c = 0; c < nyn; ++c)
        lam0[static_cast<std::size_t>(c)] = p.lambda(0.0, ypts[static_cast<std::size_t>(c)]);

    std::vector<std::vector<double>> G(static_cast<std::size_t>(m) * static_cast<std::size_t>(m),
                                       std::vector<double>(static_cast<std::size_t>(nx), 0.0));
    for (int i = 0; i < m; ++i) {
        const KTable& t = ks.K[static_cast<std::size_t>(ks.seg_index(i, m - 1))];
        for (int j = 0; j < i; ++j) {
            const double muj0 = p.mu[static_cast<std::size_t>(j)](0.0);
            std::vector<double> qv(static_cast<std::size_t>(nyn));
            for (int c = 0; c < nyn; ++c)
                qv[static_cast<std::size_t>(c)] = p.Q[static_cast<std::size_t>(j)](ypts[static_cast<std::size_t>(c)]);
            auto& col = G[static_cast<std::size_t>(i) * m + j];
            for (int a = 0; a < nx; ++a) {
                const double* row = t.row(a, 0); // the xi = 0 line
                double acc = 0.0;
                for (int c = 0; c < nyn; ++c)
                    acc += yw[static_cast<std::size_t>(c)] * row[c] * lam0[static_cast<std::size_t>(c)] *
                           qv[static_cast<std::size_t>(c)];
                col[static_cast<std::size_t>(a)] = acc / muj0;
            }
        }
    }
    return G;
}

CouplingTables solve_coupling_C(const ContinuumKernelSet& ks, const ContinuumParams& p,
                                const CouplingOptions& opts) {
    CouplingTables ct;
    const int m = ks.m;
    const int n = opts.nxy;
    ct.nxy = n;
    ct.ygrid = ks.ygrid;
    const int nyn = ct.ygrid.size();
    const auto ypts = ct.ygrid.eval_points();
    const auto& yw = ct.ygrid.weights();
    const double h = 1.0 / (n - 1);

    // W at grid points, [a][c] laid out (a*nyn + c), per j
    std::vector<std::vector<double>> Wv(static_cast<std::size_t>(m),
                                        std::vector<double>(static_cast<std::size_t>(n) * nyn));
    for (int j = 0; j < m; ++j)
        for (int a = 0; a < n; ++a)
            for (int c = 0; c < nyn; ++c)
                Wv[static_cast<std::size_t>(j)][static_cast<std::size_t>(a) * nyn + c] =
                    p.W[static_cast<std::size_t>(j)](h * a, ypts[static_cast<std::size_t>(c)]);

    // L of the kernel set cached on the (zeta, xi) grid, per (l, j)
    std::vector<std::vector<double>> Lc(static_cast<std::size_t>(m) * m,
                                       std::vector<double>(static_cast<std::size_t>(n) * n, 0.0));
    for (int l = 0; l < m; ++l)
        for (int j = 0; j < m; ++j) {
            auto& t = Lc[static_cast<std::size_t>(l) * m + j];
            for (int a = 0; a < n; ++a)
                for (int b = 0; b <= a; ++b)
                    t[static_cast<std::size_t>(a) * n + b] = ks.eval_L(l, j, h * a, h * b);
        }

    const std::size_t plane = static_cast<std::size_t>(n) * n * nyn;
    auto at = [&](std::vector<double>& v, int a, int b, int c) -> double& {
        return v[(static_cast<std::size_t>(a) * n + b) * nyn + c];
    };

    // seed term: row of W-weighted kernels
    std::vector<std::vector<double>> term(static_cast<std::size_t>(m), std::vector<double>(plane, 0.0));
    ct.Cminus.assign(static_cast<std::size_t>(m), std::vector<double>(plane, 0.0));
    for (int j = 0; j < m; ++j)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b <= a; ++b)
                for (int c = 0; c < nyn; ++c) {
                    double s = 0.0;
                    for (int l = 0; l < m; ++l)
                        s += Wv[static_cast<std::size_t>(l)][static_cast<std::size_t>(a) * nyn + c] *
                             Lc[static_cast<std::size_t>(l) * m + j][static_cast<std::size_t>(a) * n + b];
                    at(term[static_cast<std::size_t>(j)], a, b, c) = s;
                    at(ct.Cminus[static_cast<std::size_t>(j)], a, b, c) = s;
                }

    auto term_sup = [&](const std::vector<std::vector<double>>& t) {
        double sup = 0.0;
        for (int j = 0; j < m; ++j)
            for (int a = 0; a < n; ++a)
                for (int b = 0; b <= a; ++b) {
                    double s2 = 0.0;
                    for (int c = 0; c < nyn; ++c) {
                        const double v = t[static_cast<std::size_t>(j)][(static_cast<std::size_t>(a) * n + b) * nyn + c];
                        s2 += yw[static_cast<std::size_t>(c)] * v * v;
                    }
                    sup = std::max(sup, std::sqrt(s2));
                }
        return sup;
    };

    ct.terms_used = 1;
    ct.last_term_sup = term_sup(term);
    ct.term_sups.push_back(ct.last_term_sup);
    std::vector<std::vector<double>> next(static_cast<std::size_t>(m), std::vector<double>(plane, 0.0));
    while (ct.last_term_sup > opts.tol && ct.terms_used < opts.max_terms) {
        std::vector<double> lrow(static_cast<std::size_t>(m));
        for (int j = 0; j < m; ++j) {
            auto& out = next[static_cast<std::size_t>(j)];
            std::fill(out.begin(), out.end(), 0.0);
            for (int a = 0; a < n; ++a)
                for (int b = 0; b <= a; ++b) {
                    // trapezoid over zeta nodes between xi_b and x_a
                    for (int z = b; z <= a; ++z) {
                        double w = h;
                        if (z == b || z == a) w = 0.5 * h;
                        if (a == b) w = 0.0;
                        if (w == 0.0) continue;
                        for (int l = 0; l < m; ++l)
                            lrow[static_cast<std::size_t>(l)] =
                                Lc[static_cast<std::size_t>(l) * m + j][static_cast<std::size_t>(z) * n + b];
                        for (int c = 0; c < nyn; ++c) {
                            double s = 0.0;
                            for (int l = 0; l < m; ++l)
                                s += term[static_cast<std::size_t>(l)][(static_cast<std::size_t>(a) * n + z) * nyn + c] *
                                     lrow[static_cast<std::size_t>(l)];
                            out[(static_cast<std::size_t>(a) * n + b) * nyn + c] += w * s;
                        }
                    }
                }
        }
        term.swap(next);
        for (int j = 0; j < m; ++j)
            for (std::size_t k = 0; k < plane; ++k)
                ct.Cminus[static_cast<std::size_t>(j)][k] += term[static_cast<std::size_t>(j)][k];
        ++ct.terms_used;
        ct.last_term_sup = term_sup(term);
        ct.term_sups.push_back(ct.last_term_sup);
    }

    // reduced rightward coupling: integral over the last argument
    std::vector<double> scratch(static_cast<std::size_t>(nyn));
    std::vector<std::vector<double>> IK(static_cast<std::size_t>(m),
                                        std::vector<double>(static_cast<std::size_t>(n) * n, 0.0));
    for (int l = 0; l < m; ++l)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b <= a; ++b) {
                ks.eval_K_row(l, h * a, h * b, scratch);
                IK[static_cast<std::size_t>(l)][static_cast<std::size_t>(a) * n + b] =
                    ct.ygrid.integrate(scratch);
            }
    ct.Cplus_reduced.assign(plane, 0.0);
    for (int a = 0; a < n; ++a)
        for (int b = 0; b <= a; ++b)
            for (int c = 0; c < nyn; ++c) {
                double s = 0.0;
                for (int l = 0; l < m; ++l)
                    s += Wv[static_cast<std::size_t>(l)][static_cast<std::size_t>(a) * nyn + c] *
                         IK[static_cast<std::size_t>(l)][static_cast<std::size_t>(a) * n + b];
                for (int z = b; z <= a; ++z) {
                    double w = (z == b || z == a) ? 0.5 * h : h;
                    if (a == b) w = 0.0;
                    if (w == 0.0) continue;
                    double inner = 0.0;
                    for (int l = 0; l < m; ++l)
                        inner += ct.Cminus[static_cast<std::size_t>(l)][(static_cast<std::size_t>(a) * n + z) * nyn + c] *
                                 IK[static_cast<std::size_t>(l)][static_cast<std::size_t>(z) * n + b];
                    s += w * inner;
                }
                ct.Cplus_reduced[(static_cast<std::size_t>(a) * n + b) * nyn + c] = s;
            }

    if (opts.full_4d) {
        ct.Cplus.assign(plane * static_cast<std::size_t>(nyn), 0.0);
        std::vector<double> krow(static_cast<std::size_t>(nyn));
        std::vector<std::vector<double>> Krows(static_cast<std::size_t>(m) * n,
                                               std::vector<double>(static_cast<std::size_t>(nyn)));
        for (int a = 0; a < n; ++a)
            for (int b = 0; b <= a; ++b) {
                for (int l = 0; l < m; ++l)
                    for (int z = b; z <= a; ++z)
                        ks.eval_K_row(l, h * z, h * b,
                                      Krows[static_cast<std::size_t>(l) * n + z]);
                for (int c = 0; c < nyn; ++c)
                    for (int e = 0; e < nyn; ++e) {
                        double s = 0.0;
                        for (int l = 0; l < m; ++l)
                            s += Wv[static_cast<std::size_t>(l)][static_cast<std::size_t>(a) * nyn + c] *
                                 Krows[static_cast<std::size_t>(l) * n + a][static_cast<std::size_t>(e)];
                        for (int z = b; z <= a; ++z) {
                            double w = (z == b || z == a) ? 0.5 * h : h;
                            if (a == b) w = 0.0;
                            if (w == 0.0) continue;
                            double inner = 0.0;
                            for (int l = 0; l < m; ++l)
                                inner += ct.Cminus[static_cast<std::size_t>(l)]
                                                  [(static_cast<std::size_t>(a) * n + z) * nyn + c] *
                                         Krows[static_cast<std::size_t>(l) * n + z][static_cast<std::size_t>(e)];
                            s += w * inner;
                        }
                        ct.Cplus[((static_cast<std::size_t>(a) * n + b) * nyn + c) * nyn + e] = s;
                    }
            }
    }
    return ct;
}

double ResidualReport::max_overall() const {
    double v = std::max({pde_K, pde_L, bc_diag_K, bc_diag_L, bc_xi0, bc_x1, cont_K, cont_L});
    return v;
}

ResidualReport kernel_residual(const ContinuumKernelSet& ks, const ContinuumParams& p) {
    ResidualReport rep;
    const int m = ks.m;
    const int nyn = ks.ygrid.size();
    const auto ypts = ks.ygrid.eval_points();
    const auto& yw = ks.ygrid.weights();
    const double fd_h = 1e-5;

    for (std::size_t s = 0; s < ks.segments.size(); ++s) {
        const auto [i, pp] = ks.segments[s];
        const KTable& K = ks.K[s];
        const SegmentGrid& g = K.g;
        const double hx = 1.0 / (g.nx - 1);
        const double hr = 1.0 / (g.nr - 1);
        const int sa = std::max(1, (g.nx - 1) / 32);
        const int sb = std::max(1, (g.nr - 1) / 32);

        // transport equation residuals at interior sample nodes
        for (int a = sa; a + 1 < g.nx; a += sa) {
            const double x = g.x_of(a);
            const double mui = p.mu[static_cast<std::size_t>(i)](x);
            const double dlo = (g.lo[static_cast<std::size_t>(a) + 1] - g.lo[static_cast<std::size_t>(a) - 1]) / (2 * hx);
            const double dup = (g.up[static_cast<std::size_t>(a) + 1] - g.up[static_cast<std::size_t>(a) - 1]) / (2 * hx);
            const double width = g.up[static_cast<std::size_t>(a)] - g.lo[static_cast<std::size_t>(a)];
            if (width < 1e-10) continue;
            for (int b = sb; b + 1 < g.nr; b += sb) {
                const double xi = g.xi_of(a, b);
                const double r = g.r_of(b);
                const double dxi_dx = dlo + r * (dup - dlo);
                // K equation, y-L2 residual over the row
                double s2 = 0.0;
                for (int c = 0; c < nyn; ++c) {
                    const double y = ypts[static_cast<std::size_t>(c)];
                    const double dKdx_r =
                        (K.row(a + 1, b)[c] - K.row(a - 1, b)[c]) / (2 * hx);
                    const double dKdr = (K.row(a, b + 1)[c] - K.row(a, b - 1)[c]) / (2 * hr);
                    const double dKdxi = dKdr / width;
                    const double dKdx = dKdx_r - dxi_dx * dKdxi;
                    const double lam = p.lambda(xi, y);
                    const double dlam =
                        (p.lambda(std::min(xi + fd_h, 1.0), y) - p.lambda(std::max(xi - fd_h, 0.0), y)) /
                        (std::min(xi + fd_h, 1.0) - std::max(xi - fd_h, 0.0));
                    double conv = 0.0;
                    for (int e = 0; e < nyn; ++e)
                        conv += yw[static_cast<std::size_t>(e)] * K.row(a, b)[e] *
                                p.sigma(xi, ypts[static_cast<std::size_t>(e)], y);
                    double lth = 0.0;
                    for (int l = 0; l < m; ++l)
                        lth += ks.L[s][static_cast<std::size_t>(l)].at(a, b) *
                               p.theta[static_cast<std::size_t>(l)](xi, y);
                    const double res = mui * dKdx - lam * dKdxi - dlam * K.row(a, b)[c] - lth - conv;
                    s2 += yw[static_cast<std::size_t>(c)] * res * res;
                }
                rep.pde_K = std::max(rep.pde_K, std::sqrt(s2));
                // L equations, absolute residual
                for (int j = 0; j < m; ++j) {
                    const LTable& L = ks.L[s][static_cast<std::size_t>(j)];
                    const double dLdx_r = (L.at(a + 1, b) - L.at(a - 1, b)) / (2 * hx);
                    const double dLdr = (L.at(a, b + 1) - L.at(a, b - 1)) / (2 * hr);
                    const double dLdxi = dLdr / width;
                    const double dLdx = dLdx_r - dxi_dx * dLdxi;
                    const double muj = p.mu[static_cast<std::size_t>(j)](xi);
                    const double dmuj = (p.mu[static_cast<std::size_t>(j)](std::min(xi + fd_h, 1.0)) -
                                         p.mu[static_cast<std::size_t>(j)](std::max(xi - fd_h, 0.0))) /
                                        (std::min(xi + fd_h, 1.0) - std::max(xi - fd_h, 0.0));
                    double lpsi = 0.0;
                    for (int l = 0; l < m; ++l)
                        lpsi += ks.L[s][static_cast<std::size_t>(l)].at(a, b) *
                                p.psi[static_cast<std::size_t>(l)][static_cast<std::size_t>(j)](xi);
                    double iw = 0.0;
                    for (int c = 0; c < nyn; ++c)
                        iw += yw[static_cast<std::size_t>(c)] * K.row(a, b)[c] *
                              p.W[static_cast<std::size_t>(j)](xi, ypts[static_cast<std::size_t>(c)]);
                    const double res = p.mu[static_cast<std::size_t>(i)](x) * dLdx + muj * dLdxi +
                                       dmuj * L.at(a, b) - lpsi - iw;
                    rep.pde_L = std::max(rep.pde_L, std::abs(res));
                }
            }
        }

        // diagonal conditions on the topmost segment
        if (pp == i) {
            for (int a = 0; a < g.nx; ++a) {
                const double x = g.x_of(a);
                const double mui = p.mu[static_cast<std::size_t>(i)](x);
                for (int c = 0; c < nyn; ++c) {
                    const double y = ypts[static_cast<std::size_t>(c)];
                    const double want = -p.theta[static_cast<std::size_t>(i)](x, y) / (p.lambda(x, y) + mui);
                    rep.bc_diag_K = std::max(rep.bc_diag_K, std::abs(K.row(a, g.nr - 1)[c] - want));
                }
                for (int j = 0; j < m; ++j) {
                    if (j == i) continue;
                    const double want = -p.psi[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](x) /
                                        (mui - p.mu[static_cast<std::size_t>(j)](x));
                    rep.bc_diag_L = std::max(
                        rep.bc_diag_L, std::abs(ks.L[s][static_cast<std::size_t>(j)].at(a, g.nr - 1) - want));
                }
            }
        }

        // reflection condition on the bottom segment
        if (pp == m - 1) {
            std::vector<double> lam0(static_cast<std::size_t>(nyn));
            for (int c = 0; c < nyn; ++c)
                lam0[static_cast<std::size_t>(c)] = p.lambda(0.0, ypts[static_cast<std::size_t>(c)]);
            for (int j = 0; j < m; ++j) {
                if (j < i) continue; // strictly-lower pairs feed the G table instead
                const double muj0 = p.mu[static_cast<std::size_t>(j)](0.0);
                for (int a = 0; a < g.nx; ++a) {
                    double acc = 0.0;
                    for (int c = 0; c < nyn; ++c)
                        acc += yw[static_cast<std::size_t>(c)] * K.row(a, 0)[c] * lam0[static_cast<std::size_t>(c)] *
                               p.Q[static_cast<std::size_t>(j)](ypts[static_cast<std::size_t>(c)]);
                    const double want = acc / muj0;
                    rep.bc_xi0 = std::max(rep.bc_xi0,
                                          std::abs(ks.L[s][static_cast<std::size_t>(j)].at(a, 0) - want));
                }
            }
        }

        // boundary data at x = 1 for the strictly lower pairs
        for (int j = 0; j < i; ++j) {
            for (int b = 0; b < g.nr; ++b) {
                const double xi = g.xi_of(g.nx - 1, b);
                const double want = p.l1[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)](xi);
                rep.bc_x1 = std::max(rep.bc_x1,
                                     std::abs(ks.L[s][static_cast<std::size_t>(j)].at(g.nx - 1, b) - want));
            }
        }

        // continuity across the upper curve of this segment
        if (pp > i) {
            const std::size_t s_above = static_cast<std::size_t>(ks.seg_index(i, pp - 1));
            const KTable& Kup = ks.K[s_above];
            for (int a = 0; a < g.nx; ++a) {
                for (int c = 0; c < nyn; ++c)
                    rep.cont_K = std::max(rep.cont_K,
                                          std::abs(K.row(a, g.nr - 1)[c] - Kup.row(a, 0)[c]));
                for (int j = 0; j < m; ++j) {
                    if (j == pp) continue; // the one admissible jump curve
                    rep.cont_L = std::max(rep.cont_L,
                                          std::abs(ks.L[s][static_cast<std::size_t>(j)].at(a, g.nr - 1) -
                                                   ks.L[s_above][static_cast<std::size_t>(j)].at(a, 0)));
                }
            }
        }
    }
    return rep;
}

KernelBounds compute_bounds(const ContinuumParams& p, const ContinuumKernelSet* ks,
                            const CouplingTables* ct, int check_grid) {
    KernelBounds b;
    const int m = p.m;
    const int n = check_grid;
    const auto xs = linspace(0.0, 1.0, n);
    const double h = 1.0 / (n - 1);

    b.m_lambda = 1e300;
    b.M_lambda = -1e300;
    b.M_lambda1 = 0.0;
    for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) {
            const double v = p.lambda(xs[static_cast<std::size_t>(a)], xs[static_cast<std::size_t>(c)]);
            b.m_lambda = std::min(b.m_lambda, v);
            b.M_lambda = std::max(b.M_lambda, v);
            if (a > 0 && a + 1 < n) {
                const double d = (p.lambda(xs[static_cast<std::size_t>(a) + 1], xs[static_cast<std::size_t>(c)]) -
                                  p.lambda(xs[static_cast<std::size_t>(a) - 1], xs[static_cast<std::size_t>(c)])) /
                                 (2 * h);
                b.M_lambda1 = std::max(b.M_lambda1, std::abs(d));
            }
        }

    b.m_mu = 1e300;
    b.M_mu = -1e300;
    std::vector<double> mu_min(static_cast<std::size_t>(m), 1e300), mu_max(static_cast<std::size_t>(m), -1e300);
    for (int j = 0; j < m; ++j) {
        for (int a = 0; a < n; ++a) {
            const double v = p.mu[static_cast<std::size_t>(j)](xs[static_cast<std::size_t>(a)]);
            mu_min[static_cast<std::size_t>(j)] = std::min(mu_min[static_cast<std::size_t>(j)], v);
            mu_max[static_cast<std::size_t>(j)] = std::max(mu_max[static_cast<std::size_t>(j)], v);
            if (a > 0 && a + 1 < n) {
                const double d = (p.mu[static_cast<std::size_t>(j)](xs[static_cast<std::size_t>(a) + 1]) -
                                  p.mu[static_cast<std::size_t>(j)](xs[static_cast<std::size_t>(a) - 1])) /
                                 (2 * h);
                b.M_mu1 = std::max(b.M_mu1, std::abs(d));
            }
        }
        b.m_mu = std::min(b.m_mu, mu_min[static_cast<std::size_t>(j)]);
        b.M_mu = std::max(b.M_mu, mu_max[static_cast<std::size_t>(j)]);
    }

    // norm-style bounds by trapezoid quadrature
    std::vector<double> f(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) {
        const double x = xs[static_cast<std::size_t>(a)];
        for (int c = 0; c < n; ++c) {
            double s = 0.0;
            for (int e = 0; e < n; ++e) {
                const double w = (e == 0 || e + 1 == n) ? 0.5 * h : h;
                s += w * p.sigma(x, xs[static_cast<std::size_t>(c)], xs[static_cast<std::size_t>(e)]);
            }
            f[static_cast<std::size_t>(c)] = s * s;
        }
        b.M_sigma = std::max(b.M_sigma, std::sqrt(trapz(f, h)));
    }
    for (int j = 0; j < m; ++j) {
        double mx_w = 0.0, mx_t = 0.0;
        for (int a = 0; a < n; ++a) {
            const double x = xs[static_cast<std::size_t>(a)];
            double sw = 0.0, st = 0.0;
            for (int c = 0; c < n; ++c) {
                const double w = (c == 0 || c + 1 == n) ? 0.5 * h : h;
                const double wv = p.W[static_cast<std::size_t>(j)](x, xs[static_cast<std::size_t>(c)]);
                const double tv = p.theta[static_cast<std::size_t>(j)](x, xs[static_cast<std::size_t>(c)]);
                sw += w * wv * wv;
                st += w * tv * tv;
            }
            mx_w = std::max(mx_w, std::sqrt(sw));
            mx_t = std::max(mx_t, std::sqrt(st));
        }
        b.M_W = std::max(b.M_W, mx_w);
        b.M_theta += mx_t;
    }
    for (int a = 0; a < n; ++a) {
        double colmax = 0.0;
        for (int j = 0; j < m; ++j) {
            double col = 0.0;
            for (int i2 = 0; i2 < m; ++i2)
                col += std::abs(p.psi[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)](xs[static_cast<std::size_t>(a)]));
            colmax = std::max(colmax, col);
        }
        b.M_psi = std::max(b.M_psi, colmax);
    }
    double lam0max = 0.0;
    for (int c = 0; c < n; ++c) {
        lam0max = std::max(lam0max, p.lambda(0.0, xs[static_cast<std::size_t>(c)]));
        (void)c;
    }
    for (int j = 0; j < m; ++j) {
        double q2 = 0.0;
        for (int c = 0; c < n; ++c) {
            const double w = (c == 0 || c + 1 == n) ? 0.5 * h : h;
            const double qv = p.Q[static_cast<std::size_t>(j)](xs[static_cast<std::size_t>(c)]);
            q2 += w * qv * qv;
        }
        const double qn = std::sqrt(q2);
        b.M_Q = std::max(b.M_Q, qn);
        b.M_Q1 = std::max(b.M_Q1, lam0max * qn / p.mu[static_cast<std::size_t>(j)](0.0));
    }

    double mb1 = 0.0, mb2 = 0.0;
    for (int i2 = 0; i2 < m; ++i2)
        for (int j = 0; j < m; ++j) {
            if (i2 == j) continue;
            for (int a = 0; a < n; ++a) {
                const double x = xs[static_cast<std::size_t>(a)];
                mb1 = std::max(mb1, std::abs(p.psi[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)](x) /
                                             (p.mu[static_cast<std::size_t>(i2)](x) - p.mu[static_cast<std::size_t>(j)](x))));
            }
            if (j < i2 && static_cast<int>(p.l1.size()) > i2 &&
                p.l1[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)])
                for (int a = 0; a < n; ++a)
                    mb2 = std::max(mb2, std::abs(p.l1[static_cast<std::size_t>(i2)][static_cast<std::size_t>(j)](
                                       xs[static_cast<std::size_t>(a)])));
        }
    b.M_B = std::max(mb1, mb2);

    double theta_over = 0.0;
    for (int i2 = 0; i2 < m; ++i2)
        for (int a = 0; a < n; ++a)
            for (int c = 0; c < n; ++c) {
                const double x = xs[static_cast<std::size_t>(a)], y = xs[static_cast<std::size_t>(c)];
                theta_over = std::max(theta_over,
                                      std::abs(p.theta[static_cast<std::size_t>(i2)](x, y)) /
                                          (p.lambda(x, y) + p.mu[static_cast<std::size_t>(i2)](x)));
            }
    b.M = b.M_B + (1.0 + b.M_Q1) * theta_over;

    double ratio = 0.0;
    for (int i2 = 0; i2 < m; ++i2)
        for (int j = 0; j < i2; ++j)
            ratio = std::max(ratio, mu_max[static_cast<std::size_t>(i2)] / mu_min[static_cast<std::size_t>(j)]);
    b.eps = m > 1 ? 0.5 * (1.0 - ratio) : 0.5;

    b.M_lambda_eps = 1.0 / (b.m_mu + (1.0 - b.eps) * b.m_lambda);
    b.M_mu_eps = 0.0;
    for (int i2 = 0; i2 < m; ++i2)
        for (int j = 0; j < m; ++j) {
            double denom_min = 1e300;
            if (i2 > j) {
                // -1/(mu_i - (1-eps) mu_j) with a negative denominator
                denom_min = (1.0 - b.eps) * mu_min[static_cast<std::size_t>(j)] - mu_max[static_cast<std::size_t>(i2)];
            } else {
                denom_min = mu_min[static_cast<std::size_t>(i2)] - (1.0 - b.eps) * mu_max[static_cast<std::size_t>(j)];
            }
            if (denom_min <= 0.0) {
                b.M_mu_eps = std::numeric_limits<double>::infinity();
            } else {
                b.M_mu_eps = std::max(b.M_mu_eps, 1.0 / denom_min);
            }
        }

    b.M_KL = m * (1.0 + b.M_Q1) * (b.M_lambda1 + b.M_sigma + b.M_theta) * b.M_lambda_eps +
             m * (b.M_mu1 + b.M_W + b.M_psi) * b.M_mu_eps;

    if (ks) {
        for (const auto& per_seg : ks->L)
            for (const auto& t : per_seg)
                for (double v : t.v) b.M_L = std::max(b.M_L, std::abs(v));
        for (const auto& col : ks->G)
            for (double v : col) b.M_G = std::max(b.M_G, std::abs(v));
    }
    if (ct) {
        const int nc = ct->nxy;
        const auto& w = ct->ygrid.weights();
        const int nyn = ct->ygrid.size();
        for (const auto& cj : ct->Cminus)
            for (int a = 0; a < nc; ++a)
                for (int bb = 0; bb <= a; ++bb) {
                    double s2 = 0.0;
                    for (int c = 0; c < nyn; ++c) {
                        const double v = cj[(static_cast<std::size_t>(a) * nc + bb) * nyn + c];
                        s2 += w[static_cast<std::size_t>(c)] * v * v;
                    }
                    b.M_Cminus = std::max(b.M_Cminus, std::sqrt(s2));
                }
        for (int a = 0; a < nc; ++a)
            for (int bb = 0; bb <= a; ++bb) {
                double s2 = 0.0;
                for (int c = 0; c < nyn; ++c) {
                    const double v = ct->Cplus_reduced[(static_cast<std::size_t>(a) * nc + bb) * nyn + c];
                    s2 += w[static_cast<std::size_t>(c)] * v * v;
                }
                b.M_Cplus = std::max(b.M_Cplus, std::sqrt(s2));
            }
    }
    return b;
}

namespace {

double row_l2(const YGrid& yg, const double* a, const double* b, int n) {
    double s = 0.0;
    const auto& w = yg.weights();
    for (int c = 0; c < n; ++c) {
        const double d = a[c] - b[c];
        s += w[static_cast<std::size_t>(c)] * d * d;
    }
    return std::sqrt(s);
}

} // namespace

KernelSupError kernel_sup_error(const ContinuumKernelSet& a, const ContinuumKernelSet& b) {
    if (a.segments != b.segments || a.ygrid.size() != b.ygrid.size())
        throw ConfigError("kernel_sup_error: sets on different grids");
    KernelSupError err;
    for (std::size_t s = 0; s < a.K.size(); ++s) {
        const KTable& ta = a.K[s];
        const KTable& tb = b.K[s];
        if (ta.v.size() != tb.v.size()) throw ConfigError("kernel_sup_error: table size mismatch");
        for (int aa = 0; aa < ta.g.nx; ++aa)
            for (int bb = 0; bb < ta.g.nr; ++bb)
                err.K = std::max(err.K, row_l2(a.ygrid, ta.row(aa, bb), tb.row(aa, bb), ta.nyn));
        for (int j = 0; j < a.m; ++j) {
            const auto& la = a.L[s][static_cast<std::size_t>(j)].v;
            const auto& lb = b.L[s][static_cast<std::size_t>(j)].v;
            for (std::size_t k = 0; k < la.size(); ++k)
                err.L = std::max(err.L, std::abs(la[k] - lb[k]));
        }
    }
    return err;
}

ContinuumKernelSet example_closed_form(int nx, int nr, int ny) {
    const auto P = example::continuum_params();
    ContinuumKernelSet ks;
    ks.m = P.m;
    ks.map = build_segment_map(P, std::max(257, 2 * (nx - 1) + 1));
    ks.ygrid = YGrid::uniform(ny);
    ks.x_nodes = linspace(0.0, 1.0, nx);
    for (int i = 0; i < ks.m; ++i)
        for (int p = i; p < ks.m; ++p) ks.segments.emplace_back(i, p);
    const auto& ynodes = ks.ygrid.nodes();
    for (const auto& [i, p] : ks.segments) {
        SegmentGrid g;
        g.i = i;
        g.p = p;
        g.nx = nx;
        g.nr = nr;
        g.lo.resize(static_cast<std::size_t>(nx));
        g.up.resize(static_cast<std::size_t>(nx));
        for (int a = 0; a < nx; ++a) {
            const double x = static_cast<double>(a) / (nx - 1);
            g.lo[static_cast<std::size_t>(a)] = ks.map.rho(i, p + 1, x);
            g.up[static_cast<std::size_t>(a)] = ks.map.rho(i, p, x);
        }
        KTable kt;
        kt.g = g;
        kt.nyn = ny;
        kt.v.resize(static_cast<std::size_t>(nx) * nr * ny);
        for (int a = 0; a < nx; ++a)
            for (int b = 0; b < nr; ++b) {
                double* row = kt.row(a, b);
                const double x = g.x_of(a);
                const double xi = g.xi_of(a, b);
                for (int c = 0; c < ny; ++c)
                    row[c] = example::closed_form_K(i, p, x, xi, ynodes[static_cast<std::size_t>(c)]);
            }
        ks.K.push_back(std::move(kt));
        std::vector<LTable> ltabs;
        for (int j = 0; j < ks.m; ++j) {
            LTable lt;
            lt.g = g;
            lt.v.resize(static_cast<std::size_t>(nx) * nr);
            for (int a = 0; a < nx; ++a)
                for (int b = 0; b < nr; ++b)
                    lt.at(a, b) = example::closed_form_L(i, j, p, g.x_of(a), g.xi_of(a, b));
            ltabs.push_back(std::move(lt));
        }
        ks.L.push_back(std::move(ltabs));
    }
    ks.G = compute_G(ks, P);
    return ks;
}

} // namespace hyperstab
