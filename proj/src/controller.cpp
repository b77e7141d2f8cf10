#include "hyperstab/controller.hpp"

#include <cmath>
#include <fstream>

#include "hyperstab/errors.hpp"

namespace hyperstab {

int SampledGains::seg_index(int i, int p) const {
    for (std::size_t s = 0; s < segs.size(); ++s)
        if (segs[s].i == i && segs[s].p == p) return static_cast<int>(s);
    throw GeometryError("no gain segment (" + std::to_string(i + 1) + "," + std::to_string(p + 1) + ")");
}

namespace {

struct Loc {
    int b;
    double w;
};

Loc locate_xi(const std::vector<double>& xi, double x) {
    // gain nodes are uniform on [front, back]
    const int nr = static_cast<int>(xi.size());
    const double a = xi.front(), b = xi.back();
    if (b - a < 1e-300) return {0, 0.0};
    double t = (x - a) / (b - a) * (nr - 1);
    t = std::clamp(t, 0.0, static_cast<double>(nr - 1));
    const int k = std::min(static_cast<int>(t), nr - 2);
    return {k, t - k};
}

int owning_segment(const SampledGains& g, int i, double xi) {
    for (int p = i; p < g.m; ++p) {
        const auto& seg = g.segs[static_cast<std::size_t>(g.seg_index(i, p))];
        if (xi >= seg.xi.front()) return p;
    }
    return g.m - 1;
}

} // namespace

double SampledGains::eval_k(int i, int l, double xiq) const {
    const auto& seg = segs[static_cast<std::size_t>(seg_index(i, owning_segment(*this, i, xiq)))];
    const Loc q = locate_xi(seg.xi, xiq);
    return seg.k[static_cast<std::size_t>(q.b) * n + l] * (1 - q.w) +
           seg.k[(static_cast<std::size_t>(q.b) + 1) * n + l] * q.w;
}

double SampledGains::eval_l(int i, int j, double xiq) const {
    const auto& seg = segs[static_cast<std::size_t>(seg_index(i, owning_segment(*this, i, xiq)))];
    const Loc q = locate_xi(seg.xi, xiq);
    return seg.l[static_cast<std::size_t>(q.b) * m + j] * (1 - q.w) +
           seg.l[(static_cast<std::size_t>(q.b) + 1) * m + j] * q.w;
}

double SampledGains::eval_k_on_segment(int i, int p, int l, double xiq) const {
    const auto& seg = segs[static_cast<std::size_t>(seg_index(i, p))];
    const Loc q = locate_xi(seg.xi, xiq);
    return seg.k[static_cast<std::size_t>(q.b) * n + l] * (1 - q.w) +
           seg.k[(static_cast<std::size_t>(q.b) + 1) * n + l] * q.w;
}

double SampledGains::eval_l_on_segment(int i, int p, int j, double xiq) const {
    const auto& seg = segs[static_cast<std::size_t>(seg_index(i, p))];
    const Loc q = locate_xi(seg.xi, xiq);
    return seg.l[static_cast<std::size_t>(q.b) * m + j] * (1 - q.w) +
           seg.l[(static_cast<std::size_t>(q.b) + 1) * m + j] * q.w;
}

SampledGains sample_gains(const ContinuumKernelSet& ks, int n, SamplingMode mode) {
    if (n < 1) throw ConfigError("sample_gains: n must be >= 1");
    SampledGains g;
    g.n = n;
    g.m = ks.m;
    g.mode = mode;
    g.pointwise_on_discontinuous = mode == SamplingMode::Pointwise && ks.ygrid.n_cells() > 1;

    std::vector<double> row(static_cast<std::size_t>(ks.ygrid.size()));
    for (std::size_t s = 0; s < ks.segments.size(); ++s) {
        const auto [i, p] = ks.segments[s];
        const KTable& t = ks.K[s];
        GainSegment seg;
        seg.i = i;
        seg.p = p;
        const int nr = t.g.nr;
        seg.xi.resize(static_cast<std::size_t>(nr));
        seg.k.resize(static_cast<std::size_t>(nr) * n);
        seg.l.resize(static_cast<std::size_t>(nr) * ks.m);
        for (int b = 0; b < nr; ++b) {
            seg.xi[static_cast<std::size_t>(b)] = t.g.xi_of(t.g.nx - 1, b);
            const double* krow = t.row(t.g.nx - 1, b);
            for (std::size_t c = 0; c < row.size(); ++c) row[c] = krow[c];
            for (int l = 0; l < n; ++l) {
                const double a = static_cast<double>(l) / n;
                const double bb = static_cast<double>(l + 1) / n;
                seg.k[static_cast<std::size_t>(b) * n + l] =
                    mode == SamplingMode::MeanValue
                        ? n * ks.ygrid.integrate_interval(row, a, bb)
                        : ks.ygrid.interp(row, bb);
            }
            for (int j = 0; j < ks.m; ++j)
                seg.l[static_cast<std::size_t>(b) * ks.m + j] =
                    ks.L[s][static_cast<std::size_t>(j)].at(t.g.nx - 1, b);
        }
        g.segs.push_back(std::move(seg));
    }
    return g;
}

SampledGains gains_from_nm(const NmKernelSet& nm) {
    SampledGains g;
    g.n = nm.n;
    g.m = nm.m;
    g.mode = SamplingMode::MeanValue;
    for (std::size_t s = 0; s < nm.lift.segments.size(); ++s) {
        const auto [i, p] = nm.lift.segments[s];
        const KTable& t = nm.lift.K[s];
        GainSegment seg;
        seg.i = i;
        seg.p = p;
        const int nr = t.g.nr;
        seg.xi.resize(static_cast<std::size_t>(nr));
        seg.k.resize(static_cast<std::size_t>(nr) * nm.n);
        seg.l.resize(static_cast<std::size_t>(nr) * nm.m);
        for (int b = 0; b < nr; ++b) {
            seg.xi[static_cast<std::size_t>(b)] = t.g.xi_of(t.g.nx - 1, b);
            const double* kr = nm.k_row(static_cast<int>(s), t.g.nx - 1, b);
            for (int l = 0; l < nm.n; ++l) seg.k[static_cast<std::size_t>(b) * nm.n + l] = kr[l];
            for (int j = 0; j < nm.m; ++j)
                seg.l[static_cast<std::size_t>(b) * nm.m + j] =
                    nm.lift.L[s][static_cast<std::size_t>(j)].at(t.g.nx - 1, b);
        }
        g.segs.push_back(std::move(seg));
    }
    return g;
}

namespace {

double state_col(const StateView& s, const double* base, int row, double xi) {
    const double t = std::clamp(xi, 0.0, 1.0) * (s.nx - 1);
    const int g0 = std::min(static_cast<int>(t), s.nx - 2);
    const double w = t - g0;
    const double* col = base + static_cast<std::size_t>(row) * s.nx;
    return col[g0] * (1 - w) + col[g0 + 1] * w;
}

} // namespace

std::vector<double> eval_control_sampled(const SampledGains& g, const StateView& s) {
    if (s.n != g.n || s.m != g.m)
        throw ConfigError("eval_control_sampled: state dimensions do not match the gains");
    std::vector<double> U(static_cast<std::size_t>(g.m), 0.0);
    const double dx = 1.0 / (s.nx - 1);

    for (const auto& seg : g.segs) {
        const double A = seg.xi.front(), B = seg.xi.back();
        if (B - A < 1e-14) continue;
        auto f = [&](double xi) {
            const Loc q = locate_xi(seg.xi, xi);
            double acc = 0.0;
            const double* k0 = seg.k.data() + static_cast<std::size_t>(q.b) * g.n;
            const double* k1 = k0 + g.n;
            for (int l = 0; l < g.n; ++l) {
                const double kv = k0[l] * (1 - q.w) + k1[l] * q.w;
                if (kv != 0.0) acc += kv * state_col(s, s.u, l, xi);
            }
            acc /= g.n;
            const double* l0 = seg.l.data() + static_cast<std::size_t>(q.b) * g.m;
            const double* l1 = l0 + g.m;
            for (int j = 0; j < g.m; ++j) {
                const double lv = l0[j] * (1 - q.w) + l1[j] * q.w;
                if (lv != 0.0) acc += lv * state_col(s, s.v, j, xi);
            }
            return acc;
        };
        // trapezoid over the union of simulator nodes and segment endpoints
        double total = 0.0;
        double prev_xi = A;
        double prev_f = f(A);
        int gg = static_cast<int>(std::floor(A / dx)) + 1;
        for (; gg * dx < B - 1e-14 && gg < s.nx; ++gg) {
            const double xi = gg * dx;
            if (xi <= prev_xi + 1e-14) continue;
            const double fv = f(xi);
            total += 0.5 * (prev_f + fv) * (xi - prev_xi);
            prev_xi = xi;
            prev_f = fv;
        }
        const double fB = f(B);
        total += 0.5 * (prev_f + fB) * (B - prev_xi);
        U[static_cast<std::size_t>(seg.i)] += total;
    }
    return U;
}

std::vector<double> eval_control_continuum(const ContinuumKernelSet& ks, const StateView& s) {
    return eval_control_sampled(sample_gains(ks, s.n, SamplingMode::MeanValue), s);
}

std::vector<double> eval_control_exact(const NmKernelSet& nm, const StateView& s) {
    return eval_control_sampled(gains_from_nm(nm), s);
}

GapReport control_gap(const SampledGains& g, const NmKernelSet& nm) {
    if (g.n != nm.n || g.m != nm.m) throw ConfigError("control_gap: dimension mismatch");
    const SampledGains ex = gains_from_nm(nm);
    GapReport rep;
    rep.k_gap.assign(static_cast<std::size_t>(g.m), 0.0);
    rep.l_gap.assign(static_cast<std::size_t>(g.m), 0.0);
    rep.aggregate.assign(static_cast<std::size_t>(g.m), 0.0);

    for (const auto& seg : g.segs) {
        for (std::size_t b = 0; b < seg.xi.size(); ++b) {
            const double xi = seg.xi[b];
            double k2 = 0.0;
            for (int l = 0; l < g.n; ++l) {
                const double dv = seg.k[b * static_cast<std::size_t>(g.n) + static_cast<std::size_t>(l)] -
                                  ex.eval_k_on_segment(seg.i, seg.p, l, xi);
                k2 += dv * dv;
            }
            double l2 = 0.0;
            for (int j = 0; j < g.m; ++j) {
                const double dv = seg.l[b * static_cast<std::size_t>(g.m) + static_cast<std::size_t>(j)] -
                                  ex.eval_l_on_segment(seg.i, seg.p, j, xi);
                l2 += dv * dv;
            }
            auto& kg = rep.k_gap[static_cast<std::size_t>(seg.i)];
            auto& lg = rep.l_gap[static_cast<std::size_t>(seg.i)];
            kg = std::max(kg, std::sqrt(k2 / g.n));
            lg = std::max(lg, std::sqrt(l2));
        }
    }
    for (int i = 0; i < g.m; ++i) {
        rep.aggregate[static_cast<std::size_t>(i)] =
            rep.k_gap[static_cast<std::size_t>(i)] + rep.l_gap[static_cast<std::size_t>(i)];
        rep.max_aggregate = std::max(rep.max_aggregate, rep.aggregate[static_cast<std::size_t>(i)]);
    }
    return rep;
}

void save_gains_csv(const SampledGains& g, const std::string& k_file, const std::string& l_file) {
    std::ofstream ok(k_file);
    ok.precision(17);
    ok << "i,p,l,xi,value\n";
    for (const auto& seg : g.segs)
        for (std::size_t b = 0; b < seg.xi.size(); ++b)
            for (int l = 0; l < g.n; ++l)
                ok << seg.i + 1 << "," << seg.p + 1 << "," << l + 1 << "," << seg.xi[b] << ","
                   << seg.k[b * static_cast<std::size_t>(g.n) + static_cast<std::size_t>(l)] << "\n";
    std::ofstream ol(l_file);
    ol.precision(17);
    ol << "i,p,j,xi,value\n";
    for (const auto& seg : g.segs)
        for (std::size_t b = 0; b < seg.xi.size(); ++b)
            for (int j = 0; j < g.m; ++j)
                ol << seg.i + 1 << "," << seg.p + 1 << "," << j + 1 << "," << seg.xi[b] << ","
                   << seg.l[b * static_cast<std::size_t>(g.m) + static_cast<std::size_t>(j)] << "\n";
}

} // namespace hyperstab
