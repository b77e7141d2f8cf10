#include "hyperstab/geometry.hpp"

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hyperstab/errors.hpp"

namespace hyperstab {

int SegmentMap::segment_of(int i, double x, double xi) const {
    if (xi > x + 1e-12 || xi < -1e-12 || x > 1.0 + 1e-12) {
        std::ostringstream os;
        os << "segment_of: point (" << x << "," << xi << ") outside the triangle";
        throw GeometryError(os.str());
    }
    for (int p = i; p < m_ - 1; ++p) {
        if (xi >= rho(i, p + 1, x)) return p;
    }
    return m_ - 1;
}

SegmentMap build_segment_map(const ContinuumParams& p, int grid_resolution) {
    SegmentMap map;
    map.m_ = p.m;
    map.phi_.resize(static_cast<std::size_t>(p.m));
    for (int j = 0; j < p.m; ++j) {
        const auto& mu = p.mu[static_cast<std::size_t>(j)];
        auto vals = cumulative_trapz([&](double s) { return 1.0 / mu(s); }, 0.0, 1.0,
                                     grid_resolution);
        for (std::size_t g = 1; g < vals.size(); ++g) {
            if (!(vals[g] > vals[g - 1]))
                throw GeometryError("phi tabulation not strictly increasing for family " +
                                    std::to_string(j + 1) + " (mu sign error?)");
        }
        map.phi_[static_cast<std::size_t>(j)] = MonotoneTable(0.0, 1.0, std::move(vals));
    }
    return map;
}

std::string to_string(BoundaryTag t) {
    switch (t) {
    case BoundaryTag::KDiagonal: return "K-diagonal";
    case BoundaryTag::KContinuity: return "K-continuity";
    case BoundaryTag::LDiagonal: return "L-diagonal";
    case BoundaryTag::LArtificialX1: return "L-artificial-x1";
    case BoundaryTag::LContinuityUpper: return "L-continuity-upper";
    case BoundaryTag::LContinuityLower: return "L-continuity-lower";
    case BoundaryTag::LXiZero: return "L-xi-zero";
    case BoundaryTag::Degenerate: return "degenerate";
    }
    return "?";
}

namespace {

struct Point {
    double x, xi;
};

using Deriv = std::function<Point(const Point&)>;

Point rk4_step(const Point& p, double h, const Deriv& f) {
    const Point k1 = f(p);
    const Point p2{p.x + 0.5 * h * k1.x, p.xi + 0.5 * h * k1.xi};
    const Point k2 = f(p2);
    const Point p3{p.x + 0.5 * h * k2.x, p.xi + 0.5 * h * k2.xi};
    const Point k3 = f(p3);
    const Point p4{p.x + h * k3.x, p.xi + h * k3.xi};
    const Point k4 = f(p4);
    return {p.x + h / 6.0 * (k1.x + 2 * k2.x + 2 * k3.x + k4.x),
            p.xi + h / 6.0 * (k1.xi + 2 * k2.xi + 2 * k3.xi + k4.xi)};
}

struct Event {
    std::function<double(const Point&)> value; ///< negative inside, zero at the boundary
    BoundaryTag tag;
};

/// Fixed-step march with bisection on the first triggered event.
void march(CharacteristicPath& path, Point start, double h, double s_max, const Deriv& f,
           const std::vector<Event>& events, const std::string& what) {
    path.nodes.push_back({0.0, start.x, start.xi});
    // already on a terminal boundary?
    for (const auto& ev : events) {
        if (ev.value(start) >= -1e-13) {
            path.s_f = 0.0;
            path.x_f = start.x;
            path.xi_f = start.xi;
            path.terminal_bc = ev.tag;
            return;
        }
    }
    double s = 0.0;
    Point cur = start;
    while (s < s_max) {
        const Point nxt = rk4_step(cur, h, f);
        int hit = -1;
        for (std::size_t e = 0; e < events.size(); ++e) {
            if (events[e].value(nxt) >= 0.0) {
                if (hit < 0) hit = static_cast<int>(e);
                else {
                    // several candidates crossed within one step: keep the one
                    // crossing earliest by comparing bisected offsets
                    auto cross = [&](const Event& ev) {
                        double lo = 0.0, hi = h;
                        for (int it = 0; it < 40; ++it) {
                            const double mid = 0.5 * (lo + hi);
                            if (ev.value(rk4_step(cur, mid, f)) >= 0.0) hi = mid;
                            else lo = mid;
                        }
                        return hi;
                    };
                    if (cross(events[e]) < cross(events[static_cast<std::size_t>(hit)]))
                        hit = static_cast<int>(e);
                }
            }
        }
        if (hit >= 0) {
            const Event& ev = events[static_cast<std::size_t>(hit)];
            double lo = 0.0, hi = h;
            for (int it = 0; it < 60; ++it) {
                const double mid = 0.5 * (lo + hi);
                if (ev.value(rk4_step(cur, mid, f)) >= 0.0) hi = mid;
                else lo = mid;
            }
            const Point fin = rk4_step(cur, hi, f);
            path.s_f = s + hi;
            path.x_f = fin.x;
            path.xi_f = fin.xi;
            path.terminal_bc = ev.tag;
            path.nodes.push_back({path.s_f, fin.x, fin.xi});
            return;
        }
        s += h;
        cur = nxt;
        path.nodes.push_back({s, cur.x, cur.xi});
    }
    throw GeometryError("characteristic tracing failed to terminate: " + what);
}

} // namespace

double default_s_step(const ContinuumParams& p, int nx_resolution) {
    double vmax = 0.0;
    const int n = 33;
    for (int a = 0; a < n; ++a) {
        const double x = static_cast<double>(a) / (n - 1);
        for (int j = 0; j < p.m; ++j) vmax = std::max(vmax, p.mu[static_cast<std::size_t>(j)](x));
        for (int b = 0; b < n; ++b)
            vmax = std::max(vmax, p.lambda(x, static_cast<double>(b) / (n - 1)));
    }
    if (!(vmax > 0.0)) throw GeometryError("default_s_step: nonpositive speeds");
    return 1.0 / ((nx_resolution - 1) * vmax);
}

CharacteristicPath trace_K_characteristic(const ContinuumParams& p, const SegmentMap& map, int i,
                                          int pseg, double x, double xi, double y,
                                          double s_step) {
    CharacteristicPath path;
    path.k_family = true;
    path.i = i;
    path.p = pseg;
    path.y = y;
    if (x < 1e-12 && xi < 1e-12) {
        path.terminal_bc = BoundaryTag::Degenerate;
        path.nodes.push_back({0.0, x, xi});
        return path;
    }
    const double h = s_step > 0.0 ? s_step : default_s_step(p, 129);
    Deriv f = [&p, i, y](const Point& q) {
        return Point{-p.mu[static_cast<std::size_t>(i)](q.x), p.lambda(q.xi, y)};
    };
    std::vector<Event> events;
    if (pseg == i)
        events.push_back({[](const Point& q) { return q.xi - q.x; }, BoundaryTag::KDiagonal});
    else
        events.push_back({[&map, i, pseg](const Point& q) {
                              return map.phi(pseg, std::clamp(q.xi, 0.0, 1.0)) -
                                     map.phi(i, std::clamp(q.x, 0.0, 1.0));
                          },
                          BoundaryTag::KContinuity});
    std::ostringstream what;
    what << "K path i=" << i + 1 << " p=" << pseg + 1 << " from (" << x << "," << xi << ")";
    march(path, {x, xi}, h, 4.0 * map.phi_end(map.m() - 1) + 1.0, f, events, what.str());
    return path;
}

CharacteristicPath trace_L_characteristic(const ContinuumParams& p, const SegmentMap& map, int i,
                                          int j, int pseg, double x, double xi, double s_step) {
    CharacteristicPath path;
    path.k_family = false;
    path.i = i;
    path.j = j;
    path.p = pseg;
    if (x < 1e-12 && xi < 1e-12) {
        path.terminal_bc = BoundaryTag::Degenerate;
        path.nodes.push_back({0.0, x, xi});
        return path;
    }
    const double h = s_step > 0.0 ? s_step : default_s_step(p, 129);
    const double eps = i > j ? 1.0 : -1.0;
    const int m = map.m();
    Deriv f = [&p, i, j, eps](const Point& q) {
        return Point{eps * p.mu[static_cast<std::size_t>(i)](std::clamp(q.x, 0.0, 1.0)),
                     eps * p.mu[static_cast<std::size_t>(j)](std::clamp(q.xi, 0.0, 1.0))};
    };

    auto upper_event = [&map, i, pseg]() {
        if (pseg == i)
            return Event{[](const Point& q) { return q.xi - q.x; }, BoundaryTag::LDiagonal};
        return Event{[&map, i, pseg](const Point& q) {
                         return map.phi(pseg, std::clamp(q.xi, 0.0, 1.0)) -
                                map.phi(i, std::clamp(q.x, 0.0, 1.0));
                     },
                     BoundaryTag::LContinuityUpper};
    };
    auto lower_event = [&map, i, pseg, m]() {
        if (pseg + 1 == m)
            return Event{[](const Point& q) { return -q.xi; }, BoundaryTag::LXiZero};
        return Event{[&map, i, pseg](const Point& q) {
                         return map.phi(i, std::clamp(q.x, 0.0, 1.0)) -
                                map.phi(pseg + 1, std::clamp(q.xi, 0.0, 1.0));
                     },
                     BoundaryTag::LContinuityLower};
    };

    std::vector<Event> events;
    if (i > j) {
        events.push_back({[](const Point& q) { return q.x - 1.0; }, BoundaryTag::LArtificialX1});
        events.push_back(upper_event());
    } else if (i == j) {
        events.push_back(lower_event());
    } else { // i < j
        if (pseg < j) events.push_back(upper_event());
        else events.push_back(lower_event());
    }
    std::ostringstream what;
    what << "L path i=" << i + 1 << " j=" << j + 1 << " p=" << pseg + 1 << " from (" << x << ","
         << xi << ")";
    march(path, {x, xi}, h, 4.0 * map.phi_end(map.m() - 1) + 1.0, f, events, what.str());
    return path;
}

void write_path_csv(const CharacteristicPath& path, const std::string& file) {
    std::ofstream os(file);
    os << "s,x,xi\n";
    os.precision(17);
    for (const auto& n : path.nodes) os << n.s << "," << n.x << "," << n.xi << "\n";
}

} // namespace hyperstab
