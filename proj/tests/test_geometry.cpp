#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hyperstab/errors.hpp"
#include "hyperstab/example_system.hpp"
#include "hyperstab/geometry.hpp"

using namespace hyperstab;

namespace {
ContinuumParams varying_speed_params() {
    // smooth, strictly ordered speeds to exercise the non-constant code paths
    auto p = example::continuum_params();
    p.lambda = [](double x, double y) { return 1.0 + 0.3 * std::sin(2.0 * x) + 0.2 * y; };
    p.mu = {[](double x) { return 2.0 + 0.2 * std::cos(x); },
            [](double x) { return 1.0 + 0.1 * std::sin(3.0 * x); }};
    return p;
}
} // namespace

TEST_CASE("segment boundaries of the example plant") {
    auto p = example::continuum_params();
    auto map = build_segment_map(p, 513);
    for (double x : {0.1, 0.5, 0.8, 1.0}) {
        CHECK(map.rho(0, 1, x) == doctest::Approx(0.5 * x).epsilon(1e-9));
        CHECK(map.rho(0, 0, x) == doctest::Approx(x));
        CHECK(map.rho(1, 1, x) == doctest::Approx(x));
        CHECK(map.rho(0, 2, x) == doctest::Approx(0.0));
    }
    CHECK(map.phi(0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(map.phi(1, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("segment lookup follows the boundary convention") {
    auto p = example::continuum_params();
    auto map = build_segment_map(p, 513);
    CHECK(map.segment_of(0, 0.8, 0.5) == 0);
    CHECK(map.segment_of(0, 0.8, 0.2) == 1);
    CHECK(map.segment_of(0, 0.8, 0.8) == 0); // on the diagonal
    CHECK(map.segment_of(0, 0.8, map.rho(0, 1, 0.8)) == 0); // boundary point -> segment above
    CHECK_THROWS_AS(map.segment_of(0, 0.5, 0.6), GeometryError);
}

TEST_CASE("curve ordering is strict inside the domain") {
    auto p = varying_speed_params();
    auto map = build_segment_map(p, 513);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> ux(0.05, 1.0);
    for (int t = 0; t < 50; ++t) {
        const double x = ux(rng);
        CHECK(map.rho(0, 2, x) < map.rho(0, 1, x));
        CHECK(map.rho(0, 1, x) < map.rho(0, 0, x));
    }
}

TEST_CASE("first-family characteristic with constant speeds") {
    auto p = example::continuum_params();
    auto map = build_segment_map(p, 513);
    auto path = trace_K_characteristic(p, map, 0, 0, 0.9, 0.6, 0.3);
    CHECK(path.terminal_bc == BoundaryTag::KDiagonal);
    CHECK(path.s_f == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(path.x_f == doctest::Approx(0.7).epsilon(1e-6));
    CHECK(path.xi_f == doctest::Approx(0.7).epsilon(1e-6));

    auto onb = trace_K_characteristic(p, map, 0, 0, 0.5, 0.5, 0.3);
    CHECK(onb.s_f == doctest::Approx(0.0));

    auto lower = trace_K_characteristic(p, map, 0, 1, 0.8, 0.1, 0.9);
    CHECK(lower.terminal_bc == BoundaryTag::KContinuity);
    CHECK(lower.s_f == doctest::Approx(0.15).epsilon(1e-6));
    CHECK(lower.x_f == doctest::Approx(0.5).epsilon(1e-5));
    CHECK(lower.xi_f == doctest::Approx(0.25).epsilon(1e-5));
}

TEST_CASE("second-family characteristics terminate per the taxonomy") {
    auto p = example::continuum_params();
    auto map = build_segment_map(p, 513);
    // below-diagonal pair moves up-right to the diagonal
    auto up = trace_L_characteristic(p, map, 1, 0, 1, 0.5, 0.2);
    CHECK(up.terminal_bc == BoundaryTag::LDiagonal);
    CHECK(up.s_f == doctest::Approx(0.3).epsilon(1e-6));
    CHECK(up.x_f == doctest::Approx(0.8).epsilon(1e-5));
    CHECK(up.xi_f == doctest::Approx(0.8).epsilon(1e-5));
    // equal pair starting on the axis
    auto axis = trace_L_characteristic(p, map, 1, 1, 1, 0.5, 0.0);
    CHECK(axis.terminal_bc == BoundaryTag::LXiZero);
    CHECK(axis.s_f == doctest::Approx(0.0));
    // above-diagonal pair starting on the diagonal of its top segment
    auto diag = trace_L_characteristic(p, map, 0, 1, 0, 0.5, 0.5);
    CHECK(diag.terminal_bc == BoundaryTag::LDiagonal);
    CHECK(diag.s_f == doctest::Approx(0.0));
    // above-diagonal pair in the bottom segment walks to the axis
    auto low = trace_L_characteristic(p, map, 0, 1, 1, 0.5, 0.2);
    CHECK(low.terminal_bc == BoundaryTag::LXiZero);
    CHECK(low.xi_f == doctest::Approx(0.0).epsilon(1e-9));
    // below-diagonal pair launched near x = 1 hits the boundary data line
    auto x1 = trace_L_characteristic(p, map, 1, 0, 1, 0.995, 0.1);
    CHECK(x1.terminal_bc == BoundaryTag::LArtificialX1);
    CHECK(x1.x_f == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("terminal points satisfy their boundary equations") {
    auto p = varying_speed_params();
    auto map = build_segment_map(p, 513);
    const double step = default_s_step(p, 129);
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> ux(0.1, 1.0), ur(0.05, 0.95), uy(0.0, 1.0);
    for (int t = 0; t < 40; ++t) {
        const double x = ux(rng);
        for (int i = 0; i < 2; ++i) {
            for (int pseg = i; pseg < 2; ++pseg) {
                const double lo = map.rho(i, pseg + 1, x), up = map.rho(i, pseg, x);
                const double xi = lo + ur(rng) * (up - lo);
                auto kp = trace_K_characteristic(p, map, i, pseg, x, xi, uy(rng), step);
                const double bk = pseg == i ? std::abs(kp.xi_f - kp.x_f)
                                            : std::abs(kp.xi_f - map.rho(i, pseg, kp.x_f));
                CHECK(bk <= 2.0 * step * 2.5); // within two steps scaled by speeds
                for (int j = 0; j < 2; ++j) {
                    auto lp = trace_L_characteristic(p, map, i, j, pseg, x, xi, step);
                    double bl = 0.0;
                    switch (lp.terminal_bc) {
                    case BoundaryTag::LDiagonal: bl = std::abs(lp.xi_f - lp.x_f); break;
                    case BoundaryTag::LArtificialX1: bl = std::abs(lp.x_f - 1.0); break;
                    case BoundaryTag::LContinuityUpper:
                        bl = std::abs(lp.xi_f - map.rho(i, pseg, lp.x_f));
                        break;
                    case BoundaryTag::LContinuityLower:
                        bl = std::abs(lp.xi_f - map.rho(i, pseg + 1, lp.x_f));
                        break;
                    case BoundaryTag::LXiZero: bl = std::abs(lp.xi_f); break;
                    default: break;
                    }
                    CHECK(bl <= 2.0 * step * 2.5);
                }
            }
        }
    }
}

TEST_CASE("paths depend continuously on the start point") {
    auto p = varying_speed_params();
    auto map = build_segment_map(p, 513);
    const double step = default_s_step(p, 257);
    auto terminal = [&](double x, double xi) {
        auto path = trace_K_characteristic(p, map, 0, 1, x, xi, 0.4, step);
        return std::pair{path.x_f, path.xi_f};
    };
    const auto base = terminal(0.8, 0.15);
    for (double h : {1e-3, 1e-4}) {
        const auto moved = terminal(0.8 + h, 0.15);
        const double d = std::hypot(moved.first - base.first, moved.second - base.second);
        CHECK(d <= 50.0 * h + 1e-9);
        CHECK(d >= 1e-3 * h); // genuinely moves
    }
}

TEST_CASE("corner start reports a degenerate path") {
    auto p = example::continuum_params();
    auto map = build_segment_map(p, 257);
    auto path = trace_K_characteristic(p, map, 0, 1, 0.0, 0.0, 0.5);
    CHECK(path.terminal_bc == BoundaryTag::Degenerate);
    CHECK(path.s_f == doctest::Approx(0.0));
}

TEST_CASE("negative speed breaks the map build") {
    auto p = example::continuum_params();
    p.mu[1] = [](double x) { return 0.5 - x; }; // sign change
    CHECK_THROWS_AS(build_segment_map(p, 257), GeometryError);
}
