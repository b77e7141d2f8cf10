#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hyperstab/controller.hpp"
#include "hyperstab/example_system.hpp"
#include "hyperstab/kernel_nm.hpp"

using namespace hyperstab;

namespace {

struct TestState {
    int n, m, nx;
    std::vector<double> u, v;
    StateView view() const { return {n, m, nx, u.data(), v.data()}; }
};

TestState constant_state(int n, int m, int nx, double uval, double vval) {
    TestState s{n, m, nx, {}, {}};
    s.u.assign(static_cast<std::size_t>(n) * nx, uval);
    s.v.assign(static_cast<std::size_t>(m) * nx, vval);
    return s;
}

SolveOptions small_grid() {
    SolveOptions o;
    o.nx = 33;
    o.nr = 33;
    o.ny = 17;
    return o;
}

} // namespace

TEST_CASE("mean-value sampling of the first-family kernel") {
    auto cf = example_closed_form(65, 65, 65);
    auto g2 = sample_gains(cf, 2, SamplingMode::MeanValue);
    const auto& top = g2.segs[static_cast<std::size_t>(g2.seg_index(0, 0))];
    // both cells average to -1/6 at every node (the kernel has no (x, xi) dependence there)
    for (std::size_t b = 0; b < top.xi.size(); ++b) {
        CHECK(top.k[b * 2 + 0] == doctest::Approx(-1.0 / 6.0).epsilon(1e-3));
        CHECK(top.k[b * 2 + 1] == doctest::Approx(-1.0 / 6.0).epsilon(1e-3));
    }
    auto g1 = sample_gains(cf, 1, SamplingMode::MeanValue);
    const auto& top1 = g1.segs[static_cast<std::size_t>(g1.seg_index(0, 0))];
    CHECK(top1.k[0] == doctest::Approx(-1.0 / 6.0).epsilon(1e-3));
}

TEST_CASE("pointwise sampling hits the vanishing top node") {
    auto cf = example_closed_form(33, 33, 33);
    auto g = sample_gains(cf, 2, SamplingMode::Pointwise);
    const auto& top = g.segs[static_cast<std::size_t>(g.seg_index(0, 0))];
    for (std::size_t b = 0; b < top.xi.size(); ++b)
        CHECK(top.k[b * 2 + 1] == doctest::Approx(0.0).epsilon(1e-12)); // y = 1 value
    CHECK_FALSE(g.pointwise_on_discontinuous);
}

TEST_CASE("pointwise sampling on cellwise tables raises the warning flag") {
    auto nm = solve_nm_kernels(example::discrete_params(2), small_grid());
    auto g = sample_gains(nm.lift, 2, SamplingMode::Pointwise);
    CHECK(g.pointwise_on_discontinuous);
}

TEST_CASE("control laws vanish on the zero state and scale linearly") {
    auto cf = example_closed_form(33, 33, 33);
    auto g = sample_gains(cf, 4, SamplingMode::MeanValue);
    auto zero = constant_state(4, 2, 101, 0.0, 0.0);
    for (double u : eval_control_sampled(g, zero.view())) CHECK(u == 0.0);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> any(-1.0, 1.0);
    TestState s = constant_state(4, 2, 101, 0.0, 0.0);
    for (auto& x : s.u) x = any(rng);
    for (auto& x : s.v) x = any(rng);
    TestState s2 = s;
    for (auto& x : s2.u) x *= 2.0;
    for (auto& x : s2.v) x *= 2.0;
    const auto U = eval_control_sampled(g, s.view());
    const auto U2 = eval_control_sampled(g, s2.view());
    for (std::size_t j = 0; j < U.size(); ++j) CHECK(U2[j] == doctest::Approx(2.0 * U[j]).epsilon(1e-12));
}

TEST_CASE("uniform rightward state reproduces the kernel integrals") {
    auto cf = example_closed_form(129, 129, 65);
    auto s = constant_state(4, 2, 201, 1.0, 0.0);
    const auto U = eval_control_continuum(cf, s.view());
    // split the integral at the interior curve; both pieces are elementary
    const double u1 = -(1.0 / 6.0) * ((std::exp(1.0) - 1.0) / 2.0 + 0.5);
    const double u2 = -(1.0 / 6.0) * (std::exp(2.0) - 1.0) / 2.0;
    CHECK(U[0] == doctest::Approx(u1).epsilon(2e-3));
    CHECK(U[1] == doctest::Approx(u2).epsilon(2e-3));
}

TEST_CASE("uniform leftward state only sees the nonzero scalar kernels") {
    auto cf = example_closed_form(129, 129, 33);
    auto g = sample_gains(cf, 2, SamplingMode::MeanValue);
    // first component only
    auto s1 = constant_state(2, 2, 201, 0.0, 0.0);
    for (int gix = 0; gix < 201; ++gix) s1.v[gix] = 1.0;
    const auto U1 = eval_control_sampled(g, s1.view());
    CHECK(U1[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(U1[1] == doctest::Approx(0.0).epsilon(1e-12));
    // second component picks up both families
    auto s2 = constant_state(2, 2, 201, 0.0, 0.0);
    for (int gix = 0; gix < 201; ++gix) s2.v[201 + gix] = 1.0;
    const auto U2 = eval_control_sampled(g, s2.view());
    CHECK(U2[0] == doctest::Approx(-(std::exp(1.0) - 1.0)).epsilon(2e-3));
    CHECK(U2[1] == doctest::Approx(-(std::exp(2.0) - 1.0)).epsilon(2e-3));
}

TEST_CASE("sampled control of a step state matches the continuum law") {
    auto cf = example_closed_form(65, 65, 65);
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> any(-1.0, 1.0);
    TestState s = constant_state(2, 2, 151, 0.0, 0.0);
    for (auto& x : s.u) x = any(rng);
    for (auto& x : s.v) x = any(rng);
    auto g = sample_gains(cf, 2, SamplingMode::MeanValue);
    const auto Us = eval_control_sampled(g, s.view());
    const auto Uc = eval_control_continuum(cf, s.view());
    for (std::size_t j = 0; j < Us.size(); ++j) CHECK(Us[j] == doctest::Approx(Uc[j]).epsilon(1e-12));
}

TEST_CASE("mean-value sampling contracts the scaled vector norm") {
    auto cf = example_closed_form(49, 49, 49);
    for (int n : {2, 5, 8}) {
        auto g = sample_gains(cf, n, SamplingMode::MeanValue);
        std::vector<double> row(static_cast<std::size_t>(cf.ygrid.size()));
        for (const auto& seg : g.segs) {
            for (std::size_t b = 0; b < seg.xi.size(); ++b) {
                cf.eval_K_row_on_segment(seg.i, seg.p, 1.0, seg.xi[b], row);
                double l2 = 0.0;
                for (int c = 0; c < cf.ygrid.size(); ++c)
                    l2 += cf.ygrid.weights()[static_cast<std::size_t>(c)] * row[static_cast<std::size_t>(c)] *
                          row[static_cast<std::size_t>(c)];
                double vec2 = 0.0;
                for (int l = 0; l < n; ++l)
                    vec2 += seg.k[b * static_cast<std::size_t>(n) + static_cast<std::size_t>(l)] *
                            seg.k[b * static_cast<std::size_t>(n) + static_cast<std::size_t>(l)];
                CHECK(std::sqrt(vec2 / n) <= std::sqrt(l2) + 1e-10);
            }
        }
    }
}

TEST_CASE("gap to the exact gains vanishes for the lift's own sampling") {
    auto nm = solve_nm_kernels(example::discrete_params(2), small_grid());
    auto g = sample_gains(nm.lift, 2, SamplingMode::MeanValue);
    auto rep = control_gap(g, nm);
    CHECK(rep.max_aggregate <= 1e-9);
}

TEST_CASE("constant scalar-family offset reports the euclidean row factor") {
    auto nm = solve_nm_kernels(example::discrete_params(2), small_grid());
    auto g = gains_from_nm(nm);
    const double c = 0.37;
    for (auto& seg : g.segs)
        for (auto& v : seg.l) v += c;
    auto rep = control_gap(g, nm);
    for (int i = 0; i < 2; ++i) {
        CHECK(rep.k_gap[static_cast<std::size_t>(i)] <= 1e-12);
        CHECK(rep.l_gap[static_cast<std::size_t>(i)] == doctest::Approx(std::sqrt(2.0) * c).epsilon(1e-12));
    }
}

TEST_CASE("exact and sampled laws coincide when fed the same gains") {
    auto nm = solve_nm_kernels(example::discrete_params(3), small_grid());
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> any(-1.0, 1.0);
    TestState s = constant_state(3, 2, 101, 0.0, 0.0);
    for (auto& x : s.u) x = any(rng);
    for (auto& x : s.v) x = any(rng);
    const auto Ue = eval_control_exact(nm, s.view());
    const auto Us = eval_control_sampled(gains_from_nm(nm), s.view());
    for (std::size_t j = 0; j < Ue.size(); ++j) CHECK(Ue[j] == doctest::Approx(Us[j]));
}

TEST_CASE("dimension mismatch is rejected") {
    auto cf = example_closed_form(33, 33, 17);
    auto g = sample_gains(cf, 4, SamplingMode::MeanValue);
    auto s = constant_state(3, 2, 64, 1.0, 1.0);
    CHECK_THROWS_AS(eval_control_sampled(g, s.view()), ConfigError);
}
