#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hyperstab/errors.hpp"
#include "hyperstab/example_system.hpp"
#include "hyperstab/kernel_solver.hpp"
#include "hyperstab/simulator.hpp"

using namespace hyperstab;

namespace {

DiscreteParams transport_only(int n) {
    DiscreteParams d = example::discrete_params(n);
    auto z1 = [](double) { return 0.0; };
    for (auto& row : d.sigma)
        for (auto& f : row) f = z1;
    for (auto& row : d.w)
        for (auto& f : row) f = z1;
    for (auto& row : d.theta)
        for (auto& f : row) f = z1;
    for (auto& row : d.q)
        for (auto& v : row) v = 0.0;
    return d;
}

StateSnapshot make_state(int n, int m, int nx) {
    StateSnapshot s;
    s.n = n;
    s.m = m;
    s.nx = nx;
    s.u.assign(static_cast<std::size_t>(n) * nx, 0.0);
    s.v.assign(static_cast<std::size_t>(m) * nx, 0.0);
    return s;
}

ContinuumKernelSet zero_kernels() {
    auto cf = example_closed_form(33, 33, 17);
    for (auto& t : cf.K) std::fill(t.v.begin(), t.v.end(), 0.0);
    for (auto& seg : cf.L)
        for (auto& t : seg) std::fill(t.v.begin(), t.v.end(), 0.0);
    cf.G = compute_G(cf, example::continuum_params());
    return cf;
}

} // namespace

TEST_CASE("weighted norm values") {
    auto s = make_state(3, 2, 65);
    std::fill(s.u.begin(), s.u.end(), 1.0);
    CHECK(e_norm(s) == doctest::Approx(1.0));
    std::fill(s.u.begin(), s.u.end(), 0.0);
    for (int g = 0; g < 65; ++g) s.v[g] = 1.0;
    CHECK(e_norm(s) == doctest::Approx(1.0));
    auto s2 = make_state(2, 2, 65);
    for (int g = 0; g < 65; ++g) s2.u[g] = 1.0;
    CHECK(e_norm(s2) == doctest::Approx(std::sqrt(0.5)));
}

TEST_CASE("zero data stays zero") {
    auto d = example::discrete_params(3);
    SimOptions o;
    o.nx = 32;
    o.T = 0.5;
    auto tr = simulate(d, zero_controller(2), o, [](int, double) { return 0.0; },
                       [](int, double) { return 0.0; });
    for (const auto& s : tr.snapshots)
        CHECK(e_norm(s) == doctest::Approx(0.0));
}

TEST_CASE("pure transport flushes out") {
    auto d = transport_only(2);
    SimOptions o;
    o.nx = 128;
    o.T = 2.2; // exit time 1 + 1/min(mu) = 2, plus margin for the scheme tail
    o.save_stride = 64;
    auto tr = simulate(d, zero_controller(2), o, [](int, double) { return 1.0; },
                       [](int, double) { return 1.0; });
    CHECK(tr.e_norms.front() > 1.0);
    CHECK(tr.e_norms.back() <= 1e-6 * tr.e_norms.front());
}

TEST_CASE("time horizon zero keeps only the initial snapshot") {
    auto d = example::discrete_params(2);
    SimOptions o;
    o.nx = 32;
    o.T = 0.0;
    auto tr = simulate(d, zero_controller(2), o,
                       [](int i, double x) { return example::initial_u(i, 2, x); },
                       [](int, double) { return 1.0; });
    CHECK(tr.snapshots.size() == 1);
    CHECK(tr.steps == 0);
}

TEST_CASE("blow-up guard trips on the unstable open loop") {
    auto d = example::discrete_params(4);
    SimOptions o;
    o.nx = 64;
    o.T = 20.0;
    o.blowup_factor = 100.0;
    CHECK_THROWS_AS(simulate(d, zero_controller(2), o,
                             [](int i, double x) { return example::initial_u(i, 4, x); },
                             [](int j, double x) { return example::initial_v(j, x); }),
                    BlowupError);
}

TEST_CASE("open-loop growth stays under a coarse coupling envelope between saves") {
    auto d = example::discrete_params(4);
    SimOptions o;
    o.nx = 64;
    o.T = 1.0;
    o.save_stride = 16;
    auto tr = simulate(d, zero_controller(2), o,
                       [](int i, double x) { return example::initial_u(i, 4, x); },
                       [](int j, double x) { return example::initial_v(j, x); });
    // generous one-sided growth constant from the coupling magnitudes
    double smax = 0, wmax = 0, tmax = 0, qmax = 0;
    for (int i = 0; i < 4; ++i) {
        for (int l = 0; l < 4; ++l) smax = std::max(smax, std::abs(d.sigma[i][l](1.0)));
        for (int j = 0; j < 2; ++j) {
            wmax = std::max(wmax, std::abs(d.w[i][j](1.0)));
            qmax = std::max(qmax, std::abs(d.q[i][j]));
        }
    }
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 4; ++i) tmax = std::max(tmax, std::abs(d.theta[j][i](0.0)));
    const double C = 2.0 * (smax + 2.0 * (wmax + tmax) + 2.0 * (1.0 + qmax * qmax));
    for (std::size_t k = 1; k < tr.e_norms.size(); ++k) {
        const double dt_save = tr.snapshots[k].t - tr.snapshots[k - 1].t;
        CHECK(tr.e_norms[k] <= tr.e_norms[k - 1] * std::exp(C * dt_save) + 1e-12);
    }
}

TEST_CASE("continuum-counterpart norm matches the weighted norm on pass-through data") {
    auto ks = zero_kernels();
    TransformOperator op(ks, 3, 65);
    auto s = make_state(3, 2, 65);
    std::mt19937_64 rng(21);
    std::uniform_real_distribution<double> any(-1.0, 1.0);
    for (auto& x : s.u) x = any(rng);
    for (auto& x : s.v) x = any(rng);
    const auto t = op.apply(s); // alpha = u, beta = v here
    CHECK(ec_norm(t) == doctest::Approx(e_norm(s)).epsilon(1e-12));
}

TEST_CASE("identity transform when the kernels vanish") {
    auto ks = zero_kernels();
    TransformOperator op(ks, 3, 65);
    auto s = make_state(3, 2, 65);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> any(-1.0, 1.0);
    for (auto& x : s.u) x = any(rng);
    for (auto& x : s.v) x = any(rng);
    auto t = op.apply(s);
    for (std::size_t k = 0; k < s.v.size(); ++k) CHECK(t.beta[k] == doctest::Approx(s.v[k]));
    auto back = op.invert(t);
    for (std::size_t k = 0; k < s.v.size(); ++k) CHECK(back.v[k] == doctest::Approx(s.v[k]));
}

TEST_CASE("transform leaves the inflow boundary column unchanged") {
    auto cf = example_closed_form(33, 33, 17);
    TransformOperator op(cf, 2, 65);
    auto s = make_state(2, 2, 65);
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> any(-1.0, 1.0);
    for (auto& x : s.u) x = any(rng);
    for (auto& x : s.v) x = any(rng);
    auto t = op.apply(s);
    for (int j = 0; j < 2; ++j)
        CHECK(t.beta[static_cast<std::size_t>(j) * 65] == doctest::Approx(s.v[static_cast<std::size_t>(j) * 65]));
}

TEST_CASE("transform round trip on random smooth states") {
    auto cf = example_closed_form(65, 65, 33);
    const int nx = 256, n = 5;
    TransformOperator op(cf, n, nx);
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        auto s = make_state(n, 2, nx);
        for (int i = 0; i < n; ++i) {
            const double a = amp(rng), b = amp(rng), c = amp(rng);
            for (int g = 0; g < nx; ++g) {
                const double x = static_cast<double>(g) / (nx - 1);
                s.u[static_cast<std::size_t>(i) * nx + g] =
                    a + b * std::sin(3.1 * x) + c * x * x;
            }
        }
        for (int j = 0; j < 2; ++j) {
            const double a = amp(rng), b = amp(rng);
            for (int g = 0; g < nx; ++g) {
                const double x = static_cast<double>(g) / (nx - 1);
                s.v[static_cast<std::size_t>(j) * nx + g] = a * std::cos(2.2 * x) + b * x;
            }
        }
        auto back = op.invert(op.apply(s));
        double err = 0.0, scale = 1e-12;
        for (std::size_t k = 0; k < s.v.size(); ++k) {
            err = std::max(err, std::abs(back.v[k] - s.v[k]));
            scale = std::max(scale, std::abs(s.v[k]));
        }
        CHECK(err / scale <= 1e-3);
    }
}

TEST_CASE("decay parameter selection") {
    KernelBounds b;
    b.m_lambda = 1.0;
    b.m_mu = 1.0;
    b.M_Q = 0.8;
    b.M_G = 0.0;
    b.M_W = 1.5;
    b.M_Cminus = 0.5;
    b.M_Cplus = 0.25;
    b.M_sigma = 0.0;
    auto lp = choose_lyapunov_params(b, 2);
    const double want = std::max(2.0 * (0.0 + 0.25) + 2.0, 1.5 * 1.5 + 0.25);
    CHECK(lp.delta == doctest::Approx(1.01 * want));
    CHECK(lp.c_V == doctest::Approx(0.01 * want));
    // with modest reflection and no strict-lower coupling, unit weights suffice
    CHECK(lp.D[0] == doctest::Approx(1.01));
    CHECK(lp.D[1] == doctest::Approx(1.01));
    CHECK(lp.F[0] == doctest::Approx(lp.D[1]));
    CHECK(lp.F[1] == doctest::Approx(0.0)); // last chain position
}

TEST_CASE("weighted energy values") {
    auto p = example::continuum_params();
    LyapunovParams lp;
    lp.delta = 0.0;
    lp.D = {1.0, 1.0};
    TargetSnapshot t;
    t.n = 2;
    t.m = 2;
    t.nx = 65;
    t.alpha.assign(2 * 65, 0.0);
    t.beta.assign(2 * 65, 0.0);
    CHECK(lyapunov_value(t, lp, p, 2) == doctest::Approx(0.0));
    for (int g = 0; g < 65; ++g) t.beta[g] = 1.0; // first family, mu = 2
    CHECK(lyapunov_value(t, lp, p, 2) == doctest::Approx(0.5));
}

TEST_CASE("self-comparison of the convergence machinery is exact") {
    ConvergenceOptions co;
    co.sim.nx = 64;
    co.sim.T = 0.4;
    co.sim.save_stride = 16;
    co.n_ref_factor = 1;
    auto rep = convergence_study(
        [](int n) { return example::discrete_params(n); }, {8},
        [](int n, int i, double x) { return example::initial_u(i, n, x); },
        [](int j, double x) { return example::initial_v(j, x); }, zero_controller(2), co);
    CHECK(rep.n_ref == 8);
    CHECK(rep.distances[0] <= 1e-14);
}

TEST_CASE("coarse families drift further from the reference") {
    ConvergenceOptions co;
    co.sim.nx = 64;
    co.sim.T = 0.5;
    co.sim.save_stride = 16;
    auto rep = convergence_study(
        [](int n) { return example::discrete_params(n); }, {2, 4},
        [](int n, int i, double x) { return example::initial_u(i, n, x); },
        [](int j, double x) { return example::initial_v(j, x); }, zero_controller(2), co);
    CHECK(rep.n_ref == 16);
    CHECK(rep.distances[1] < rep.distances[0]);
    CHECK_FALSE(rep.resampled[0]);
}

TEST_CASE("grid sensitivity flag machinery") {
    ConvergenceOptions co;
    co.sim.nx = 48;
    co.sim.T = 0.3;
    co.sim.save_stride = 16;
    co.check_nx_sensitivity = true;
    auto rep = convergence_study(
        [](int n) { return example::discrete_params(n); }, {2},
        [](int n, int i, double x) { return example::initial_u(i, n, x); },
        [](int j, double x) { return example::initial_v(j, x); }, zero_controller(2), co);
    REQUIRE(rep.nx_sensitivity.has_value());
    CHECK(*rep.nx_sensitivity < 0.10);
}
