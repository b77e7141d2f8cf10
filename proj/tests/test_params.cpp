#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hyperstab/example_system.hpp"
#include "hyperstab/params.hpp"

using namespace hyperstab;

TEST_CASE("example plant passes validation") {
    auto rep = validate(example::continuum_params());
    CHECK(rep.pass);
    CHECK(rep.violations.empty());
    CHECK(validate(example::discrete_params(6)).pass);
}

TEST_CASE("equal transport speeds violate the ordering") {
    auto p = example::continuum_params();
    p.mu = {[](double) { return 1.0; }, [](double) { return 1.0; }};
    auto rep = validate(p);
    CHECK_FALSE(rep.pass);
    bool found = false;
    for (const auto& v : rep.violations) found = found || v.assumption == "speed ordering";
    CHECK(found);
}

TEST_CASE("sign-changing lambda is caught with its grid point") {
    auto p = example::continuum_params();
    p.lambda = [](double, double y) { return y - 0.5; };
    auto rep = validate(p);
    CHECK_FALSE(rep.pass);
    REQUIRE_FALSE(rep.violations.empty());
    CHECK(rep.violations.front().assumption == "lambda positivity");
    CHECK(rep.violations.front().value <= 0.0);
}

TEST_CASE("non-evaluable parameter raises a configuration error") {
    auto p = example::continuum_params();
    p.lambda = [](double, double) -> double { throw std::runtime_error("broken"); };
    CHECK_THROWS_AS(validate(p), ConfigError);
}

TEST_CASE("piecewise-linear lift reproduces the arrays at the nodes") {
    const int n = 4;
    auto d = example::discrete_params(n);
    auto c = lift_discrete(d);
    auto cref = example::continuum_params();
    for (int i = 0; i < n; ++i) {
        const double y = static_cast<double>(i + 1) / n;
        for (double x : {0.0, 0.3, 1.0}) {
            CHECK(c.theta[0](x, y) == doctest::Approx(cref.theta[0](x, y)).epsilon(1e-14));
            CHECK(c.W[1](x, y) == doctest::Approx(cref.W[1](x, y)).epsilon(1e-14));
            CHECK(c.lambda(x, y) == doctest::Approx(1.0).epsilon(1e-14));
        }
        CHECK(c.Q[0](y) == doctest::Approx(8.0 * (y - 0.5)).epsilon(1e-14));
        for (int l = 0; l < n; ++l)
            CHECK(c.sigma(0.7, y, static_cast<double>(l + 1) / n) ==
                  doctest::Approx(d.sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(l)](0.7)).epsilon(1e-14));
    }
}

TEST_CASE("single-node lift is constant in y") {
    auto d = example::discrete_params(1);
    auto c = lift_discrete(d);
    for (double y : {0.0, 0.2, 0.8, 1.0})
        CHECK(c.theta[0](0.5, y) == doctest::Approx(c.theta[0](0.5, 1.0)).epsilon(1e-14));
}

TEST_CASE("alternating speeds interpolate to the midpoint value") {
    const int n = 4;
    DiscreteParams d = example::discrete_params(n);
    for (int i = 0; i < n; ++i) {
        const double v = (i % 2 == 0) ? 1.0 : 2.0;
        d.lambda[static_cast<std::size_t>(i)] = [v](double) { return v; };
    }
    auto c = lift_discrete(d);
    // nodes at 1/4..1 carry 1,2,1,2; midpoints between nodes give 1.5
    CHECK(c.lambda(0.0, 0.375) == doctest::Approx(1.5).epsilon(1e-14));
    CHECK(c.lambda(0.0, 0.625) == doctest::Approx(1.5).epsilon(1e-14));
}

TEST_CASE("spline lift also matches the nodes") {
    auto d = example::discrete_params(5);
    auto c = lift_discrete(d, LiftInterpolation::CubicSpline);
    for (int i = 0; i < 5; ++i) {
        const double y = static_cast<double>(i + 1) / 5;
        CHECK(c.theta[1](0.4, y) ==
              doctest::Approx(d.theta[1][static_cast<std::size_t>(i)](0.4)).epsilon(1e-12));
    }
}

TEST_CASE("step parameters use half-open cells") {
    DiscreteParams d = example::discrete_params(2);
    d.lambda[0] = [](double) { return 1.0; };
    d.lambda[1] = [](double) { return 3.0; };
    auto s = make_step_params(d);
    CHECK(s.lambda(0.2, 0.25) == doctest::Approx(1.0));
    CHECK(s.lambda(0.2, 0.75) == doctest::Approx(3.0));
    // the edge y = 1/n belongs to the first cell
    CHECK(s.lambda(0.2, 0.5) == doctest::Approx(1.0));
    CHECK(s.lambda(0.2, 0.5 + 1e-9) == doctest::Approx(3.0));
    CHECK(static_cast<int>(s.y_edges.size()) == 3);
}

TEST_CASE("step sigma resolves cell indices") {
    const int n = 4;
    auto d = example::discrete_params(n);
    auto s = make_step_params(d);
    // y = 0.3 -> cell 2 (1-based), eta = 0.8 -> cell 4
    CHECK(s.sigma(0.6, 0.3, 0.8) ==
          doctest::Approx(d.sigma[1][3](0.6)).epsilon(1e-14));
    // a nonzero entry as well
    CHECK(s.sigma(0.6, 0.1, 0.8) ==
          doctest::Approx(d.sigma[0][3](0.6)).epsilon(1e-14));
    CHECK(s.sigma(0.6, 0.1, 0.8) != 0.0);
}

TEST_CASE("step parameters reproduce the arrays at the nodes exactly") {
    const int n = 3;
    auto d = example::discrete_params(n);
    auto s = make_step_params(d);
    for (int i = 0; i < n; ++i) {
        const double y = static_cast<double>(i + 1) / n;
        CHECK(s.theta[0](0.8, y) == d.theta[0][static_cast<std::size_t>(i)](0.8));
        CHECK(s.W[0](0.8, y) == d.w[static_cast<std::size_t>(i)][0](0.8));
        CHECK(s.Q[1](y) == d.q[static_cast<std::size_t>(i)][1]);
    }
}

TEST_CASE("lift of random positive plants stays valid") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> pos(0.5, 2.0), any(-1.0, 1.0);
    for (int trial = 0; trial < 5; ++trial) {
        DiscreteParams d;
        d.n = 3;
        d.m = 2;
        for (int i = 0; i < d.n; ++i) {
            const double c = pos(rng);
            d.lambda.push_back([c](double) { return c; });
        }
        d.mu = {[](double) { return 2.0; }, [](double) { return 0.5; }};
        for (int i = 0; i < d.n; ++i) {
            std::vector<Fn1> row;
            for (int l = 0; l < d.n; ++l) {
                const double c = any(rng);
                row.push_back([c](double) { return c; });
            }
            d.sigma.push_back(row);
            const double cw = any(rng);
            d.w.push_back({[cw](double) { return cw; }, [cw](double) { return -cw; }});
            d.q.push_back({any(rng), any(rng)});
        }
        for (int j = 0; j < d.m; ++j) {
            std::vector<Fn1> row;
            for (int i = 0; i < d.n; ++i) {
                const double c = any(rng);
                row.push_back([c](double) { return c; });
            }
            d.theta.push_back(row);
        }
        auto zero1 = [](double) { return 0.0; };
        d.psi = {{zero1, zero1}, {zero1, zero1}};
        CHECK(validate(d).pass);
        CHECK(validate(lift_discrete(d)).pass);
    }
}

TEST_CASE("default boundary data satisfies the compatibility point") {
    std::vector<Fn1> mu = {[](double) { return 2.0; }, [](double) { return 1.0; }};
    auto zero1 = [](double) { return 0.0; };
    std::vector<std::vector<Fn1>> psi = {{zero1, zero1}, {[](double x) { return x; }, zero1}};
    auto l1 = default_l1(mu, psi);
    CHECK(l1[1][0](1.0) == doctest::Approx(-1.0 / (1.0 - 2.0)));
    CHECK(l1[1][0](0.3) == doctest::Approx(l1[1][0](1.0))); // constant choice
}
