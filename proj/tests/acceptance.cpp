// Acceptance suite: runs every verification criterion at its stated grid and
// tolerance, printing one pass/fail line per criterion. Exits nonzero if any
// criterion fails.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <random>
#include <vector>

#include "hyperstab/controller.hpp"
#include "hyperstab/example_system.hpp"
#include "hyperstab/kernel_nm.hpp"
#include "hyperstab/kernel_solver.hpp"
#include "hyperstab/simulator.hpp"

using namespace hyperstab;

namespace {

int g_failures = 0;

void criterion(int id, const char* what, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id, what, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
    char buf[512];
    va_list ap;
    va_start(ap, f);
    std::vsnprintf(buf, sizeof buf, f, ap);
    va_end(ap);
    return buf;
}

double elapsed(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

} // namespace

int main() {
    const auto wall0 = std::chrono::steady_clock::now();
    const auto P = example::continuum_params();

    SolveOptions base;
    base.nx = 129;
    base.nr = 129;
    base.ny = 65;
    base.tol = 1e-8;

    std::printf("solving kernels at (%d,%d,%d)...\n", base.nx, base.nr, base.ny);
    auto ks = solve_continuum_kernels(P, base);
    std::printf("  %d sweeps, final update %.3e, %.1fs elapsed\n", ks.iterations, ks.final_delta,
                elapsed(wall0));

    // ---- 1. closed-form reproduction with grid-doubling contraction -------
    {
        const auto err = kernel_sup_error(ks, example_closed_form(base.nx, base.nr, base.ny));
        SolveOptions dbl = base;
        dbl.nx = 257;
        dbl.nr = 257;
        dbl.ny = 129;
        std::printf("solving kernels at (%d,%d,%d)...\n", dbl.nx, dbl.nr, dbl.ny);
        auto ks2 = solve_continuum_kernels(P, dbl);
        const auto err2 = kernel_sup_error(ks2, example_closed_form(dbl.nx, dbl.nr, dbl.ny));
        const double sup1 = std::max(err.K, err.L);
        const bool pass = sup1 <= 1e-2 && err.K >= 2.0 * err2.K && err.L >= 2.0 * err2.L;
        criterion(1, "closed-form kernel reproduction", pass,
                  fmt("sup K=%.2e L=%.2e; doubled K=%.2e L=%.2e", err.K, err.L, err2.K, err2.L));
    }

    // ---- 2. discontinuity localization -------------------------------------
    {
        bool jump_ok = true;
        double jmin = 1e300, jmax = -1e300;
        for (int k = 0; k <= 18; ++k) {
            const double x = 0.1 + 0.05 * k;
            const double below = ks.eval_L_on_segment(0, 1, 1, x, 0.5 * x);
            const double above = ks.eval_L_on_segment(0, 1, 0, x, 0.5 * x);
            const double jump = above - below;
            jmin = std::min(jmin, jump);
            jmax = std::max(jmax, jump);
            jump_ok = jump_ok && std::abs(jump - 2.0) <= 0.1;
        }
        // the y-resolved family stays continuous across the same curve
        double kjump = 0.0;
        const KTable& lowseg = ks.K[static_cast<std::size_t>(ks.seg_index(0, 1))];
        const KTable& upseg = ks.K[static_cast<std::size_t>(ks.seg_index(0, 0))];
        for (int a = 0; a < lowseg.g.nx; ++a)
            for (int c = 0; c < lowseg.nyn; ++c)
                kjump = std::max(kjump, std::abs(lowseg.row(a, lowseg.g.nr - 1)[c] - upseg.row(a, 0)[c]));
        const bool pass = jump_ok && kjump <= 5.0 * base.tol;
        criterion(2, "discontinuity localized to the scalar family", pass,
                  fmt("jump range [%.3f, %.3f], y-family mismatch %.2e", jmin, jmax, kjump));
    }

    // ---- 3. boundary and continuity certificate ----------------------------
    {
        const auto res = kernel_residual(ks, P);
        const double worst = std::max({res.bc_diag_K, res.bc_diag_L, res.bc_xi0, res.cont_K, res.cont_L});
        criterion(3, "boundary/continuity certificate", worst <= 1e-3,
                  fmt("diagK=%.1e diagL=%.1e axis=%.1e contK=%.1e contL=%.1e", res.bc_diag_K,
                      res.bc_diag_L, res.bc_xi0, res.cont_K, res.cont_L));
    }

    // ---- 4. stabilization of the n=10 plant --------------------------------
    SimOptions sim;
    sim.nx = 256;
    sim.T = 5.0;
    sim.cfl = 0.5;
    sim.save_stride = 16;
    const int n10 = 10;
    const auto d10 = example::discrete_params(n10);
    auto u0_10 = [](int i, double x) { return example::initial_u(i, n10, x); };
    auto v0 = [](int j, double x) { return example::initial_v(j, x); };
    auto gains10 = sample_gains(ks, n10, SamplingMode::Pointwise);
    Trajectory closed10 = simulate(d10, sampled_gain_controller(gains10), sim, u0_10, v0);
    {
        SimOptions open_opts = sim;
        open_opts.blowup_factor = 1e12;
        auto open10 = simulate(d10, zero_controller(2), open_opts, u0_10, v0);
        const double closed_ratio = closed10.e_norms.back() / closed10.e_norms.front();
        const double open_ratio = open10.e_norms.back() / open10.e_norms.front();
        const bool pass = closed_ratio <= 0.1 && open_ratio > 1.0;
        criterion(4, "closed loop decays, open loop grows", pass,
                  fmt("closed E(T)/E(0)=%.2e, open E(T)/E(0)=%.2e", closed_ratio, open_ratio));
    }

    // ---- 5. control-law convergence along the sampling ladder --------------
    {
        std::vector<double> gaps;
        for (int n : {2, 6, 10}) {
            const auto d = example::discrete_params(n);
            auto nm = solve_nm_kernels(d, base);
            auto gains = sample_gains(ks, n, SamplingMode::Pointwise);
            Trajectory tr = n == n10 ? closed10
                                     : simulate(d, sampled_gain_controller(gains), sim,
                                                [n](int i, double x) { return example::initial_u(i, n, x); },
                                                v0);
            double worst = 0.0;
            for (const auto& s : tr.snapshots) {
                const auto Us = eval_control_sampled(gains, s.view());
                const auto Ue = eval_control_exact(nm, s.view());
                double g2 = 0.0;
                for (std::size_t j = 0; j < Us.size(); ++j) g2 += (Us[j] - Ue[j]) * (Us[j] - Ue[j]);
                worst = std::max(worst, std::sqrt(g2));
            }
            gaps.push_back(worst);
        }
        const bool pass = gaps[1] < gaps[0] && gaps[2] < gaps[1] && gaps[2] <= 0.5 * gaps[0];
        criterion(5, "sampled control approaches the exact law", pass,
                  fmt("gaps n=2:%.3f n=6:%.3f n=10:%.3f", gaps[0], gaps[1], gaps[2]));
    }

    // ---- 6. kernel approximation ladder ------------------------------------
    {
        std::vector<double> dist;
        for (int n : {2, 4, 8, 16}) {
            auto nm = solve_nm_kernels(example::discrete_params(n), base);
            dist.push_back(kernel_distance(ks, nm, n).K_distance);
        }
        bool decreasing = true;
        for (std::size_t k = 1; k < dist.size(); ++k) decreasing = decreasing && dist[k] < dist[k - 1];
        const bool pass = decreasing && dist.back() <= dist.front() / 3.0;
        criterion(6, "continuum kernels approximate the exact family", pass,
                  fmt("distances %.3f / %.3f / %.3f / %.3f", dist[0], dist[1], dist[2], dist[3]));
    }

    // ---- 7. solution convergence of the family ------------------------------
    {
        ConvergenceOptions co;
        co.sim = sim;
        co.sim.T = 1.0;
        auto rep = convergence_study(
            [](int n) { return example::discrete_params(n); }, {4, 8, 16},
            [](int n, int i, double x) { return example::initial_u(i, n, x); }, v0,
            zero_controller(2), co);
        bool decreasing = true;
        for (std::size_t k = 1; k < rep.distances.size(); ++k)
            decreasing = decreasing && rep.distances[k] < rep.distances[k - 1];
        const bool pass = decreasing && rep.ratio_last_first <= 0.5;
        criterion(7, "solutions converge to the fine reference", pass,
                  fmt("n_ref=%d distances %.4f / %.4f / %.4f", rep.n_ref, rep.distances[0],
                      rep.distances[1], rep.distances[2]));
    }

    // ---- 8. transform integrity ---------------------------------------------
    TransformOperator op(ks, n10, sim.nx);
    Trajectory cont10 = simulate(d10, [&op](const StateSnapshot& s) { return op.control(s); }, sim,
                                 u0_10, v0);
    {
        std::mt19937_64 rng(42);
        std::uniform_real_distribution<double> amp(-1.0, 1.0);
        double worst_rt = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            StateSnapshot s;
            s.n = n10;
            s.m = 2;
            s.nx = sim.nx;
            s.u.resize(static_cast<std::size_t>(s.n) * s.nx);
            s.v.resize(static_cast<std::size_t>(s.m) * s.nx);
            for (int i = 0; i < s.n; ++i) {
                const double a = amp(rng), b = amp(rng), c = amp(rng);
                for (int g = 0; g < s.nx; ++g) {
                    const double x = static_cast<double>(g) / (s.nx - 1);
                    s.u[static_cast<std::size_t>(i) * s.nx + g] = a + b * std::sin(3.0 * x) + c * x * x;
                }
            }
            for (int j = 0; j < s.m; ++j) {
                const double a = amp(rng), b = amp(rng);
                for (int g = 0; g < s.nx; ++g) {
                    const double x = static_cast<double>(g) / (s.nx - 1);
                    s.v[static_cast<std::size_t>(j) * s.nx + g] = a * std::cos(2.0 * x) + b * x;
                }
            }
            auto back = op.invert(op.apply(s));
            double err = 0.0, scale = 1e-12;
            for (std::size_t k = 0; k < s.v.size(); ++k) {
                err = std::max(err, std::abs(back.v[k] - s.v[k]));
                scale = std::max(scale, std::abs(s.v[k]));
            }
            worst_rt = std::max(worst_rt, err / scale);
        }
        double worst_beta = 0.0;
        for (const auto& s : cont10.snapshots) {
            if (s.t < 1.0) continue;
            const auto tgt = op.apply(s);
            for (int j = 0; j < 2; ++j)
                worst_beta = std::max(worst_beta,
                                      std::abs(tgt.beta[static_cast<std::size_t>(j) * sim.nx + sim.nx - 1]));
        }
        const bool pass = worst_rt <= 1e-3 && worst_beta <= 1e-2;
        criterion(8, "transform round trip and target boundary", pass,
                  fmt("roundtrip rel err %.2e, max |beta(t,1)| %.2e", worst_rt, worst_beta));
    }

    // ---- 9. decay certificate along the target trajectory -------------------
    {
        CouplingOptions co;
        co.nxy = 65;
        auto ct = solve_coupling_C(ks, P, co);
        auto b = compute_bounds(P, &ks, &ct);
        auto lp = choose_lyapunov_params(b, P.m);

        auto scan = [&](const LyapunovParams& pars, int& ups, double& worst, double& rate) {
            std::vector<double> V, ts;
            for (const auto& s : cont10.snapshots) {
                V.push_back(lyapunov_value(op.apply(s), pars, P, n10));
                ts.push_back(s.t);
            }
            ups = 0;
            worst = 1.0;
            double vfloor = 0.0;
            for (std::size_t k = 0; k < V.size(); ++k)
                if (ts[k] >= 1.0 && vfloor == 0.0) vfloor = 1e-12 * V[k];
            for (std::size_t k = 1; k < V.size(); ++k)
                if (ts[k - 1] >= 1.0 && V[k] > V[k - 1] + vfloor) {
                    ++ups;
                    worst = std::max(worst, V[k] / V[k - 1]);
                }
            double st = 0, sl = 0, stt = 0, stl = 0;
            int cnt = 0;
            for (std::size_t k = 0; k < V.size(); ++k) {
                if (ts[k] < 1.0 || V[k] <= 0.0) continue;
                st += ts[k];
                sl += std::log(V[k]);
                stt += ts[k] * ts[k];
                stl += ts[k] * std::log(V[k]);
                ++cnt;
            }
            rate = (cnt * stl - st * sl) / (cnt * stt - st * st);
        };

        int ups = 0;
        double worst = 1.0, rate = 0.0;
        scan(lp, ups, worst, rate);
        const bool pass = ups == 0 && rate < 0.0;
        criterion(9, "weighted energy decays along the target trajectory", pass,
                  fmt("delta=%.1f: %d up-moves (worst x%.2f), envelope rate %.3f", lp.delta, ups,
                      worst, rate));
        if (!pass) {
            // context: the same trajectory under moderate exponential weights
            auto bnc = compute_bounds(P, &ks, nullptr);
            auto lp_nc = choose_lyapunov_params(bnc, P.m);
            int ups2 = 0;
            double worst2 = 1.0, rate2 = 0.0;
            scan(lp_nc, ups2, worst2, rate2);
            std::printf("       note: certificate weights exp(%.1f x) sit below the first-order "
                        "scheme's error floor at nx=%d;\n"
                        "       with delta=%.2f (coupling bounds omitted) the same trajectory has "
                        "%d up-moves, envelope rate %.3f\n",
                        lp.delta, sim.nx, lp_nc.delta, ups2, rate2);
        }
    }

    // ---- 10. lift equivalence ------------------------------------------------
    {
        auto nm = solve_nm_kernels(example::discrete_params(2), base);
        const auto bc = nm_boundary_residual(nm, example::discrete_params(2));
        const bool pass = bc.diag <= 1e-3 && bc.xi0 <= 1e-3 && bc.isometry <= 1e-12;
        criterion(10, "step-parameter lift reproduces the exact kernels", pass,
                  fmt("diag=%.2e axis=%.2e isometry=%.2e cellwise=%.2e", bc.diag, bc.xi0,
                      bc.isometry, nm.cellwise_deviation));
    }

    std::printf("%d criteria failed; total wall time %.1fs\n", g_failures, elapsed(wall0));
    return g_failures == 0 ? 0 : 1;
}
