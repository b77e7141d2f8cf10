#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hyperstab/controller.hpp"
#include "hyperstab/kernel_tables.hpp"
#include "hyperstab/params.hpp"

namespace hyperstab {

struct StateSnapshot {
    double t = 0.0;
    int n = 0, m = 0, nx = 0;
    std::vector<double> u; ///< row-major (i * nx + g)
    std::vector<double> v; ///< row-major (j * nx + g)

    StateView view() const { return {n, m, nx, u.data(), v.data()}; }
};

struct TargetSnapshot {
    double t = 0.0;
    int n = 0, m = 0, nx = 0;
    std::vector<double> alpha; ///< pass-through of the rightward states
    std::vector<double> beta;  ///< transformed leftward states
};

struct Trajectory {
    std::vector<StateSnapshot> snapshots;
    std::vector<std::vector<double>> controls; ///< per snapshot, m entries
    std::vector<double> e_norms;               ///< per snapshot
    double dt = 0.0;
    int steps = 0;
};

using ControllerHook = std::function<std::vector<double>(const StateSnapshot&)>;

ControllerHook zero_controller(int m);
ControllerHook sampled_gain_controller(SampledGains gains);

struct SimOptions {
    int nx = 256;
    double cfl = 0.5;
    double T = 5.0;
    int save_stride = 16;
    double blowup_factor = 1e6; ///< abort when the norm exceeds this multiple of the start
    double dt_override = 0.0;   ///< exact step, for runs that must share time grids
};

/// Explicit closed-loop integration: first-order upwind in space per
/// transport direction, classical 4th-order one-step method in time, with
/// the boundary rows re-imposed at every stage. Throws BlowupError when the
/// guard trips.
Trajectory simulate(const DiscreteParams& d, const ControllerHook& control, const SimOptions& opts,
                    const std::function<double(int, double)>& u0,
                    const std::function<double(int, double)>& v0);

/// Weighted norm of the finite state (1/n on the rightward block).
double e_norm(const StateSnapshot& s);
/// Continuum counterpart on a target snapshot carrying n rows.
double ec_norm(const TargetSnapshot& s);

/// Volterra transform machinery on the simulator grid. The same quadrature
/// plan backs the forward transform, its inverse (forward substitution), and
/// the continuum control law, so the three stay mutually consistent.
class TransformOperator {
public:
    TransformOperator(const ContinuumKernelSet& ks, int n, int nx);

    TargetSnapshot apply(const StateSnapshot& s) const;
    StateSnapshot invert(const TargetSnapshot& t) const;
    /// Continuum control law evaluated with the transform's own quadrature.
    std::vector<double> control(const StateSnapshot& s) const;

private:
    struct PlanEntry {
        double xi;
        double w;
        int p;                ///< segment evaluated on (one-sided at breakpoints)
        std::size_t gain_off; ///< offset of the cached cell-mean gain row
    };
    double kernel_part(int i, int g, const std::vector<double>& u) const;

    const ContinuumKernelSet* ks_;
    int n_, nx_, m_;
    double dx_;
    std::vector<std::vector<PlanEntry>> plans_; ///< keyed i * nx + g
    std::vector<double> gains_;                 ///< cell-mean kernel rows per plan entry
    /// scalar-family quadrature folded onto grid nodes: per g, (i, j, h<=g)
    std::vector<std::vector<double>> Lw_;
};

struct LyapunovParams {
    double delta = 0.0;
    std::vector<double> D;
    double c_V = 0.0;
    std::vector<double> F;
};

/// Decay parameters from the computed bounds; the margin factor keeps the
/// strict inequalities strict.
LyapunovParams choose_lyapunov_params(const KernelBounds& b, int m, double margin = 1.01);

/// Weighted energy of a target snapshot.
double lyapunov_value(const TargetSnapshot& t, const LyapunovParams& lp, const ContinuumParams& p,
                      int n);

struct ConvergenceReport {
    std::vector<int> n_list;
    int n_ref = 0;
    std::vector<double> distances;      ///< max-over-time weighted distance per n
    std::vector<bool> resampled;        ///< n_ref not divisible by n
    double ratio_last_first = 0.0;
    std::optional<double> nx_sensitivity; ///< relative change when nx doubles
};

struct ConvergenceOptions {
    SimOptions sim;
    bool check_nx_sensitivity = false;
    int n_ref_factor = 4;
};

/// Simulates the plant family for each n against a fine step-lifted
/// reference and reports the weighted distance ladder of the cell-mean
/// comparison.
ConvergenceReport convergence_study(const std::function<DiscreteParams(int)>& family,
                                    const std::vector<int>& n_list,
                                    const std::function<double(int, int, double)>& u0_of_n,
                                    const std::function<double(int, double)>& v0,
                                    const ControllerHook& control_of_m,
                                    const ConvergenceOptions& opts);

/// Trajectory CSV: t then one column per saved field entry; norms CSV with
/// optional Lyapunov column; controls CSV.
void save_trajectory_csv(const Trajectory& tr, const std::string& file);
void save_norms_csv(const Trajectory& tr, const std::vector<double>& lyap, const std::string& file);
void save_controls_csv(const Trajectory& tr, const std::string& file);

} // namespace hyperstab
