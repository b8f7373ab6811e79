#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "pamlab/solver.hpp"

namespace pamlab {

/// Mixing weights phi = sqrt(min(alpha |y|, 1)), psi = sqrt(1 - phi^2).
/// phi^2 + psi^2 = 1 exactly by construction.
struct MixingWeights {
    double phi = 0.0;
    double psi = 1.0;
};
MixingWeights mixing(double y, double alpha);

/// Parameters of a coupled pair run: u is driven by its own stream W, v by
/// the mixture psi(y) W + phi(y) W0 with cellwise argument y = (u - v) / v.
struct PairConfig {
    double alpha = 1.0;
    double mu = 0.0;
    double sigma = 1.0;
    /// Relative sup-distance below which the pair is declared met and v is
    /// identified with u.  Zero disables identification entirely.  Note the
    /// discrete scheme cannot resolve distances below roughly
    /// sigma^2 * alpha * dt / spacing, so practical tolerances sit above
    /// that noise floor.
    double meet_tol = 1e-8;
    double floor_v = 1e-30; // regularizer for the mixing-argument denominator
};

struct PairRecord {
    double time = 0.0;
    double x_l1 = 0.0;     // integral of (v - u) over the torus
    double sup_diff = 0.0; // sup |v - u|
    double min_diff = 0.0; // min (v - u): negative values are ordering defects
    double sup_v = 0.0;
};

struct PairResult {
    std::optional<double> meeting_time;
    std::uint64_t v_floor_hits = 0;
    std::uint64_t v_cell_steps = 0;
    bool degeneracy_warning = false; // v at the positivity floor on > 0.1% of cells
    std::vector<PairRecord> records;
};

/// Evolve the coupled pair to t_end.  Both states must share grid and time;
/// u consumes its stream's increments, v the mixed increments built from the
/// same realization and v's own independent stream.  On meeting, v := u and
/// the two evolve identically from then on.
PairResult evolve_coupled_pam_pair(TrajectoryState& u, TrajectoryState& v,
                                   const PairConfig& pair, const SolverConfig& cfg,
                                   double t_end, int record_stride = 1);

/// L1-difference series X(t) from a recorded pair run started from ordered
/// data (u0 <= v0).  Throws OrderingError if min (v - u) drops below
/// -ordering_tol anywhere in the record.
std::vector<std::pair<double, double>> l1_difference_series(const PairResult& run,
                                                            double ordering_tol = 1e-9);

/// The deterministic coupling schedule: epsilon in (0, exp(-e^e)),
/// delta = 1 / log log(1/epsilon), T_0 = L* log(L*/epsilon),
/// T_{n+1} = T_n + delta (log_+ n)^{-3}, and the per-stage tolerance and
/// mixing-gain sequences.
struct CouplingSchedule {
    double epsilon = 0.0;
    double delta = 0.0;
    double L_star = 2.0;
    double eta = 0.1;
    int n_max = 0;
    std::vector<double> T;       // T[0..n_max]
    std::vector<double> eps_n;   // eps_n[0] duplicates eps_n[1]; formula applies for n >= 1
    std::vector<double> alpha_n; // alpha_n[0] = 1 (stage 0 uses unit gain)
    std::vector<double> eta_n;   // eta_n[0] = 1/|log delta|
};

double log_plus(double x); // log(max(x, e))

CouplingSchedule build_schedule(double epsilon, double L_star, double eta, int n_max);

/// (T_n - T_0) / (n delta (log_+ n)^{-3}) for schedule sanity checks.
double schedule_growth_ratio(const CouplingSchedule& s, int n);

struct StageRow {
    int n = 0;
    double T_n = 0.0;
    double eps_n = 0.0;
    double alpha_n = 0.0;
    std::optional<double> meeting_time;
    bool A_n = false;       // ||w - u|| <= eps_n ||w|| at T_n (n >= 1); tau(T_0) = inf for n = 0
    bool B_n = false;       // sup_{I_{n-1}} ||u - w|| <= M_{n-1} (defined for n >= 1)
    double jump_gap = 0.0;  // ||v(T_n-) - v(T_n)||
    double log_ratio_sup = 0.0; // ||log w(T_n) - log u(T_n)||_sup
};

struct StagedResult {
    std::vector<StageRow> rows;
    bool A0 = false;
    double gamma = 0.0;
    std::vector<StepRecord> w_records;
    std::uint64_t clamp_count = 0;
    std::uint64_t cell_steps = 0;
};

/// The staged construction: w solves the nonlinear equation on [0, T_max];
/// on each stage [T_n, T_{n+1}) the tracker v restarts from w(T_n) and runs
/// as a linear equation on w's noise, while u runs continuously on the
/// mixture psi_n W + phi_n W_n with per-stage gain alpha_n and argument
/// y = (v - u) / u.  Requires the high-noise condition and w0 >= 0, not
/// identically zero.
StagedResult run_staged_coupling(const ReactionSpec& spec, const Field& w0,
                                 const CouplingSchedule& sched, const SolverConfig& cfg,
                                 std::uint64_t master_seed, std::uint32_t trajectory_id,
                                 int record_stride = 100, double meet_tol = 1e-8);

} // namespace pamlab
