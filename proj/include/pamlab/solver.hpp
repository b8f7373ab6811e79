#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pamlab/noise.hpp"
#include "pamlab/reaction.hpp"
#include "pamlab/torus.hpp"

namespace pamlab {

/// Time-stepping parameters for the semi-implicit Euler-Maruyama scheme
///   (I - theta dt Lap_h) w_{k+1} = w_k + dt (1-theta) Lap_h w_k
///                                  + dt f(w_k) + g(w_k) dW_k,
/// with Lap_h the cyclic second difference.  theta = 1 (default) is
/// unconditionally stable; theta = 0 requires dt <= spacing^2 / 2.
struct SolverConfig {
    double dt = 2.5e-4;
    double theta = 1.0;
    double positivity_floor = 0.0;
    double blowup_cap = 1e12;
    /// Drift handling of the linear stepper.  false: explicit dt*mu*u term,
    /// bit-compatible with the nonlinear stepper on a linear reaction (the
    /// tracking experiments rely on that).  true: the drift acts as the exact
    /// factor e^{mu dt}, so a mu-shift under shared streams multiplies the
    /// trajectory through exactly (the exponent measurements rely on that).
    bool exact_exponential_drift = false;
};

/// Pre-factorized solver for (I - c Lap_h) x = rhs on a cyclic grid,
/// via Thomas elimination plus a Sherman-Morrison corner correction.
/// Factor once per (n, c); solve is O(n) with no allocation.
class PeriodicTridiag {
  public:
    PeriodicTridiag() = default;
    PeriodicTridiag(int n, double c);

    void solve(const double* rhs, double* x) const;
    double coefficient() const { return c_; }
    int size() const { return n_; }

  private:
    void thomas(const double* rhs, double* x) const;

    int n_ = 0;
    double c_ = 0.0;
    double off_ = 0.0;               // constant off-diagonal entry -c
    std::vector<double> inv_diag_;   // Thomas forward denominators, inverted
    std::vector<double> cprime_;     // Thomas forward coefficients
    std::vector<double> z_;          // solve of the corner-correction column
    double corr_denom_ = 0.0;
    double v_last_ = 0.0;
    mutable std::vector<double> y_;  // scratch for the forward sweep
};

/// One trajectory of a single field.
struct TrajectoryState {
    double time = 0.0;
    Field field;
    ReactionSpec spec;
    NoiseStream stream;
    std::uint64_t clamp_count = 0; // cells clamped at the positivity floor so far
    std::uint64_t cell_steps = 0;  // cells * steps taken so far
};

/// Per-step recording at a fixed stride.  Times are stamped from the step
/// lattice; sup is the sup-norm, inf the signed minimum, mass the torus
/// integral, clamp_count cumulative.
struct StepRecord {
    double time = 0.0;
    double sup = 0.0;
    double inf = 0.0;
    double mass = 0.0;
    std::uint64_t clamp_count = 0;
    double mean_log = 0.0; // spatial mean of log(field); NaN if any cell <= 0
};

struct Recorder {
    int stride = 1;                       // record every stride-th step (and the last)
    bool want_mean_log = false;
    std::vector<double> snapshot_times;   // absolute times; capture full profiles here
    std::vector<StepRecord> records;
    std::vector<std::pair<double, Field>> snapshots;

    void note(double time, const Field& f, std::uint64_t clamps, bool force);
};

/// Reusable buffers plus the pre-factorized implicit solve for one (grid, dt).
struct StepWorkspace {
    std::vector<double> noise;
    std::vector<double> rhs;
    PeriodicTridiag solver;
    double dt = -1.0;

    void prepare(const Grid& grid, const SolverConfig& cfg, double step_dt);
};

/// Low-level steppers driven by an externally supplied increment; used when
/// several fields must consume one noise realization.  They advance time,
/// apply the positivity floor, and run the finiteness/blowup checks.
void step_she_with(TrajectoryState& state, const SolverConfig& cfg, double dt,
                   const double* dW, StepWorkspace& ws);
void step_pam_with(TrajectoryState& state, const SolverConfig& cfg, double dt,
                   double mu, double sigma, const double* dW, StepWorkspace& ws);

/// Advance one step of the nonlinear equation.  Throws BlowupError past the
/// cap and NumericError on NaN.
void step_she(TrajectoryState& state, const SolverConfig& cfg);

/// Advance one step of the linear equation with drift mu and noise slope
/// sigma.  The drift acts as the exact factor e^{mu dt}, so trajectories with
/// shared streams and shifted mu differ by the exact exponential factor.
void step_pam(TrajectoryState& state, const SolverConfig& cfg, double mu, double sigma);

/// Evolve to t_end (final partial step shortened), recording along the way.
/// Two calls landing on the step lattice reproduce a single call bit-exactly.
void evolve(TrajectoryState& state, const SolverConfig& cfg, double t_end,
            Recorder* recorder = nullptr);

/// Same for the linear equation.
void evolve_pam(TrajectoryState& state, const SolverConfig& cfg, double mu, double sigma,
                double t_end, Recorder* recorder = nullptr);

/// First recorded time t >= T with sup-norm above exp(-gamma t); nullopt if
/// the bound holds through the recorded horizon.
std::optional<double> first_exceedance_time(const std::vector<StepRecord>& records,
                                            double gamma, double T);

} // namespace pamlab
