#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "pamlab/solver.hpp"

namespace pamlab {

/// One trajectory's contribution to an ensemble: the recorded series plus
/// any full-profile snapshots taken at requested times.
struct TrajectoryResult {
    std::uint32_t trajectory_id = 0;
    std::vector<StepRecord> records;
    std::vector<std::pair<double, Field>> snapshots;
    std::uint64_t clamp_count = 0;
    std::uint64_t cell_steps = 0;
};

struct EnsembleResult {
    std::vector<TrajectoryResult> trajectories;
};

/// Second-order Lyapunov correction gamma2(sigma) = (sigma^2/8)(1 + sigma^2/12).
/// The almost-sure exponent of t^{-1} log w is mu - 2 gamma2(sigma).
double gamma2(double sigma);

struct LyapunovEstimate {
    double lambda_hat = 0.0;  // ensemble/space average of log w(t_end, x) / t_end
    double stderr_hat = 0.0;  // standard error across trajectories
    double regression_slope = 0.0; // linear fit of mean_x log w(t) over the window
    double t_end = 0.0;
    int n_trajectories = 0;
};

/// Requires every trajectory to carry mean_log records covering
/// [window_start, window_end]; throws PositivityError when a field was not
/// strictly positive somewhere in the window.
LyapunovEstimate lyapunov_estimate(const EnsembleResult& ensemble, double window_start,
                                   double window_end);

struct CltReport {
    double spatial_flatness = 0.0;    // mean over ensemble of sup log w - inf log w
    double flatness_stderr = 0.0;
    double skewness = 0.0;            // of (mean_x log w - (mu - 2 gamma2) t) / sqrt(t)
    double excess_kurtosis = 0.0;
    int n_trajectories = 0;
    bool degenerate = false;          // ensemble variance was zero
};

/// Uses the snapshot taken at time t on every trajectory.
CltReport clt_diagnostics(const EnsembleResult& ensemble, double t, double mu, double sigma);

struct FrequencyEstimate {
    double frequency = 0.0;
    double wilson_low = 0.0;
    double wilson_high = 0.0;
    int successes = 0;
    int total = 0;
};

/// Fraction of trajectories whose recorded sup-norm never exceeds
/// exp(-gamma t) on [T, horizon]; Wilson 95% interval attached.
FrequencyEstimate dissipation_probability(const EnsembleResult& ensemble, double gamma,
                                          double T, double horizon);

FrequencyEstimate wilson_interval(int successes, int total);

struct OscillationMoments {
    std::vector<double> times;
    std::vector<double> moment;   // Monte Carlo estimate of E[(sup/inf)^k] at each time
    std::vector<double> stderr_m;
    double max_moment = 0.0;
};

/// Moments of the oscillation ratio from snapshots at the given times; the
/// fields must be strictly positive there.
OscillationMoments oscillation_moments(const EnsembleResult& ensemble,
                                       const std::vector<double>& t_list, double k);

struct DecayFit {
    std::optional<double> beta_hat; // set only when >= 10 positive stage points
    double half_width = 0.0;        // 95% confidence half-width of beta_hat
    double window_lo = 0.0;
    double window_hi = 0.0;
    int points_used = 0;
    int excluded_nonpositive = 0;
};

/// Least-squares fit of log(series) against log(time): beta_hat = -slope.
/// Nonpositive series values are excluded and counted.
DecayFit decay_exponent_fit(const std::vector<double>& times,
                            const std::vector<double>& series);

struct TailSumRow {
    double delta = 0.0;
    double sum = 0.0;        // S(delta) with summation remainder below 1e-15
    double ratio = 0.0;      // S(delta) / delta^{1/3}
    std::int64_t terms = 0;
};

/// S(delta) = sum_{n>=3} exp(-delta^{-1/2} (log n)^{3/2}) per delta in (0,1).
std::vector<TailSumRow> tail_sum_check(const std::vector<double>& delta_list);

// Small reusable statistics helpers.
double sample_mean(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs); // unbiased
double sample_skewness(const std::vector<double>& xs);
double sample_excess_kurtosis(const std::vector<double>& xs);

} // namespace pamlab
