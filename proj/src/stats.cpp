#include "pamlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pamlab/errors.hpp"

namespace pamlab {

double gamma2(double sigma) {
    const double s2 = sigma * sigma;
    return (s2 / 8.0) * (1.0 + s2 / 12.0);
}

double sample_mean(const std::vector<double>& xs) {
    double acc = 0.0;
    for (double x : xs) acc += x;
    return acc / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = sample_mean(xs);
    double acc = 0.0;
    for (double x : xs) acc += (x - m) * (x - m);
    return acc / static_cast<double>(xs.size() - 1);
}

double sample_skewness(const std::vector<double>& xs) {
    const double m = sample_mean(xs);
    double m2 = 0.0, m3 = 0.0;
    for (double x : xs) {
        const double d = x - m;
        m2 += d * d;
        m3 += d * d * d;
    }
    m2 /= static_cast<double>(xs.size());
    m3 /= static_cast<double>(xs.size());
    if (m2 <= 0.0) return 0.0;
    return m3 / std::pow(m2, 1.5);
}

double sample_excess_kurtosis(const std::vector<double>& xs) {
    const double m = sample_mean(xs);
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - m;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    m2 /= static_cast<double>(xs.size());
    m4 /= static_cast<double>(xs.size());
    if (m2 <= 0.0) return 0.0;
    return m4 / (m2 * m2) - 3.0;
}

namespace {

const StepRecord* record_at_or_after(const std::vector<StepRecord>& records, double t) {
    for (const StepRecord& r : records)
        if (r.time >= t - 1e-12) return &r;
    return nullptr;
}

const Field* snapshot_at(const TrajectoryResult& tr, double t) {
    for (const auto& [st, f] : tr.snapshots)
        if (std::fabs(st - t) <= 1e-9) return &f;
    return nullptr;
}

// Student-t 97.5% quantiles for small degrees of freedom; normal beyond.
double t_quantile_975(int df) {
    static const double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365,
                                   2.306,  2.262, 2.228, 2.201, 2.179, 2.160, 2.145,
                                   2.131,  2.120, 2.110, 2.101, 2.093, 2.086, 2.080,
                                   2.074,  2.069, 2.064, 2.060, 2.056, 2.052, 2.048,
                                   2.045,  2.042};
    if (df < 1) return 12.706;
    if (df <= 30) return table[df - 1];
    return 1.96;
}

} // namespace

LyapunovEstimate lyapunov_estimate(const EnsembleResult& ensemble, double window_start,
                                   double window_end) {
    LyapunovEstimate est;
    est.t_end = window_end;
    std::vector<double> per_traj;
    // Pooled regression of mean_x log w on t over the window.
    double sxx = 0.0, sxy = 0.0, sx = 0.0, sy = 0.0;
    std::int64_t reg_n = 0;
    for (const TrajectoryResult& tr : ensemble.trajectories) {
        const StepRecord* end_rec = record_at_or_after(tr.records, window_end);
        if (!end_rec)
            throw std::domain_error("lyapunov_estimate: trajectory does not reach the window end");
        for (const StepRecord& r : tr.records) {
            if (r.time < window_start || r.time > window_end + 1e-12) continue;
            if (std::isnan(r.mean_log))
                throw PositivityError("lyapunov_estimate: field not strictly positive in window");
            if (r.time > 0.0) {
                sx += r.time;
                sy += r.mean_log;
                sxx += r.time * r.time;
                sxy += r.time * r.mean_log;
                ++reg_n;
            }
        }
        per_traj.push_back(end_rec->mean_log / end_rec->time);
    }
    est.n_trajectories = static_cast<int>(per_traj.size());
    est.lambda_hat = sample_mean(per_traj);
    est.stderr_hat = per_traj.size() > 1
                         ? std::sqrt(sample_variance(per_traj) / static_cast<double>(per_traj.size()))
                         : 0.0;
    const double denom = static_cast<double>(reg_n) * sxx - sx * sx;
    est.regression_slope = denom != 0.0 ? (static_cast<double>(reg_n) * sxy - sx * sy) / denom : 0.0;
    return est;
}

CltReport clt_diagnostics(const EnsembleResult& ensemble, double t, double mu, double sigma) {
    CltReport rep;
    const double center = (mu - 2.0 * gamma2(sigma)) * t;
    const double scale = std::sqrt(t);
    std::vector<double> y, flat;
    for (const TrajectoryResult& tr : ensemble.trajectories) {
        const Field* f = snapshot_at(tr, t);
        if (!f) throw std::domain_error("clt_diagnostics: missing snapshot at requested time");
        double acc = 0.0, lo = 0.0, hi = 0.0;
        bool first = true;
        for (double v : f->values) {
            if (!(v > 0.0))
                throw PositivityError("clt_diagnostics: field not strictly positive");
            const double lv = std::log(v);
            acc += lv;
            if (first) { lo = hi = lv; first = false; }
            else { lo = std::min(lo, lv); hi = std::max(hi, lv); }
        }
        const double mean_log = acc / static_cast<double>(f->values.size());
        y.push_back(scale > 0.0 ? (mean_log - center) / scale : 0.0);
        flat.push_back(hi - lo);
    }
    rep.n_trajectories = static_cast<int>(y.size());
    rep.spatial_flatness = sample_mean(flat);
    rep.flatness_stderr = flat.size() > 1
        ? std::sqrt(sample_variance(flat) / static_cast<double>(flat.size()))
        : 0.0;
    const double var_y = sample_variance(y);
    if (var_y <= 0.0) {
        rep.degenerate = true;
        rep.skewness = 0.0;
        rep.excess_kurtosis = 0.0;
    } else {
        rep.skewness = sample_skewness(y);
        rep.excess_kurtosis = sample_excess_kurtosis(y);
    }
    return rep;
}

FrequencyEstimate wilson_interval(int successes, int total) {
    FrequencyEstimate fe;
    fe.successes = successes;
    fe.total = total;
    if (total == 0) return fe;
    const double z = 1.959963984540054; // 97.5% normal quantile
    const double p = static_cast<double>(successes) / total;
    const double z2 = z * z;
    const double denom = 1.0 + z2 / total;
    const double center = (p + z2 / (2.0 * total)) / denom;
    const double half = (z / denom) * std::sqrt(p * (1.0 - p) / total + z2 / (4.0 * total * total));
    fe.frequency = p;
    fe.wilson_low = std::max(0.0, center - half);
    fe.wilson_high = std::min(1.0, center + half);
    return fe;
}

FrequencyEstimate dissipation_probability(const EnsembleResult& ensemble, double gamma,
                                          double T, double horizon) {
    int ok = 0, total = 0;
    for (const TrajectoryResult& tr : ensemble.trajectories) {
        if (tr.records.empty() || tr.records.back().time < horizon - 1e-9)
            throw std::domain_error("dissipation_probability: records do not cover the horizon");
        ++total;
        bool exceeded = false;
        for (const StepRecord& r : tr.records) {
            if (r.time < T || r.time > horizon + 1e-12) continue;
            if (r.sup > std::exp(-gamma * r.time)) { exceeded = true; break; }
        }
        if (!exceeded) ++ok;
    }
    return wilson_interval(ok, total);
}

OscillationMoments oscillation_moments(const EnsembleResult& ensemble,
                                       const std::vector<double>& t_list, double k) {
    OscillationMoments om;
    om.times = t_list;
    for (double t : t_list) {
        std::vector<double> vals;
        for (const TrajectoryResult& tr : ensemble.trajectories) {
            const Field* f = snapshot_at(tr, t);
            if (!f) throw std::domain_error("oscillation_moments: missing snapshot");
            const double lo = inf_value(*f);
            if (!(lo > 0.0))
                throw PositivityError("oscillation_moments: field not strictly positive");
            vals.push_back(std::pow(max_value(*f) / lo, k));
        }
        const double m = sample_mean(vals);
        om.moment.push_back(m);
        om.stderr_m.push_back(vals.size() > 1
            ? std::sqrt(sample_variance(vals) / static_cast<double>(vals.size()))
            : 0.0);
        om.max_moment = std::max(om.max_moment, m);
    }
    return om;
}

DecayFit decay_exponent_fit(const std::vector<double>& times, const std::vector<double>& series) {
    if (times.size() != series.size())
        throw std::domain_error("decay_exponent_fit: size mismatch");
    DecayFit fit;
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < series.size(); ++i) {
        if (!(series[i] > 0.0) || !(times[i] > 0.0)) {
            ++fit.excluded_nonpositive;
            continue;
        }
        lx.push_back(std::log(times[i]));
        ly.push_back(std::log(series[i]));
    }
    fit.points_used = static_cast<int>(lx.size());
    if (fit.points_used < 10) return fit; // beta reported only with >= 10 stage points
    fit.window_lo = std::exp(*std::min_element(lx.begin(), lx.end()));
    fit.window_hi = std::exp(*std::max_element(lx.begin(), lx.end()));

    const double n = static_cast<double>(lx.size());
    const double mx = sample_mean(lx), my = sample_mean(ly);
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx <= 0.0) return fit;
    const double slope = sxy / sxx;
    double ss_res = 0.0;
    for (std::size_t i = 0; i < lx.size(); ++i) {
        const double pred = my + slope * (lx[i] - mx);
        ss_res += (ly[i] - pred) * (ly[i] - pred);
    }
    const double dof = n - 2.0;
    const double se = dof > 0.0 ? std::sqrt(ss_res / dof / sxx) : 0.0;
    fit.beta_hat = -slope;
    fit.half_width = t_quantile_975(static_cast<int>(dof)) * se;
    return fit;
}

std::vector<TailSumRow> tail_sum_check(const std::vector<double>& delta_list) {
    std::vector<TailSumRow> rows;
    for (double delta : delta_list) {
        if (!(delta > 0.0) || !(delta < 1.0))
            throw std::domain_error("tail_sum_check: delta must lie in (0, 1)");
        const double c = 1.0 / std::sqrt(delta);
        // Truncate where the integrand of the integral-test bound drops below
        // 1e-17; the integral tail then stays under 1e-15.
        double x_star = 4.0;
        while (x_star - c * std::pow(x_star, 1.5) > -42.0) x_star += 0.5;
        const std::int64_t N = static_cast<std::int64_t>(std::ceil(std::exp(x_star)));
        double sum = 0.0;
        for (std::int64_t n = N; n >= 3; --n) // ascending magnitude: stable summation
            sum += std::exp(-c * std::pow(std::log(static_cast<double>(n)), 1.5));
        TailSumRow row;
        row.delta = delta;
        row.sum = sum;
        row.ratio = sum / std::cbrt(delta);
        row.terms = N - 2;
        rows.push_back(row);
    }
    return rows;
}

} // namespace pamlab
