#include "pamlab/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "pamlab/errors.hpp"

namespace pamlab {

MixingWeights mixing(double y, double alpha) {
    if (!(alpha > 0.0)) throw std::domain_error("mixing: alpha must be positive");
    const double m = std::min(alpha * std::fabs(y), 1.0);
    return {std::sqrt(m), std::sqrt(1.0 - m)};
}

namespace {

double sup_abs_diff(const Field& a, const Field& b) {
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        const double d = std::fabs(a[i] - b[i]);
        if (d > m) m = d;
    }
    return m;
}

double min_diff(const Field& a, const Field& b) {
    double m = std::numeric_limits<double>::infinity();
    for (int i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d < m) m = d;
    }
    return m;
}

// Sup over cells of |log a_i - log b_i|; bitwise-equal cells contribute zero
// even at the positivity floor.
double sup_log_ratio(const Field& a, const Field& b) {
    double m = 0.0;
    for (int i = 0; i < a.size(); ++i) {
        if (a[i] == b[i]) continue;
        if (!(a[i] > 0.0) || !(b[i] > 0.0))
            return std::numeric_limits<double>::infinity();
        const double d = std::fabs(std::log(a[i] / b[i]));
        if (d > m) m = d;
    }
    return m;
}

int whole_steps(double from, double to, double dt) {
    const double span = to - from;
    if (span <= 0.0) return 0;
    return static_cast<int>(std::floor(span / dt + 1e-9));
}

} // namespace

PairResult evolve_coupled_pam_pair(TrajectoryState& u, TrajectoryState& v,
                                   const PairConfig& pair, const SolverConfig& cfg,
                                   double t_end, int record_stride) {
    if (!(u.field.grid == v.field.grid))
        throw std::domain_error("coupled pair: grids differ");
    if (u.time != v.time)
        throw std::domain_error("coupled pair: times differ");

    const Grid grid = u.field.grid;
    const int n = grid.n_points;
    if (record_stride < 1) record_stride = 1;
    PairResult result;

    StepWorkspace ws_u, ws_v;
    ws_u.prepare(grid, cfg, cfg.dt);
    ws_v.prepare(grid, cfg, cfg.dt);
    std::vector<double> dW(static_cast<std::size_t>(n));
    std::vector<double> dW0(static_cast<std::size_t>(n));
    std::vector<double> mixed(static_cast<std::size_t>(n));

    auto record = [&](bool force) {
        static_cast<void>(force);
        PairRecord r;
        r.time = u.time;
        r.x_l1 = quadrature(v.field) - quadrature(u.field);
        r.sup_diff = sup_abs_diff(v.field, u.field);
        r.min_diff = min_diff(v.field, u.field);
        r.sup_v = sup_norm(v.field);
        result.records.push_back(r);
    };

    auto met_now = [&]() {
        return sup_abs_diff(u.field, v.field) < pair.meet_tol * sup_norm(v.field);
    };

    record(true);
    if (pair.meet_tol > 0.0 && met_now()) {
        result.meeting_time = u.time;
        v.field = u.field;
    }

    auto do_step = [&](double dt) {
        fill_increment(u.stream, grid, dt, dW.data());
        ++u.stream.step_counter;
        fill_increment(v.stream, grid, dt, dW0.data());
        ++v.stream.step_counter;
        // Mixing weights from the pre-step fields.
        for (int i = 0; i < n; ++i) {
            const double denom = std::max(v.field[i], pair.floor_v);
            const MixingWeights mw = mixing((u.field[i] - v.field[i]) / denom, pair.alpha);
            mixed[i] = mw.psi * dW[i] + mw.phi * dW0[i];
        }
        step_pam_with(u, cfg, dt, pair.mu, pair.sigma, dW.data(), ws_u);
        step_pam_with(v, cfg, dt, pair.mu, pair.sigma, mixed.data(), ws_v);
        for (int i = 0; i < n; ++i)
            if (v.field[i] <= cfg.positivity_floor) ++result.v_floor_hits;
        result.v_cell_steps += static_cast<std::uint64_t>(n);
        if (!result.meeting_time && pair.meet_tol > 0.0 && met_now()) {
            result.meeting_time = u.time;
            v.field = u.field;
        }
    };

    const int full = whole_steps(u.time, t_end, cfg.dt);
    for (int k = 0; k < full; ++k) {
        do_step(cfg.dt);
        if ((k + 1) % record_stride == 0) record(false);
    }
    const double rem = t_end - u.time;
    if (rem > cfg.dt * 1e-12 && rem > 0.0) {
        ws_u.prepare(grid, cfg, rem);
        ws_v.prepare(grid, cfg, rem);
        do_step(rem);
    }
    u.time = t_end;
    v.time = t_end;
    if (std::fabs(result.records.back().time - t_end) > cfg.dt * 1e-6) record(true);

    result.degeneracy_warning =
        result.v_cell_steps > 0 &&
        static_cast<double>(result.v_floor_hits) > 1e-3 * static_cast<double>(result.v_cell_steps);
    return result;
}

std::vector<std::pair<double, double>> l1_difference_series(const PairResult& run,
                                                            double ordering_tol) {
    std::vector<std::pair<double, double>> series;
    series.reserve(run.records.size());
    for (const PairRecord& r : run.records) {
        if (r.min_diff < -ordering_tol)
            throw OrderingError("l1_difference_series: ordering violated at t = " +
                                std::to_string(r.time));
        series.emplace_back(r.time, r.x_l1);
    }
    return series;
}

double log_plus(double x) { return std::log(std::max(x, M_E)); }

CouplingSchedule build_schedule(double epsilon, double L_star, double eta, int n_max) {
    const double eps_max = std::exp(-std::exp(M_E));
    if (!(epsilon > 0.0) || !(epsilon <= eps_max))
        throw std::domain_error("build_schedule: epsilon must lie in (0, exp(-e^e)]");
    if (!(L_star > 1.0)) throw std::domain_error("build_schedule: L_star must exceed 1");
    if (!(eta > 0.0)) throw std::domain_error("build_schedule: eta must be positive");
    if (n_max < 1) throw std::domain_error("build_schedule: n_max must be >= 1");

    CouplingSchedule s;
    s.epsilon = epsilon;
    s.L_star = L_star;
    s.eta = eta;
    s.n_max = n_max;
    s.delta = 1.0 / std::log(std::log(1.0 / epsilon));
    const double abs_log_delta = std::fabs(std::log(s.delta));

    s.T.resize(static_cast<std::size_t>(n_max) + 1);
    s.T[0] = L_star * std::log(L_star / epsilon);
    for (int k = 0; k < n_max; ++k)
        s.T[static_cast<std::size_t>(k) + 1] =
            s.T[static_cast<std::size_t>(k)] + s.delta * std::pow(log_plus(k), -3.0);

    s.eps_n.resize(static_cast<std::size_t>(n_max) + 1);
    s.alpha_n.resize(static_cast<std::size_t>(n_max) + 1);
    s.eta_n.resize(static_cast<std::size_t>(n_max) + 1);
    const double ld4 = std::pow(abs_log_delta, 4.0);
    for (int k = 1; k <= n_max; ++k) {
        const double nk = static_cast<double>(k);
        s.eps_n[static_cast<std::size_t>(k)] = s.delta * std::pow(nk, -2.0 - 4.0 * eta) / ld4;
        s.alpha_n[static_cast<std::size_t>(k)] = std::pow(nk, -eta) / abs_log_delta;
        s.eta_n[static_cast<std::size_t>(k)] = s.alpha_n[static_cast<std::size_t>(k)];
    }
    s.eps_n[0] = s.eps_n[1];
    s.alpha_n[0] = 1.0;          // stage 0 couples with unit gain
    s.eta_n[0] = 1.0 / abs_log_delta;

    for (int k = 0; k < n_max; ++k)
        if (!(s.T[static_cast<std::size_t>(k) + 1] > s.T[static_cast<std::size_t>(k)]))
            throw std::domain_error("build_schedule: stage times are not increasing");
    return s;
}

double schedule_growth_ratio(const CouplingSchedule& s, int n) {
    if (n < 1 || n > s.n_max) throw std::domain_error("schedule_growth_ratio: n out of range");
    const double num = s.T[static_cast<std::size_t>(n)] - s.T[0];
    const double den = static_cast<double>(n) * s.delta * std::pow(log_plus(n), -3.0);
    return num / den;
}

StagedResult run_staged_coupling(const ReactionSpec& spec, const Field& w0,
                                 const CouplingSchedule& sched, const SolverConfig& cfg,
                                 std::uint64_t master_seed, std::uint32_t trajectory_id,
                                 int record_stride, double meet_tol) {
    const HighNoiseReport hn = check_high_noise(spec);
    if (!hn.holds)
        throw std::domain_error("run_staged_coupling: high-noise condition fails");
    if (inf_value(w0) < 0.0 || sup_norm(w0) == 0.0)
        throw std::domain_error("run_staged_coupling: w0 must be nonnegative and not zero");

    const Grid grid = w0.grid;
    const int n = grid.n_points;
    if (record_stride < 1) record_stride = 1;
    const double gamma = dissipation_rate(spec);

    StagedResult result;
    result.gamma = gamma;

    TrajectoryState w;
    w.field = w0;
    w.spec = spec;
    w.stream = NoiseStream{master_seed, 0, trajectory_id, 0};

    Recorder rec;
    rec.stride = record_stride;

    // Dissipation phase [0, T_0].
    evolve(w, cfg, sched.T[0], &rec);

    TrajectoryState u;
    u.time = w.time;
    u.field = w.field;
    u.spec = make_linear(spec.mu, spec.sigma);
    // u never samples its own stream; stage noises come from dedicated streams.

    Field v = w.field;

    StepWorkspace ws_w, ws_v, ws_u;
    ws_w.prepare(grid, cfg, cfg.dt);
    ws_v.prepare(grid, cfg, cfg.dt);
    ws_u.prepare(grid, cfg, cfg.dt);
    std::vector<double> dW(static_cast<std::size_t>(n));
    std::vector<double> dWn(static_cast<std::size_t>(n));
    std::vector<double> mixed(static_cast<std::size_t>(n));

    auto boundary_checks = [&](double T_n) {
        if (!(inf_value(w.field) > 0.0))
            throw OscillationError("staged coupling: inf w = 0 at stage boundary t = " +
                                   std::to_string(T_n));
        const double frac = w.cell_steps
            ? static_cast<double>(w.clamp_count) / static_cast<double>(w.cell_steps)
            : 0.0;
        if (frac > 1e-3)
            throw DegeneracyError("staged coupling: clamp fraction exceeded 0.1%");
    };

    boundary_checks(sched.T[0]);

    StageRow row0;
    row0.n = 0;
    row0.T_n = sched.T[0];
    row0.eps_n = sched.eps_n[0];
    row0.alpha_n = sched.alpha_n[0];
    row0.A_n = true; // refined below from the recorded sup series
    row0.jump_gap = 0.0;
    row0.log_ratio_sup = 0.0;
    result.rows.push_back(row0);

    TrajectoryState v_state; // v wrapped for the shared-step driver
    v_state.spec = make_linear(spec.mu, spec.sigma);

    for (int stage = 0; stage < sched.n_max; ++stage) {
        const double t_next = sched.T[static_cast<std::size_t>(stage) + 1];
        const double alpha = sched.alpha_n[static_cast<std::size_t>(stage)];
        const double Kn = sup_abs_diff(u.field, w.field);
        const double Mn = Kn + (sched.eps_n[static_cast<std::size_t>(stage)] +
                                std::max(sched.alpha_n[static_cast<std::size_t>(stage)],
                                         sched.eps_n[static_cast<std::size_t>(stage)])) *
                                   sup_norm(w.field);
        double sup_uw = 0.0;
        std::optional<double> meeting;

        v_state.time = w.time;
        v_state.field = v;

        NoiseStream stage_stream{master_seed, static_cast<std::uint32_t>(stage) + 1,
                                 trajectory_id, 0};

        auto do_step = [&](double dt, bool refactor) {
            if (refactor) {
                ws_w.prepare(grid, cfg, dt);
                ws_v.prepare(grid, cfg, dt);
                ws_u.prepare(grid, cfg, dt);
            }
            fill_increment(w.stream, grid, dt, dW.data());
            ++w.stream.step_counter;
            fill_increment(stage_stream, grid, dt, dWn.data());
            ++stage_stream.step_counter;
            for (int i = 0; i < n; ++i) {
                const double denom = std::max(u.field[i], 1e-30);
                const MixingWeights mw =
                    mixing((v_state.field[i] - u.field[i]) / denom, alpha);
                mixed[i] = mw.psi * dW[i] + mw.phi * dWn[i];
            }
            step_she_with(w, cfg, dt, dW.data(), ws_w);
            step_pam_with(v_state, cfg, dt, spec.mu, spec.sigma, dW.data(), ws_v);
            step_pam_with(u, cfg, dt, spec.mu, spec.sigma, mixed.data(), ws_u);
            if (rec.stride > 0 && (w.stream.step_counter % static_cast<std::uint64_t>(rec.stride) == 0))
                rec.note(w.time, w.field, w.clamp_count, false);
            if (!meeting && sup_abs_diff(u.field, v_state.field) <
                                meet_tol * sup_norm(v_state.field)) {
                meeting = u.time;
                u.field = v_state.field;
            }
            sup_uw = std::max(sup_uw, sup_abs_diff(u.field, w.field));
        };

        if (!meeting && sup_abs_diff(u.field, v_state.field) < meet_tol * sup_norm(v_state.field)) {
            meeting = u.time;
            u.field = v_state.field;
        }

        const int full = whole_steps(w.time, t_next, cfg.dt);
        bool refactored = (ws_w.dt != cfg.dt);
        for (int k = 0; k < full; ++k) {
            do_step(cfg.dt, refactored);
            refactored = false;
        }
        const double rem = t_next - w.time;
        if (rem > cfg.dt * 1e-12 && rem > 0.0) do_step(rem, true);
        w.time = t_next;
        v_state.time = t_next;
        u.time = t_next;

        boundary_checks(t_next);

        StageRow row;
        row.n = stage + 1;
        row.T_n = t_next;
        row.eps_n = sched.eps_n[static_cast<std::size_t>(stage) + 1];
        row.alpha_n = sched.alpha_n[static_cast<std::size_t>(stage) + 1];
        row.meeting_time = meeting;
        const double K_next = sup_abs_diff(u.field, w.field);
        row.A_n = K_next <= row.eps_n * sup_norm(w.field);
        row.B_n = sup_uw <= Mn;
        row.jump_gap = sup_abs_diff(v_state.field, w.field); // v(T_n-) vs v(T_n) = w(T_n)
        row.log_ratio_sup = sup_log_ratio(w.field, u.field);
        result.rows.push_back(row);

        v = w.field; // stage restart
    }

    rec.note(w.time, w.field, w.clamp_count, true);
    result.w_records = std::move(rec.records);
    result.A0 = !first_exceedance_time(result.w_records, gamma, sched.T[0]).has_value();
    result.rows[0].A_n = result.A0;
    result.clamp_count = w.clamp_count;
    result.cell_steps = w.cell_steps;
    return result;
}

} // namespace pamlab
