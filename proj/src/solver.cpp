#include "pamlab/solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "pamlab/errors.hpp"

namespace pamlab {

PeriodicTridiag::PeriodicTridiag(int n, double c) : n_(n), c_(c) {
    if (n < 4) throw std::domain_error("PeriodicTridiag: n must be >= 4");
    if (c == 0.0) return; // identity system
    const double k = c;          // coupling dt*theta/dx^2, folded in by caller
    const double b = 1.0 + 2.0 * k;
    off_ = -k;
    const double gamma = -b;

    // Modified diagonal for the Sherman-Morrison split.
    std::vector<double> diag(static_cast<std::size_t>(n), b);
    diag[0] = b - gamma;
    diag[static_cast<std::size_t>(n - 1)] = b - (off_ * off_) / gamma;

    inv_diag_.resize(static_cast<std::size_t>(n));
    std::vector<double> cprime(static_cast<std::size_t>(n));
    inv_diag_[0] = 1.0 / diag[0];
    cprime[0] = off_ * inv_diag_[0];
    for (int i = 1; i < n; ++i) {
        const double denom = diag[static_cast<std::size_t>(i)] - off_ * cprime[static_cast<std::size_t>(i - 1)];
        inv_diag_[static_cast<std::size_t>(i)] = 1.0 / denom;
        cprime[static_cast<std::size_t>(i)] = off_ * inv_diag_[static_cast<std::size_t>(i)];
    }
    cprime_ = std::move(cprime);

    // z = B^{-1} u for the corner column u = (gamma, 0, ..., 0, off)^T.
    std::vector<double> u(static_cast<std::size_t>(n), 0.0);
    u[0] = gamma;
    u[static_cast<std::size_t>(n - 1)] = off_;
    z_.resize(static_cast<std::size_t>(n));
    y_.resize(static_cast<std::size_t>(n));
    thomas(u.data(), z_.data());
    const double v_last = off_ / gamma; // v = (1, 0, ..., 0, off/gamma)
    corr_denom_ = 1.0 + z_[0] + v_last * z_[static_cast<std::size_t>(n - 1)];
    v_last_ = v_last;
}

void PeriodicTridiag::thomas(const double* rhs, double* x) const {
    const int n = n_;
    double* y = y_.data();
    y[0] = rhs[0] * inv_diag_[0];
    for (int i = 1; i < n; ++i)
        y[i] = (rhs[i] - off_ * y[i - 1]) * inv_diag_[static_cast<std::size_t>(i)];
    x[n - 1] = y[n - 1];
    for (int i = n - 2; i >= 0; --i)
        x[i] = y[i] - cprime_[static_cast<std::size_t>(i)] * x[i + 1];
}

void PeriodicTridiag::solve(const double* rhs, double* x) const {
    if (c_ == 0.0) {
        for (int i = 0; i < n_; ++i) x[i] = rhs[i];
        return;
    }
    thomas(rhs, x);
    const double vy = x[0] + v_last_ * x[n_ - 1];
    const double factor = vy / corr_denom_;
    for (int i = 0; i < n_; ++i) x[i] -= factor * z_[static_cast<std::size_t>(i)];
}

void StepWorkspace::prepare(const Grid& grid, const SolverConfig& cfg, double step_dt) {
    const std::size_t n = static_cast<std::size_t>(grid.n_points);
    noise.resize(n);
    rhs.resize(n);
    if (step_dt != dt) {
        solver = PeriodicTridiag(grid.n_points,
                                 cfg.theta * step_dt / (grid.spacing * grid.spacing));
        dt = step_dt;
    }
}

namespace {

void check_explicit_cfl(const SolverConfig& cfg, const Grid& grid, double dt) {
    if (cfg.theta == 0.0 && dt > grid.spacing * grid.spacing / 2.0)
        throw std::domain_error("explicit scheme requires dt <= spacing^2 / 2");
}

// Shared post-solve pass: positivity floor, finiteness and blowup checks.
void finish_step(TrajectoryState& state, const SolverConfig& cfg) {
    double sup = 0.0, sum = 0.0;
    std::uint64_t clamps = 0;
    const int n = state.field.size();
    double* w = state.field.values.data();
    for (int i = 0; i < n; ++i) {
        if (w[i] < cfg.positivity_floor) {
            w[i] = cfg.positivity_floor;
            ++clamps;
        }
        const double a = std::fabs(w[i]);
        if (a > sup) sup = a;
        sum += w[i];
    }
    state.clamp_count += clamps;
    state.cell_steps += static_cast<std::uint64_t>(n);
    if (!std::isfinite(sum))
        throw NumericError(state.time, "field is no longer finite");
    if (sup > cfg.blowup_cap)
        throw BlowupError(state.time, "sup-norm exceeded the blowup cap");
}

} // namespace

// Nonlinear step with an externally supplied noise increment.
void step_she_with(TrajectoryState& state, const SolverConfig& cfg, double dt,
                  const double* dW, StepWorkspace& scratch) {
    const Grid& grid = state.field.grid;
    const int n = grid.n_points;
    const ReactionSpec& spec = state.spec;
    const double* w = state.field.values.data();
    double* rhs = scratch.rhs.data();

    switch (spec.kind) {
        case ReactionSpec::Kind::Linear: {
            const double mu = spec.mu, sg = spec.sigma;
            for (int i = 0; i < n; ++i)
                rhs[i] = w[i] + dt * (mu * w[i]) + sg * w[i] * dW[i];
            break;
        }
        case ReactionSpec::Kind::FisherKpp:
        case ReactionSpec::Kind::AllenCahn: {
            const double sg = spec.sigma;
            for (int i = 0; i < n; ++i)
                rhs[i] = w[i] + dt * spec.f(w[i]) + sg * w[i] * dW[i];
            break;
        }
        case ReactionSpec::Kind::Custom:
            for (int i = 0; i < n; ++i)
                rhs[i] = w[i] + dt * spec.f(w[i]) + spec.g(w[i]) * dW[i];
            break;
    }
    if (cfg.theta < 1.0) {
        const double ex = (1.0 - cfg.theta) * dt / (grid.spacing * grid.spacing);
        const double w0 = w[0], wlast = w[n - 1];
        double prev = wlast;
        for (int i = 0; i < n; ++i) {
            const double next = (i + 1 < n) ? w[i + 1] : w0;
            rhs[i] += ex * (prev - 2.0 * w[i] + next);
            prev = w[i];
        }
    }
    scratch.solver.solve(rhs, state.field.values.data());
    state.time += dt;
    finish_step(state, cfg);
}

// Linear step.  In the default mode the drift term matches the nonlinear
// stepper's linear branch expression for expression, so a linear reaction
// evolves bit-identically through either path.
void step_pam_with(TrajectoryState& state, const SolverConfig& cfg, double dt,
                  double mu, double sigma, const double* dW, StepWorkspace& scratch) {
    const Grid& grid = state.field.grid;
    const int n = grid.n_points;
    const double* u = state.field.values.data();
    double* rhs = scratch.rhs.data();
    if (cfg.exact_exponential_drift) {
        for (int i = 0; i < n; ++i)
            rhs[i] = u[i] + sigma * u[i] * dW[i];
    } else {
        for (int i = 0; i < n; ++i)
            rhs[i] = u[i] + dt * (mu * u[i]) + sigma * u[i] * dW[i];
    }
    if (cfg.theta < 1.0) {
        const double ex = (1.0 - cfg.theta) * dt / (grid.spacing * grid.spacing);
        const double u0 = u[0], ulast = u[n - 1];
        double prev = ulast;
        for (int i = 0; i < n; ++i) {
            const double next = (i + 1 < n) ? u[i + 1] : u0;
            rhs[i] += ex * (prev - 2.0 * u[i] + next);
            prev = u[i];
        }
    }
    scratch.solver.solve(rhs, state.field.values.data());
    if (cfg.exact_exponential_drift && mu != 0.0) {
        const double factor = std::exp(mu * dt);
        double* w = state.field.values.data();
        for (int i = 0; i < n; ++i) w[i] *= factor;
    }
    state.time += dt;
    finish_step(state, cfg);
}

namespace {

// Number of whole dt steps to reach t_end, robust to float accumulation.
int whole_steps(double from, double to, double dt) {
    const double span = to - from;
    if (span <= 0.0) return 0;
    return static_cast<int>(std::floor(span / dt + 1e-9));
}

constexpr double kRemainderCut = 1e-12;

} // namespace

void Recorder::note(double time, const Field& f, std::uint64_t clamps, bool force) {
    (void)force;
    StepRecord r;
    r.time = time;
    r.sup = sup_norm(f);
    r.inf = inf_value(f);
    r.mass = quadrature(f);
    r.clamp_count = clamps;
    if (want_mean_log) {
        double acc = 0.0;
        bool ok = true;
        for (double v : f.values) {
            if (!(v > 0.0)) { ok = false; break; }
            acc += std::log(v);
        }
        r.mean_log = ok ? acc / static_cast<double>(f.values.size())
                        : std::numeric_limits<double>::quiet_NaN();
    }
    records.push_back(r);
}

void step_she(TrajectoryState& state, const SolverConfig& cfg) {
    check_explicit_cfl(cfg, state.field.grid, cfg.dt);
    StepWorkspace scratch;
    scratch.prepare(state.field.grid, cfg, cfg.dt);
    fill_increment(state.stream, state.field.grid, cfg.dt, scratch.noise.data());
    ++state.stream.step_counter;
    step_she_with(state, cfg, cfg.dt, scratch.noise.data(), scratch);
}

void step_pam(TrajectoryState& state, const SolverConfig& cfg, double mu, double sigma) {
    check_explicit_cfl(cfg, state.field.grid, cfg.dt);
    StepWorkspace scratch;
    scratch.prepare(state.field.grid, cfg, cfg.dt);
    fill_increment(state.stream, state.field.grid, cfg.dt, scratch.noise.data());
    ++state.stream.step_counter;
    step_pam_with(state, cfg, cfg.dt, mu, sigma, scratch.noise.data(), scratch);
}

namespace {

template <typename StepFn>
void evolve_loop(TrajectoryState& state, const SolverConfig& cfg, double t_end,
                 Recorder* recorder, StepFn&& do_step) {
    if (t_end < state.time - kRemainderCut)
        throw std::domain_error("evolve: t_end must not precede current time");
    check_explicit_cfl(cfg, state.field.grid, cfg.dt);
    StepWorkspace scratch;
    scratch.prepare(state.field.grid, cfg, cfg.dt);
    if (recorder && recorder->records.empty())
        recorder->note(state.time, state.field, state.clamp_count, true);

    const int full = whole_steps(state.time, t_end, cfg.dt);
    for (int k = 0; k < full; ++k) {
        fill_increment(state.stream, state.field.grid, cfg.dt, scratch.noise.data());
        ++state.stream.step_counter;
        do_step(cfg.dt, scratch);
        if (recorder && ((k + 1) % recorder->stride == 0))
            recorder->note(state.time, state.field, state.clamp_count, false);
    }
    const double rem = t_end - state.time;
    if (rem > cfg.dt * kRemainderCut && rem > 0.0) {
        scratch.prepare(state.field.grid, cfg, rem);
        fill_increment(state.stream, state.field.grid, rem, scratch.noise.data());
        ++state.stream.step_counter;
        do_step(rem, scratch);
        scratch.prepare(state.field.grid, cfg, cfg.dt);
    }
    state.time = t_end;
    if (recorder && (recorder->records.empty() ||
                     std::fabs(recorder->records.back().time - state.time) > cfg.dt * 1e-6))
        recorder->note(state.time, state.field, state.clamp_count, true);
}

} // namespace

void evolve(TrajectoryState& state, const SolverConfig& cfg, double t_end, Recorder* recorder) {
    evolve_loop(state, cfg, t_end, recorder, [&](double dt, StepWorkspace& scratch) {
        step_she_with(state, cfg, dt, scratch.noise.data(), scratch);
    });
}

void evolve_pam(TrajectoryState& state, const SolverConfig& cfg, double mu, double sigma,
                double t_end, Recorder* recorder) {
    evolve_loop(state, cfg, t_end, recorder, [&](double dt, StepWorkspace& scratch) {
        step_pam_with(state, cfg, dt, mu, sigma, scratch.noise.data(), scratch);
    });
}

std::optional<double> first_exceedance_time(const std::vector<StepRecord>& records,
                                            double gamma, double T) {
    for (const StepRecord& r : records) {
        if (r.time < T) continue;
        if (r.sup > std::exp(-gamma * r.time)) return r.time;
    }
    return std::nullopt;
}

} // namespace pamlab
