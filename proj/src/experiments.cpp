#include "pamlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "pamlab/coupling.hpp"
#include "pamlab/errors.hpp"
#include "pamlab/stats.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pamlab {

// ---------------------------------------------------------------------------
// Config handling
// ---------------------------------------------------------------------------

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

} // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::domain_error("config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str());
}

ExperimentConfig ExperimentConfig::from_string(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::domain_error("config: line " + std::to_string(lineno) +
                                    " is not key = value");
        cfg.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
    values_[key] = value;
}

bool ExperimentConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string ExperimentConfig::get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    const std::string v = it != values_.end() ? it->second : fallback;
    resolved_[key] = v;
    return v;
}

std::string ExperimentConfig::require_string(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw std::domain_error("config: missing required key '" + key + "'");
    resolved_[key] = it->second;
    return it->second;
}

namespace {

// Unlike std::stod this accepts subnormal values (positivity floors sit there).
double parse_double(const std::string& s, const std::string& key) {
    const char* begin = s.c_str();
    char* end = nullptr;
    const double v = std::strtod(begin, &end);
    if (end == begin || *end != '\0')
        throw std::domain_error("config: key '" + key + "' is not a number");
    return v;
}

} // namespace

double ExperimentConfig::get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.17g", fallback);
        resolved_[key] = buf;
        return fallback;
    }
    const double v = parse_double(it->second, key);
    resolved_[key] = it->second;
    return v;
}

double ExperimentConfig::require_double(const std::string& key) const {
    if (!has(key)) throw std::domain_error("config: missing required key '" + key + "'");
    return get_double(key, 0.0);
}

int ExperimentConfig::get_int(const std::string& key, int fallback) const {
    return static_cast<int>(get_double(key, fallback));
}

std::uint64_t ExperimentConfig::get_seed(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        resolved_[key] = std::to_string(fallback);
        return fallback;
    }
    const std::string& s = it->second;
    resolved_[key] = s;
    try {
        return std::stoull(s, nullptr, 0); // accepts decimal and 0x-prefixed hex
    } catch (const std::exception&) {
        throw std::domain_error("config: key '" + key + "' is not a 64-bit seed");
    }
}

bool ExperimentConfig::get_bool(const std::string& key, bool fallback) const {
    const std::string v = get_string(key, fallback ? "true" : "false");
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw std::domain_error("config: key '" + key + "' is not boolean");
}

std::vector<double> ExperimentConfig::get_double_list(const std::string& key,
                                                      const std::vector<double>& fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) {
        std::string repr;
        for (std::size_t i = 0; i < fallback.size(); ++i) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", fallback[i]);
            repr += (i ? "," : "");
            repr += buf;
        }
        resolved_[key] = repr;
        return fallback;
    }
    resolved_[key] = it->second;
    std::vector<double> out;
    std::stringstream ss(it->second);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) continue;
        out.push_back(parse_double(item, key));
    }
    return out;
}

std::string ExperimentConfig::resolved_text() const {
    std::string out;
    for (const auto& [k, v] : resolved_) {
        out += k;
        out += " = ";
        out += v;
        out += "\n";
    }
    return out;
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

namespace {

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

void write_json_file(const fs::path& path, const json& j) {
    write_text(path, j.dump(2) + "\n");
}

struct Csv {
    std::string text;
    explicit Csv(const std::string& header) { text = header + "\n"; }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) text += ",";
            text += cells[i];
        }
        text += "\n";
    }
    void save(const fs::path& path) const { write_text(path, text); }
};

void parallel_for(int workers, int n_jobs, const std::function<void(int)>& job) {
    if (workers <= 0) workers = static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min(workers, n_jobs));
    if (workers == 1) {
        for (int i = 0; i < n_jobs; ++i) job(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n_jobs));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (;;) {
                const int i = next.fetch_add(1);
                if (i >= n_jobs) return;
                try {
                    job(i);
                } catch (...) {
                    errors[static_cast<std::size_t>(i)] = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    // Deterministic error selection: lowest failing trajectory wins.
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Shared experiment plumbing
// ---------------------------------------------------------------------------

struct CommonParams {
    ReactionSpec spec;
    Grid grid;
    SolverConfig solver;
    Field init;
    int ensemble = 1;
    std::uint64_t master_seed = 0;
    int record_stride = 100;
    double t_end = 1.0;
    bool write_trajectories = false;
};

ReactionSpec spec_from_config(const ExperimentConfig& cfg) {
    const std::string preset = cfg.get_string("preset", "linear");
    if (preset == "linear")
        return make_linear(cfg.get_double("mu", 0.0), cfg.get_double("sigma", 1.0));
    if (preset == "fisher_kpp")
        return make_fisher_kpp(cfg.get_double("a", 0.001), cfg.get_double("b", 1.0),
                               cfg.get_double("sigma", 1.0), cfg.get_double("z_cap", 10.0));
    if (preset == "allen_cahn")
        return make_allen_cahn(cfg.get_double("a", 0.001), cfg.get_double("b", 1.0),
                               cfg.get_double("sigma", 1.0), cfg.get_double("z_cap", 10.0));
    throw std::domain_error("config: unknown preset '" + preset + "'");
}

Field initial_field(const ExperimentConfig& cfg, const Grid& grid) {
    const std::string kind = cfg.get_string("init", "constant");
    if (kind == "constant") {
        return Field(grid, cfg.get_double("init_value", 1.0));
    }
    if (kind == "cosine") {
        const double base = cfg.get_double("init_base", 1.5);
        const double amp = cfg.get_double("init_amp", 0.5);
        Field f(grid);
        for (int i = 0; i < grid.n_points; ++i)
            f[i] = base + amp * std::cos(M_PI * grid.point(i));
        return f;
    }
    throw std::domain_error("config: unknown init '" + kind + "'");
}

CommonParams common_params(const ExperimentConfig& cfg, const RunOptions& opt) {
    CommonParams p;
    p.spec = spec_from_config(cfg);
    p.grid = Grid(cfg.get_int("grid_n", 128));
    p.solver.dt = cfg.get_double("dt", 2.5e-4);
    p.solver.theta = cfg.get_double("theta", 1.0);
    p.solver.positivity_floor = cfg.get_double("positivity_floor", 0.0);
    p.solver.blowup_cap = cfg.get_double("blowup_cap", 1e12);
    p.init = initial_field(cfg, p.grid);
    p.ensemble = cfg.get_int("ensemble", 100);
    p.master_seed = opt.seed.value_or(cfg.get_seed("master_seed", 42));
    p.record_stride = cfg.get_int("record_stride", 100);
    p.t_end = cfg.get_double("t_end", 1.0);
    p.write_trajectories = cfg.get_bool("write_trajectories", false);
    if (p.ensemble < 1) throw std::domain_error("config: ensemble must be >= 1");
    if (!(p.solver.dt > 0.0)) throw std::domain_error("config: dt must be positive");
    if (p.solver.theta < 0.0 || p.solver.theta > 1.0)
        throw std::domain_error("config: theta must lie in [0, 1]");
    if (p.solver.theta == 0.0 && p.solver.dt > p.grid.spacing * p.grid.spacing / 2.0)
        throw std::domain_error("config: explicit scheme violates dt <= spacing^2 / 2");
    return p;
}

void write_trajectory_csv(const fs::path& dir, const TrajectoryResult& tr) {
    char name[40];
    std::snprintf(name, sizeof name, "trajectory_%06u.csv", tr.trajectory_id);
    Csv csv("time,sup,inf,mass,clamp_count");
    for (const StepRecord& r : tr.records)
        csv.row({fmt_g(r.time), fmt_g(r.sup), fmt_g(r.inf), fmt_g(r.mass),
                 std::to_string(r.clamp_count)});
    csv.save(dir / name);
}

/// Run an ensemble of single-field trajectories: evolve through the sorted
/// snapshot times up to t_end, recording along the way.
EnsembleResult run_ensemble(const CommonParams& p, const std::vector<double>& snapshot_times,
                            bool want_mean_log, bool linear_drift_exact, int workers) {
    std::vector<double> snaps = snapshot_times;
    std::sort(snaps.begin(), snaps.end());
    EnsembleResult ens;
    ens.trajectories.resize(static_cast<std::size_t>(p.ensemble));
    parallel_for(workers, p.ensemble, [&](int i) {
        TrajectoryState state;
        state.field = p.init;
        state.spec = p.spec;
        state.stream = NoiseStream{p.master_seed, 0, static_cast<std::uint32_t>(i), 0};
        Recorder rec;
        rec.stride = std::max(1, p.record_stride);
        rec.want_mean_log = want_mean_log;
        TrajectoryResult out;
        out.trajectory_id = static_cast<std::uint32_t>(i);
        auto advance = [&](double target) {
            if (linear_drift_exact)
                evolve_pam(state, p.solver, p.spec.mu, p.spec.sigma, target, &rec);
            else
                evolve(state, p.solver, target, &rec);
        };
        for (double st : snaps) {
            if (st > p.t_end + 1e-12) break;
            advance(st);
            out.snapshots.emplace_back(st, state.field);
        }
        advance(p.t_end);
        out.records = std::move(rec.records);
        out.clamp_count = state.clamp_count;
        out.cell_steps = state.cell_steps;
        ens.trajectories[static_cast<std::size_t>(i)] = std::move(out);
    });
    return ens;
}

json clamp_summary(const EnsembleResult& ens) {
    std::uint64_t clamps = 0, cells = 0;
    for (const auto& tr : ens.trajectories) {
        clamps += tr.clamp_count;
        cells += tr.cell_steps;
    }
    return json{{"clamp_events", clamps},
                {"cell_steps", cells},
                {"clamp_fraction", cells ? static_cast<double>(clamps) / static_cast<double>(cells) : 0.0}};
}

// ---------------------------------------------------------------------------
// Experiment kinds
// ---------------------------------------------------------------------------

json run_simulate(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    CommonParams p = common_params(cfg, opt);
    const bool mean_log = cfg.get_bool("record_mean_log", false);
    EnsembleResult ens = run_ensemble(p, {}, mean_log, false, opt.workers);

    Csv csv("trajectory,final_sup,final_inf,final_mass,clamp_count");
    std::vector<double> sups;
    for (const auto& tr : ens.trajectories) {
        const StepRecord& last = tr.records.back();
        csv.row({std::to_string(tr.trajectory_id), fmt_g(last.sup), fmt_g(last.inf),
                 fmt_g(last.mass), std::to_string(tr.clamp_count)});
        sups.push_back(last.sup);
        if (p.write_trajectories) write_trajectory_csv(dir, tr);
    }
    csv.save(dir / "final_states.csv");

    json rep{{"final_sup_mean", sample_mean(sups)},
             {"final_sup_min", *std::min_element(sups.begin(), sups.end())},
             {"final_sup_max", *std::max_element(sups.begin(), sups.end())},
             {"clamps", clamp_summary(ens)}};
    if (cfg.has("gamma")) {
        const double gamma = cfg.require_double("gamma");
        const double T = cfg.get_double("T", 0.0);
        const FrequencyEstimate fe = dissipation_probability(ens, gamma, T, p.t_end);
        rep["dissipation"] = {{"gamma", gamma}, {"T", T},
                              {"frequency", fe.frequency},
                              {"wilson_low", fe.wilson_low},
                              {"wilson_high", fe.wilson_high}};
    }
    return rep;
}

json run_pam_mean(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    CommonParams p = common_params(cfg, opt);
    p.solver.exact_exponential_drift =
        cfg.get_string("drift_mode", "exponential") == "exponential";
    EnsembleResult ens = run_ensemble(p, {p.t_end}, false, true, opt.workers);

    // Oracle: E u(t) = e^{mu t} (p_t * u0).
    Field target = convolve(p.t_end, p.init);
    const double factor = std::exp(p.spec.mu * p.t_end);
    for (double& v : target.values) v *= factor;

    const int n = p.grid.n_points;
    std::vector<double> cell(static_cast<std::size_t>(p.ensemble));
    Csv csv("x,mean_u,target,se,z");
    double max_abs_z = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < p.ensemble; ++k)
            cell[static_cast<std::size_t>(k)] =
                ens.trajectories[static_cast<std::size_t>(k)].snapshots[0].second[i];
        const double m = sample_mean(cell);
        const double se = std::sqrt(sample_variance(cell) / p.ensemble);
        const double z = se > 0.0 ? (m - target[i]) / se : 0.0;
        max_abs_z = std::max(max_abs_z, std::fabs(z));
        csv.row({fmt_g(p.grid.point(i)), fmt_g(m), fmt_g(target[i]), fmt_g(se), fmt_g(z)});
    }
    csv.save(dir / "profile.csv");

    // Mass series (exact martingale when mu = 0).
    std::vector<double> mass0, mass1;
    for (const auto& tr : ens.trajectories) {
        mass0.push_back(tr.records.front().mass);
        mass1.push_back(tr.records.back().mass);
    }
    const double dm = sample_mean(mass1) - sample_mean(mass0);
    std::vector<double> dmass(static_cast<std::size_t>(p.ensemble));
    for (int k = 0; k < p.ensemble; ++k)
        dmass[static_cast<std::size_t>(k)] = mass1[static_cast<std::size_t>(k)] - mass0[static_cast<std::size_t>(k)];
    const double dm_se = std::sqrt(sample_variance(dmass) / p.ensemble);

    return json{{"t_end", p.t_end},
                {"max_abs_z", max_abs_z},
                {"mass_change_mean", dm},
                {"mass_change_se", dm_se},
                {"clamps", clamp_summary(ens)}};
}

json run_couple_pair(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    CommonParams p = common_params(cfg, opt);
    PairConfig pair;
    pair.alpha = cfg.get_double("alpha", 1.0);
    pair.mu = p.spec.mu;
    pair.sigma = p.spec.sigma;
    pair.meet_tol = cfg.get_double("meet_tol", 1e-8);
    const double gap = cfg.get_double("gap", 0.05);
    // The discrete pair cannot keep cellwise order below the scheme noise
    // floor sigma^2 alpha dt / spacing; the default tolerance sits well above
    // that floor while still catching genuine ordering bugs of size O(gap).
    const double floor_scale =
        pair.sigma * pair.sigma * pair.alpha * p.solver.dt / p.grid.spacing;
    const double ordering_tol =
        cfg.get_double("ordering_tol", std::max(1e-9, 50.0 * floor_scale) * (sup_norm(p.init) + gap));

    struct PairOut {
        PairResult result;
    };
    std::vector<PairOut> outs(static_cast<std::size_t>(p.ensemble));
    parallel_for(opt.workers, p.ensemble, [&](int i) {
        TrajectoryState u, v;
        u.field = p.init;
        v.field = p.init;
        for (double& x : v.field.values) x += gap;
        u.spec = make_linear(pair.mu, pair.sigma);
        v.spec = u.spec;
        u.stream = NoiseStream{p.master_seed, 0, static_cast<std::uint32_t>(i), 0};
        v.stream = NoiseStream{p.master_seed, 1, static_cast<std::uint32_t>(i), 0};
        outs[static_cast<std::size_t>(i)].result = evolve_coupled_pam_pair(
            u, v, pair, p.solver, p.t_end, std::max(1, p.record_stride));
    });

    int met = 0, degenerate = 0;
    double worst_crossing = 0.0; // most negative min (v - u) seen in any record
    std::vector<double> closest;  // per trajectory: min_t sup|u-v| / sup|v|
    Csv meetings("trajectory,meeting_time,closest_approach");
    for (int i = 0; i < p.ensemble; ++i) {
        const PairResult& r = outs[static_cast<std::size_t>(i)].result;
        if (r.meeting_time) ++met;
        if (r.degeneracy_warning) ++degenerate;
        double ca = std::numeric_limits<double>::infinity();
        for (const PairRecord& rec : r.records) {
            worst_crossing = std::min(worst_crossing, rec.min_diff);
            if (rec.sup_v > 0.0) ca = std::min(ca, rec.sup_diff / rec.sup_v);
        }
        closest.push_back(ca);
        meetings.row({std::to_string(i), r.meeting_time ? fmt_g(*r.meeting_time) : "-1", fmt_g(ca)});
    }
    meetings.save(dir / "meetings.csv");
    std::vector<double> ca_sorted = closest;
    std::sort(ca_sorted.begin(), ca_sorted.end());

    // X(t) statistics on the common record grid; building the series also
    // runs the ordering check per trajectory.
    std::vector<std::vector<std::pair<double, double>>> series(static_cast<std::size_t>(p.ensemble));
    for (int i = 0; i < p.ensemble; ++i)
        series[static_cast<std::size_t>(i)] =
            l1_difference_series(outs[static_cast<std::size_t>(i)].result, ordering_tol);

    const double x0 = kTorusLength * gap; // X(0) for the flat initial gap
    const std::size_t n_rec = series[0].size();
    Csv xcsv("time,mean_x,se_x");
    json x_checks = json::array();
    std::vector<double> xs(static_cast<std::size_t>(p.ensemble));
    const std::vector<double> t_checks = cfg.get_double_list("t_checks", {});
    for (std::size_t rix = 0; rix < n_rec; ++rix) {
        for (int i = 0; i < p.ensemble; ++i)
            xs[static_cast<std::size_t>(i)] = series[static_cast<std::size_t>(i)][rix].second;
        const double t = series[0][rix].first;
        const double m = sample_mean(xs);
        const double se = std::sqrt(sample_variance(xs) / p.ensemble);
        xcsv.row({fmt_g(t), fmt_g(m), fmt_g(se)});
        for (double tc : t_checks)
            if (std::fabs(t - tc) <= 1e-9)
                x_checks.push_back({{"t", t},
                                    {"mean_x", m},
                                    {"se", se},
                                    {"x0", x0},
                                    {"z", se > 0.0 ? (m - x0) / se : 0.0}});
    }
    xcsv.save(dir / "xseries.csv");

    const FrequencyEstimate fe = wilson_interval(met, p.ensemble);
    return json{{"gap", gap},
                {"alpha", pair.alpha},
                {"meet_tol", pair.meet_tol},
                {"ordering_tol", ordering_tol},
                {"meeting_frequency", fe.frequency},
                {"failure_frequency", 1.0 - fe.frequency},
                {"wilson_low", fe.wilson_low},
                {"wilson_high", fe.wilson_high},
                {"degeneracy_warnings", degenerate},
                {"worst_crossing", worst_crossing},
                {"closest_approach_min", ca_sorted.front()},
                {"closest_approach_median", ca_sorted[ca_sorted.size() / 2]},
                {"closest_approach_max", ca_sorted.back()},
                {"x_checks", x_checks}};
}

json run_staged(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    CommonParams p = common_params(cfg, opt);
    const double epsilon = cfg.get_double("epsilon", std::exp(-std::exp(M_E)));
    const double L_star = cfg.get_double("L_star", 2.0);
    const double eta = cfg.get_double("eta", 0.1);
    const int n_max = cfg.get_int("n_max", 30);
    const double meet_tol = cfg.get_double("meet_tol", 1e-8);
    const CouplingSchedule sched = build_schedule(epsilon, L_star, eta, n_max);

    std::vector<StagedResult> results(static_cast<std::size_t>(p.ensemble));
    parallel_for(opt.workers, p.ensemble, [&](int i) {
        results[static_cast<std::size_t>(i)] =
            run_staged_coupling(p.spec, p.init, sched, p.solver, p.master_seed,
                                static_cast<std::uint32_t>(i), std::max(1, p.record_stride),
                                meet_tol);
    });

    Csv csv("run,n,T_n,eps_n,alpha_n,meeting_time,A_n,B_n,jump_gap,log_ratio_sup");
    for (int i = 0; i < p.ensemble; ++i) {
        for (const StageRow& row : results[static_cast<std::size_t>(i)].rows) {
            csv.row({std::to_string(i), std::to_string(row.n), fmt_g(row.T_n),
                     fmt_g(row.eps_n), fmt_g(row.alpha_n),
                     row.meeting_time ? fmt_g(*row.meeting_time) : "-1",
                     row.A_n ? "1" : "0", row.B_n ? "1" : "0", fmt_g(row.jump_gap),
                     fmt_g(row.log_ratio_sup)});
        }
    }
    csv.save(dir / "stages.csv");

    // Median decay series over the ensemble, stage by stage (n >= 1).
    std::vector<double> med_times, med_values;
    Csv med("n,T_n,median_log_ratio,A_frequency,B_frequency");
    for (int nstage = 1; nstage <= n_max; ++nstage) {
        std::vector<double> vals;
        int a_count = 0, b_count = 0;
        for (const auto& r : results) {
            const StageRow& row = r.rows[static_cast<std::size_t>(nstage)];
            vals.push_back(row.log_ratio_sup);
            a_count += row.A_n ? 1 : 0;
            b_count += row.B_n ? 1 : 0;
        }
        std::sort(vals.begin(), vals.end());
        const double median = vals[vals.size() / 2];
        med_times.push_back(sched.T[static_cast<std::size_t>(nstage)]);
        med_values.push_back(median);
        med.row({std::to_string(nstage), fmt_g(sched.T[static_cast<std::size_t>(nstage)]),
                 fmt_g(median), fmt_g(static_cast<double>(a_count) / p.ensemble),
                 fmt_g(static_cast<double>(b_count) / p.ensemble)});
    }
    med.save(dir / "median_decay.csv");

    // Trailing-window monotonicity and power-law fit of the median series.
    const int window = std::min(20, n_max);
    bool nonincreasing = true;
    for (std::size_t i = med_values.size() - static_cast<std::size_t>(window) + 1;
         i < med_values.size(); ++i)
        if (med_values[i] > med_values[i - 1]) nonincreasing = false;
    bool all_zero = true;
    for (std::size_t i = med_values.size() - static_cast<std::size_t>(window);
         i < med_values.size(); ++i)
        if (med_values[i] > 1e-250) all_zero = false;

    std::vector<double> fit_t(med_times.end() - window, med_times.end());
    std::vector<double> fit_v(med_values.end() - window, med_values.end());
    const DecayFit fit = decay_exponent_fit(fit_t, fit_v);

    int a0_count = 0;
    for (const auto& r : results) a0_count += r.A0 ? 1 : 0;

    json jfit{{"points_used", fit.points_used},
              {"excluded_nonpositive", fit.excluded_nonpositive}};
    if (fit.beta_hat) {
        jfit["beta_hat"] = *fit.beta_hat;
        jfit["half_width"] = fit.half_width;
    }
    return json{{"epsilon", epsilon},
                {"delta", sched.delta},
                {"T_0", sched.T[0]},
                {"T_max", sched.T[static_cast<std::size_t>(n_max)]},
                {"median_nonincreasing_last20", nonincreasing},
                {"median_all_zero_last20", all_zero},
                {"decay_fit", jfit},
                {"A0_frequency", static_cast<double>(a0_count) / p.ensemble},
                {"gamma", results[0].gamma}};
}

json run_lyapunov(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    CommonParams p = common_params(cfg, opt);
    const double window_start = cfg.get_double("window_start", p.t_end / 2.0);
    const bool linear_exact = p.spec.is_linear();
    if (linear_exact)
        p.solver.exact_exponential_drift =
            cfg.get_string("drift_mode", "exponential") == "exponential";
    EnsembleResult ens = run_ensemble(p, {}, true, linear_exact, opt.workers);
    const LyapunovEstimate est = lyapunov_estimate(ens, window_start, p.t_end);

    Csv csv("trajectory,lambda");
    for (const auto& tr : ens.trajectories)
        csv.row({std::to_string(tr.trajectory_id),
                 fmt_g(tr.records.back().mean_log / tr.records.back().time)});
    csv.save(dir / "lambda.csv");

    const double target = p.spec.mu - 2.0 * gamma2(p.spec.sigma);
    return json{{"lambda_hat", est.lambda_hat},
                {"stderr", est.stderr_hat},
                {"regression_slope", est.regression_slope},
                {"target_continuum", target},
                {"gamma2", gamma2(p.spec.sigma)},
                {"n_trajectories", est.n_trajectories},
                {"clamps", clamp_summary(ens)}};
}

json run_clt(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    CommonParams p = common_params(cfg, opt);
    const std::vector<double> t_list = cfg.get_double_list("t_list", {25.0, 50.0, 100.0});
    EnsembleResult ens = run_ensemble(p, t_list, false, p.spec.is_linear(), opt.workers);

    Csv csv("t,flatness,flatness_se,skewness,excess_kurtosis");
    json rows = json::array();
    for (double t : t_list) {
        const CltReport rep = clt_diagnostics(ens, t, p.spec.mu, p.spec.sigma);
        csv.row({fmt_g(t), fmt_g(rep.spatial_flatness), fmt_g(rep.flatness_stderr),
                 fmt_g(rep.skewness), fmt_g(rep.excess_kurtosis)});
        rows.push_back({{"t", t},
                        {"flatness", rep.spatial_flatness},
                        {"flatness_se", rep.flatness_stderr},
                        {"skewness", rep.skewness},
                        {"excess_kurtosis", rep.excess_kurtosis},
                        {"degenerate", rep.degenerate}});
    }
    csv.save(dir / "clt.csv");
    return json{{"rows", rows}, {"clamps", clamp_summary(ens)}};
}

json run_dissipation(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    CommonParams p = common_params(cfg, opt);
    const double gamma = cfg.has("gamma") ? cfg.require_double("gamma")
                                          : dissipation_rate(p.spec);
    const std::vector<double> T_list = cfg.get_double_list("T_list", {10.0, 20.0, 30.0});
    EnsembleResult ens = run_ensemble(p, {}, false, false, opt.workers);

    Csv csv("T,frequency,wilson_low,wilson_high,successes,total");
    json rows = json::array();
    for (double T : T_list) {
        const FrequencyEstimate fe = dissipation_probability(ens, gamma, T, p.t_end);
        csv.row({fmt_g(T), fmt_g(fe.frequency), fmt_g(fe.wilson_low), fmt_g(fe.wilson_high),
                 std::to_string(fe.successes), std::to_string(fe.total)});
        rows.push_back({{"T", T},
                        {"frequency", fe.frequency},
                        {"wilson_low", fe.wilson_low},
                        {"wilson_high", fe.wilson_high}});
    }
    csv.save(dir / "dissipation.csv");
    return json{{"gamma", gamma}, {"rows", rows}, {"clamps", clamp_summary(ens)}};
}

json run_oscillation(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    CommonParams p = common_params(cfg, opt);
    const std::vector<double> t_list = cfg.get_double_list("t_list", {1.0, 5.0, 20.0});
    const std::vector<double> k_list = cfg.get_double_list("k_list", {2.0});
    EnsembleResult ens = run_ensemble(p, t_list, false, p.spec.is_linear(), opt.workers);

    Csv csv("k,t,moment,se");
    json rows = json::array();
    for (double k : k_list) {
        const OscillationMoments om = oscillation_moments(ens, t_list, k);
        for (std::size_t i = 0; i < om.times.size(); ++i) {
            csv.row({fmt_g(k), fmt_g(om.times[i]), fmt_g(om.moment[i]), fmt_g(om.stderr_m[i])});
            rows.push_back({{"k", k},
                            {"t", om.times[i]},
                            {"moment", om.moment[i]},
                            {"se", om.stderr_m[i]}});
        }
    }
    csv.save(dir / "oscillation.csv");
    return json{{"rows", rows}, {"clamps", clamp_summary(ens)}};
}

json run_schedule(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    static_cast<void>(opt);
    const double epsilon = cfg.get_double("epsilon", std::exp(-std::exp(M_E)));
    const double L_star = cfg.get_double("L_star", 2.0);
    const double eta = cfg.get_double("eta", 0.1);
    const int n_max = cfg.get_int("n_max", 10000);
    const CouplingSchedule s = build_schedule(epsilon, L_star, eta, n_max);

    Csv csv("n,T_n,eps_n,alpha_n,eta_n,growth_ratio");
    double ratio_min = 0.0, ratio_max = 0.0;
    bool first = true;
    for (int n = 0; n <= n_max; ++n) {
        const double ratio = n >= 1 ? schedule_growth_ratio(s, n) : 0.0;
        if (n >= 10) {
            if (first) { ratio_min = ratio_max = ratio; first = false; }
            ratio_min = std::min(ratio_min, ratio);
            ratio_max = std::max(ratio_max, ratio);
        }
        csv.row({std::to_string(n), fmt_g(s.T[static_cast<std::size_t>(n)]),
                 fmt_g(s.eps_n[static_cast<std::size_t>(n)]),
                 fmt_g(s.alpha_n[static_cast<std::size_t>(n)]),
                 fmt_g(s.eta_n[static_cast<std::size_t>(n)]),
                 fmt_g(ratio)});
    }
    csv.save(dir / "schedule.csv");

    return json{{"epsilon", epsilon},
                {"delta", s.delta},
                {"T_0", s.T[0]},
                {"T_1_minus_T_0", s.T[1] - s.T[0]},
                {"growth_ratio_min", ratio_min},
                {"growth_ratio_max", ratio_max},
                {"n_max", n_max}};
}

json run_tailsum(const ExperimentConfig& cfg, const RunOptions& opt, const fs::path& dir) {
    static_cast<void>(opt);
    const std::vector<double> deltas = cfg.get_double_list("delta_list", {0.05, 0.1, 0.2, 0.4});
    const auto rows = tail_sum_check(deltas);
    Csv csv("delta,sum,ratio,terms");
    json jrows = json::array();
    double ratio_max = 0.0;
    for (const TailSumRow& r : rows) {
        csv.row({fmt_g(r.delta), fmt_g(r.sum), fmt_g(r.ratio), std::to_string(r.terms)});
        jrows.push_back({{"delta", r.delta}, {"sum", r.sum}, {"ratio", r.ratio}, {"terms", r.terms}});
        ratio_max = std::max(ratio_max, r.ratio);
    }
    csv.save(dir / "tailsum.csv");
    return json{{"rows", jrows}, {"ratio_max", ratio_max}};
}

RunStatus status_for_exception(const std::exception& e) {
    if (dynamic_cast<const BlowupError*>(&e) || dynamic_cast<const NumericError*>(&e))
        return RunStatus::NumericBlowup;
    if (dynamic_cast<const PositivityError*>(&e) || dynamic_cast<const OrderingError*>(&e) ||
        dynamic_cast<const DegeneracyError*>(&e) || dynamic_cast<const OscillationError*>(&e))
        return RunStatus::Degeneracy;
    return RunStatus::ValidationError;
}

} // namespace

RunStatus run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    const fs::path dir(options.out_dir);
    fs::create_directories(dir);
    json report{{"schema_version", 1}};
    try {
        const std::string kind = cfg.require_string("kind");
        report["kind"] = kind;
        json result;
        if (kind == "simulate") result = run_simulate(cfg, options, dir);
        else if (kind == "pam") result = run_pam_mean(cfg, options, dir);
        else if (kind == "couple-pair") result = run_couple_pair(cfg, options, dir);
        else if (kind == "staged-coupling") result = run_staged(cfg, options, dir);
        else if (kind == "lyapunov") result = run_lyapunov(cfg, options, dir);
        else if (kind == "clt") result = run_clt(cfg, options, dir);
        else if (kind == "dissipation") result = run_dissipation(cfg, options, dir);
        else if (kind == "oscillation") result = run_oscillation(cfg, options, dir);
        else if (kind == "schedule") result = run_schedule(cfg, options, dir);
        else if (kind == "tailsum") result = run_tailsum(cfg, options, dir);
        else throw std::domain_error("config: unknown kind '" + kind + "'");
        report["result"] = result;
        report["status"] = 0;
        write_text(dir / "resolved_config.txt", cfg.resolved_text());
        write_json_file(dir / "report.json", report);
        return RunStatus::Ok;
    } catch (const std::exception& e) {
        const RunStatus status = status_for_exception(e);
        report["status"] = static_cast<int>(status);
        report["error"] = e.what();
        write_text(dir / "resolved_config.txt", cfg.resolved_text());
        write_json_file(dir / "report.json", report);
        return status;
    }
}

RunStatus validate_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
    const fs::path dir(options.out_dir);
    fs::create_directories(dir);
    json checks = json::array();
    auto add = [&](const std::string& name, bool pass, const json& detail) {
        checks.push_back({{"name", name}, {"pass", pass}, {"detail", detail}});
    };
    try {
        const std::string kind = cfg.get_string("kind", "simulate");
        const ReactionSpec spec = spec_from_config(cfg);
        add("preset", true, spec.name);

        const HighNoiseReport hn = check_high_noise(spec);
        add("high_noise_condition", hn.holds,
            json{{"sup_f_ratio", hn.sup_f_ratio},
                 {"threshold", hn.threshold},
                 {"margin", hn.margin}});

        const Grid grid(cfg.get_int("grid_n", 128));
        const double dt = cfg.get_double("dt", 2.5e-4);
        const double theta = cfg.get_double("theta", 1.0);
        if (theta == 0.0) {
            const double limit = grid.spacing * grid.spacing / 2.0;
            add("explicit_cfl", dt <= limit, json{{"dt", dt}, {"limit", limit}});
        } else {
            add("explicit_cfl", true, "implicit scheme, unconditionally stable");
        }

        const bool coupling_kind =
            kind == "couple-pair" || kind == "staged-coupling" || kind == "dissipation";
        if (coupling_kind)
            add("noise_nondegenerate", spec.L_g > 0.0, json{{"L_g", spec.L_g}});

        if (kind == "staged-coupling" || kind == "schedule") {
            const double eps_max = std::exp(-std::exp(M_E));
            const double epsilon = cfg.get_double("epsilon", eps_max);
            const bool in_range = epsilon > 0.0 && epsilon <= eps_max;
            add("epsilon_range", in_range,
                json{{"epsilon", epsilon}, {"upper_limit", eps_max}});
            if (in_range) {
                const CouplingSchedule s =
                    build_schedule(epsilon, cfg.get_double("L_star", 2.0),
                                   cfg.get_double("eta", 0.1),
                                   std::min(cfg.get_int("n_max", 30), 1000));
                bool monotone = true;
                for (std::size_t i = 1; i < s.T.size(); ++i)
                    if (s.T[i] <= s.T[i - 1]) monotone = false;
                add("schedule_monotone", monotone,
                    json{{"delta", s.delta}, {"T_0", s.T[0]}});
            }
        }
        bool all_pass = true;
        for (const auto& c : checks)
            if (!c["pass"].get<bool>()) all_pass = false;
        json report{{"schema_version", 1},
                    {"kind", kind},
                    {"mode", "validate"},
                    {"all_pass", all_pass},
                    {"checks", checks}};
        write_json_file(dir / "validate.json", report);
        return RunStatus::Ok;
    } catch (const std::exception& e) {
        json report{{"schema_version", 1},
                    {"mode", "validate"},
                    {"error", e.what()},
                    {"checks", checks}};
        write_json_file(dir / "validate.json", report);
        return RunStatus::ValidationError;
    }
}

RunStatus report_from_directory(const std::string& dir, const std::string& out_path,
                                std::optional<double> gamma, std::optional<double> T,
                                std::optional<double> horizon) {
    try {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(dir)) {
            const std::string name = entry.path().filename().string();
            if (name.rfind("trajectory_", 0) == 0 && entry.path().extension() == ".csv")
                files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        if (files.empty())
            throw std::domain_error("report: no trajectory_*.csv files in " + dir);

        EnsembleResult ens;
        for (const fs::path& f : files) {
            std::ifstream in(f);
            std::string line;
            std::getline(in, line); // header
            TrajectoryResult tr;
            while (std::getline(in, line)) {
                StepRecord r;
                std::uint64_t clamps = 0;
                std::stringstream ss(line);
                std::string cell;
                std::getline(ss, cell, ','); r.time = std::stod(cell);
                std::getline(ss, cell, ','); r.sup = std::stod(cell);
                std::getline(ss, cell, ','); r.inf = std::stod(cell);
                std::getline(ss, cell, ','); r.mass = std::stod(cell);
                std::getline(ss, cell, ','); clamps = std::stoull(cell);
                r.clamp_count = clamps;
                tr.records.push_back(r);
            }
            if (!tr.records.empty()) ens.trajectories.push_back(std::move(tr));
        }

        std::vector<double> final_sup;
        for (const auto& tr : ens.trajectories) final_sup.push_back(tr.records.back().sup);
        json report{{"schema_version", 1},
                    {"mode", "report"},
                    {"trajectories", ens.trajectories.size()},
                    {"final_sup_mean", sample_mean(final_sup)},
                    {"final_sup_min", *std::min_element(final_sup.begin(), final_sup.end())},
                    {"final_sup_max", *std::max_element(final_sup.begin(), final_sup.end())}};
        if (gamma && T && horizon) {
            const FrequencyEstimate fe = dissipation_probability(ens, *gamma, *T, *horizon);
            report["dissipation"] = {{"gamma", *gamma},
                                     {"T", *T},
                                     {"horizon", *horizon},
                                     {"frequency", fe.frequency},
                                     {"wilson_low", fe.wilson_low},
                                     {"wilson_high", fe.wilson_high}};
        }
        write_json_file(out_path, report);
        return RunStatus::Ok;
    } catch (const std::exception& e) {
        json report{{"schema_version", 1}, {"mode", "report"}, {"error", e.what()}};
        write_json_file(out_path, report);
        return RunStatus::ValidationError;
    }
}

} // namespace pamlab
