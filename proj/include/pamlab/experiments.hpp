#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace pamlab {

/// Flat key = value experiment configuration.  '#' starts a comment; lists
/// are comma-separated.  Every key consulted during a run is recorded with
/// its resolved value, so the echoed config reproduces the run exactly.
class ExperimentConfig {
  public:
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig from_string(const std::string& text);

    void set(const std::string& key, const std::string& value);
    bool has(const std::string& key) const;

    std::string get_string(const std::string& key, const std::string& fallback) const;
    std::string require_string(const std::string& key) const;
    double get_double(const std::string& key, double fallback) const;
    double require_double(const std::string& key) const;
    int get_int(const std::string& key, int fallback) const;
    std::uint64_t get_seed(const std::string& key, std::uint64_t fallback) const;
    bool get_bool(const std::string& key, bool fallback) const;
    std::vector<double> get_double_list(const std::string& key,
                                        const std::vector<double>& fallback) const;

    /// All keys consulted so far, with their resolved values, as config text.
    std::string resolved_text() const;

  private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> resolved_;
};

/// Exit codes of the experiment runner.
enum class RunStatus : int {
    Ok = 0,
    ValidationError = 2,
    NumericBlowup = 3,
    Degeneracy = 4,
};

struct RunOptions {
    int workers = 0;                    // 0 = hardware concurrency
    std::string out_dir = "out";
    std::optional<std::uint64_t> seed;  // overrides master_seed from the config
};

/// Execute the experiment described by the config; artifacts land in
/// options.out_dir (resolved_config.txt, report.json, kind-specific CSVs).
RunStatus run_experiment(const ExperimentConfig& cfg, const RunOptions& options);

/// Dry-run checks only; writes a validation report, launches nothing.
RunStatus validate_experiment(const ExperimentConfig& cfg, const RunOptions& options);

/// Re-aggregate per-trajectory CSVs from a previous run directory.
RunStatus report_from_directory(const std::string& dir, const std::string& out_path,
                                std::optional<double> gamma, std::optional<double> T,
                                std::optional<double> horizon);

} // namespace pamlab
