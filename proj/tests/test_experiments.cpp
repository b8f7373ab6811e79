#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pamlab/experiments.hpp"
#include "pamlab/stats.hpp"

using namespace pamlab;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_report(const fs::path& dir) { return json::parse(slurp(dir / "report.json")); }

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pamlab_test" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST_CASE("config parsing: comments, types, lists, seeds") {
    auto cfg = ExperimentConfig::from_string(
        "# a comment\n"
        "kind = tailsum   # trailing comment\n"
        "delta_list = 0.1, 0.2,0.4\n"
        "master_seed = 0xDEADBEEF\n"
        "flag = true\n"
        "floor = 1e-320\n");
    CHECK(cfg.require_string("kind") == "tailsum");
    CHECK(cfg.get_double_list("delta_list", {}) == std::vector<double>{0.1, 0.2, 0.4});
    CHECK(cfg.get_seed("master_seed", 0) == 0xDEADBEEFull);
    CHECK(cfg.get_bool("flag", false));
    CHECK(cfg.get_double("floor", 0.0) == 1e-320);
    CHECK(cfg.get_int("missing", 7) == 7);
    CHECK_THROWS_AS(cfg.require_string("nope"), std::domain_error);
    CHECK_THROWS_AS(ExperimentConfig::from_string("just a line\n"), std::domain_error);
}

TEST_CASE("resolved config echoes every consulted key and reproduces the run") {
    const fs::path dir1 = fresh_dir("echo1");
    const fs::path dir2 = fresh_dir("echo2");
    auto cfg = ExperimentConfig::from_string("kind = schedule\nn_max = 50\n");
    RunOptions opt;
    opt.out_dir = dir1.string();
    REQUIRE(run_experiment(cfg, opt) == RunStatus::Ok);

    // Re-run from the echoed config: identical artifacts.
    auto cfg2 = ExperimentConfig::from_file((dir1 / "resolved_config.txt").string());
    opt.out_dir = dir2.string();
    REQUIRE(run_experiment(cfg2, opt) == RunStatus::Ok);
    CHECK(slurp(dir1 / "schedule.csv") == slurp(dir2 / "schedule.csv"));
    CHECK(slurp(dir1 / "report.json") == slurp(dir2 / "report.json"));
}

TEST_CASE("schedule experiment emits the expected arithmetic") {
    const fs::path dir = fresh_dir("schedule");
    auto cfg = ExperimentConfig::from_string("kind = schedule\nn_max = 100\n");
    RunOptions opt;
    opt.out_dir = dir.string();
    REQUIRE(run_experiment(cfg, opt) == RunStatus::Ok);
    const json rep = load_report(dir);
    CHECK(rep["result"]["delta"].get<double>() ==
          doctest::Approx(0.36787944117144233).epsilon(1e-12));
    CHECK(rep["result"]["T_1_minus_T_0"].get<double>() ==
          doctest::Approx(rep["result"]["delta"].get<double>()).epsilon(1e-12));
}

TEST_CASE("tailsum experiment is a bit-exact passthrough of the library rows") {
    const fs::path dir = fresh_dir("tailsum");
    auto cfg = ExperimentConfig::from_string("kind = tailsum\ndelta_list = 0.05,0.1,0.2,0.4\n");
    RunOptions opt;
    opt.out_dir = dir.string();
    REQUIRE(run_experiment(cfg, opt) == RunStatus::Ok);
    const json rep = load_report(dir);
    const auto rows = tail_sum_check({0.05, 0.1, 0.2, 0.4});
    REQUIRE(rep["result"]["rows"].size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(rep["result"]["rows"][i]["sum"].get<double>() == rows[i].sum);
        CHECK(rep["result"]["rows"][i]["ratio"].get<double>() == rows[i].ratio);
    }
}

TEST_CASE("same config and seed give byte-identical outputs, any worker count") {
    auto make_cfg = [] {
        return ExperimentConfig::from_string(
            "kind = simulate\n"
            "preset = linear\nmu = 0\nsigma = 1\n"
            "grid_n = 32\ndt = 1e-3\nt_end = 0.2\n"
            "ensemble = 6\nmaster_seed = 555\nrecord_stride = 20\n"
            "write_trajectories = true\n");
    };
    const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b"), c = fresh_dir("det_c");
    RunOptions opt;
    opt.workers = 1;
    opt.out_dir = a.string();
    REQUIRE(run_experiment(make_cfg(), opt) == RunStatus::Ok);
    opt.out_dir = b.string();
    REQUIRE(run_experiment(make_cfg(), opt) == RunStatus::Ok);
    opt.workers = 3;
    opt.out_dir = c.string();
    REQUIRE(run_experiment(make_cfg(), opt) == RunStatus::Ok);

    for (const char* name : {"final_states.csv", "report.json", "trajectory_000003.csv"}) {
        CHECK(slurp(a / name) == slurp(b / name));
        CHECK(slurp(a / name) == slurp(c / name));
    }
}

TEST_CASE("seed override changes outputs") {
    auto cfg = ExperimentConfig::from_string(
        "kind = simulate\npreset = linear\nmu = 0\nsigma = 1\n"
        "grid_n = 32\ndt = 1e-3\nt_end = 0.1\nensemble = 2\nmaster_seed = 1\n");
    const fs::path a = fresh_dir("seed_a"), b = fresh_dir("seed_b");
    RunOptions opt;
    opt.out_dir = a.string();
    REQUIRE(run_experiment(cfg, opt) == RunStatus::Ok);
    opt.out_dir = b.string();
    opt.seed = 2;
    REQUIRE(run_experiment(cfg, opt) == RunStatus::Ok);
    CHECK(slurp(a / "final_states.csv") != slurp(b / "final_states.csv"));
}

TEST_CASE("validate reports the violated noise condition with both sides") {
    const fs::path dir = fresh_dir("validate1");
    auto cfg = ExperimentConfig::from_string(
        "kind = dissipation\npreset = linear\nmu = 1\nsigma = 1\n");
    RunOptions opt;
    opt.out_dir = dir.string();
    REQUIRE(validate_experiment(cfg, opt) == RunStatus::Ok);
    const json rep = json::parse(slurp(dir / "validate.json"));
    CHECK_FALSE(rep["all_pass"].get<bool>());
    bool found = false;
    for (const auto& c : rep["checks"]) {
        if (c["name"] == "high_noise_condition") {
            found = true;
            CHECK_FALSE(c["pass"].get<bool>());
            CHECK(c["detail"]["sup_f_ratio"].get<double>() == 1.0);
            CHECK(c["detail"]["threshold"].get<double>() == doctest::Approx(1.0 / 64.0));
        }
    }
    CHECK(found);
}

TEST_CASE("validate flags an out-of-range epsilon") {
    const fs::path dir = fresh_dir("validate2");
    auto cfg = ExperimentConfig::from_string(
        "kind = schedule\nepsilon = 0.1\n");
    RunOptions opt;
    opt.out_dir = dir.string();
    REQUIRE(validate_experiment(cfg, opt) == RunStatus::Ok);
    const json rep = json::parse(slurp(dir / "validate.json"));
    bool found = false;
    for (const auto& c : rep["checks"])
        if (c["name"] == "epsilon_range") {
            found = true;
            CHECK_FALSE(c["pass"].get<bool>());
        }
    CHECK(found);
}

TEST_CASE("validate passes a healthy config") {
    const fs::path dir = fresh_dir("validate3");
    auto cfg = ExperimentConfig::from_string(
        "kind = staged-coupling\npreset = fisher_kpp\na = 0.001\nb = 1\nsigma = 4\n"
        "n_max = 10\n");
    RunOptions opt;
    opt.out_dir = dir.string();
    REQUIRE(validate_experiment(cfg, opt) == RunStatus::Ok);
    const json rep = json::parse(slurp(dir / "validate.json"));
    CHECK(rep["all_pass"].get<bool>());
}

TEST_CASE("run maps validation failures to exit code 2 with an error report") {
    const fs::path dir = fresh_dir("badrun");
    auto cfg = ExperimentConfig::from_string("kind = nonsense\n");
    RunOptions opt;
    opt.out_dir = dir.string();
    CHECK(run_experiment(cfg, opt) == RunStatus::ValidationError);
    const json rep = load_report(dir);
    CHECK(rep["status"].get<int>() == 2);
    CHECK(rep.contains("error"));
}

TEST_CASE("run maps blowup to exit code 3") {
    const fs::path dir = fresh_dir("blowup");
    auto cfg = ExperimentConfig::from_string(
        "kind = simulate\npreset = linear\nmu = 500\nsigma = 0\n"
        "grid_n = 32\ndt = 1e-2\nt_end = 2.0\nensemble = 1\nblowup_cap = 100\n");
    RunOptions opt;
    opt.out_dir = dir.string();
    CHECK(run_experiment(cfg, opt) == RunStatus::NumericBlowup);
}

TEST_CASE("report subcommand re-aggregates trajectory csvs") {
    const fs::path dir = fresh_dir("reagg");
    auto cfg = ExperimentConfig::from_string(
        "kind = simulate\npreset = linear\nmu = 0\nsigma = 1\n"
        "grid_n = 32\ndt = 1e-3\nt_end = 0.2\nensemble = 4\nmaster_seed = 9\n"
        "write_trajectories = true\nrecord_stride = 20\n");
    RunOptions opt;
    opt.out_dir = dir.string();
    REQUIRE(run_experiment(cfg, opt) == RunStatus::Ok);
    const fs::path out = dir / "reaggregated.json";
    REQUIRE(report_from_directory(dir.string(), out.string(), std::nullopt, std::nullopt,
                                  std::nullopt) == RunStatus::Ok);
    const json rep = json::parse(slurp(out));
    CHECK(rep["trajectories"].get<int>() == 4);
    CHECK(rep["final_sup_mean"].get<double>() > 0.0);
}
