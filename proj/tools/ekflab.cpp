// ekflab command-line front end: runs catalog scenarios and parameter
// sweeps, validates canonical structure, prints high-gain Gramians, and
// re-diagnoses stored trajectories. All file outputs are UTF-8; CSV uses
// '.' as the decimal separator regardless of locale.

#include "ekflab/diagnostics.hpp"
#include "ekflab/filter.hpp"
#include "ekflab/gramian.hpp"
#include "ekflab/io.hpp"
#include "ekflab/obsform.hpp"
#include "ekflab/scenarios.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ekflab;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMismatch = 1;
constexpr int kExitError = 2;

void write_file(const fs::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    out << content;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

ScenarioConfig resolve_config(const std::string& scenario_name, const std::string& config_path,
                              const std::optional<double>& dt_override,
                              const std::optional<double>& t_end_override,
                              const std::string& expect_override) {
    const ScenarioConfig* base = find_scenario(scenario_name);
    if (!base) throw std::invalid_argument("unknown scenario: " + scenario_name);
    ScenarioConfig cfg = *base;
    if (!config_path.empty()) {
        const json j = json::parse(read_file(config_path));
        cfg = scenario_from_json(j, cfg);
    }
    if (dt_override) cfg.integrator.dt = *dt_override;
    if (t_end_override) cfg.integrator.t_end = *t_end_override;
    if (!expect_override.empty()) {
        if (expect_override == "converge") cfg.expected = Expectation::converge;
        else if (expect_override == "diverge") cfg.expected = Expectation::diverge;
        else if (expect_override == "none") cfg.expected = Expectation::none;
        else throw std::invalid_argument("unknown expectation: " + expect_override);
    }
    return cfg;
}

int cmd_run(const std::string& scenario_name, const std::string& config_path,
            const std::optional<double>& dt, const std::optional<double>& t_end,
            const std::string& expect, const std::string& output_dir, const std::string& format) {
    const auto t_begin = std::chrono::steady_clock::now();
    const ScenarioConfig cfg = resolve_config(scenario_name, config_path, dt, t_end, expect);

    const ScenarioResult res = run_scenario(cfg);

    const fs::path dir = fs::path(output_dir) / cfg.name;
    fs::create_directories(dir);

    RunManifest man;
    man.config_digest = config_digest(scenario_to_json(cfg));
    man.scenario = cfg.name;
    man.verdict = to_string(res.report.verdict);

    fs::path traj_path;
    if (format == "json") {
        traj_path = dir / "trajectory.json";
        write_file(traj_path, trajectory_json(res.run).dump(2) + "\n");
    } else {
        traj_path = dir / "trajectory.csv";
        write_file(traj_path, trajectory_csv(res.run));
    }
    const fs::path diag_path = dir / "diagnostics.json";
    write_file(diag_path, diagnostics_to_json(res.report).dump(2) + "\n");
    man.output_paths = {traj_path.string(), diag_path.string()};

    man.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_begin).count();
    const fs::path man_path = dir / "manifest.json";
    write_file(man_path, manifest_to_json(man).dump(2) + "\n");

    std::cout << res.report.text();
    if (res.run.status != RunStatus::completed) {
        std::cerr << "run aborted: " << res.run.message << "\n";
        return kExitError;
    }
    if (!res.expected_match) {
        std::cerr << "verdict " << to_string(res.report.verdict) << " does not match expected "
                  << to_string(cfg.expected) << "\n";
        return kExitMismatch;
    }
    return kExitOk;
}

struct SweepRow {
    double value = 0.0;
    std::string verdict;
    double final_error = 0.0;
    std::optional<double> decay_rate;
    bool failed = false;
    std::string message;
};

SweepRow sweep_point(const ScenarioConfig& base, const std::string& parameter, double value) {
    SweepRow row;
    row.value = value;
    try {
        ScenarioConfig cfg = base;
        cfg.expected = Expectation::none;
        if (parameter == "xhat0_offset") {
            cfg.xhat0 = cfg.truth_x0 + Vector::Constant(cfg.truth_x0.size(), value);
        } else if (parameter == "dt") {
            cfg.integrator.dt = value;
        } else if (parameter == "theta") {
            // high-gain initialization probe: P0 = T(theta) for the
            // system's block structure
            const System sys = make_system(cfg.system);
            if (!sys.canonical)
                throw std::invalid_argument("theta sweep needs a canonical system");
            cfg.P0 = t_matrix(sys.canonical->block_lengths, value);
        } else {
            throw std::invalid_argument("unknown sweep parameter: " + parameter);
        }
        const ScenarioResult res = run_scenario(cfg);
        row.verdict = to_string(res.report.verdict);
        row.final_error = res.report.final_error;
        row.decay_rate = res.report.decay_rate;
        if (res.run.status != RunStatus::completed) {
            row.failed = true;
            row.message = res.run.message;
        }
    } catch (const std::exception& e) {
        row.failed = true;
        row.message = e.what();
    }
    return row;
}

int cmd_sweep(const std::string& scenario_name, const std::string& config_path,
              const std::string& parameter, const std::vector<double>& grid,
              const std::string& output_dir, int jobs) {
    if (grid.empty()) throw std::invalid_argument("sweep grid must be nonempty");
    const ScenarioConfig base = resolve_config(scenario_name, config_path, {}, {}, "");

    std::vector<SweepRow> rows(grid.size());
    std::atomic<std::size_t> next{0};
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers =
        std::min<std::size_t>({grid.size(), hw, static_cast<std::size_t>(std::max(1, jobs))});

    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
            for (std::size_t k = next.fetch_add(1); k < grid.size(); k = next.fetch_add(1))
                rows[k] = sweep_point(base, parameter, grid[k]);
        });
    }
    for (auto& th : pool) th.join();

    std::string csv = parameter + ",verdict,final_error,decay_rate\n";
    bool any_failed = false;
    char buf[40];
    for (const auto& row : rows) {
        std::snprintf(buf, sizeof(buf), "%.17g", row.value);
        csv += buf;
        csv += ',' + row.verdict + ',';
        std::snprintf(buf, sizeof(buf), "%.17g", row.final_error);
        csv += buf;
        csv += ',';
        if (row.decay_rate) {
            std::snprintf(buf, sizeof(buf), "%.17g", *row.decay_rate);
            csv += buf;
        }
        csv += '\n';
        if (row.failed) {
            any_failed = true;
            std::cerr << "sweep point " << row.value << " failed: " << row.message << "\n";
        }
    }

    const fs::path dir = fs::path(output_dir) / base.name;
    fs::create_directories(dir);
    const fs::path out = dir / ("sweep-" + parameter + ".csv");
    write_file(out, csv);
    std::cout << csv;
    return any_failed ? kExitError : kExitOk;
}

int cmd_gramian(const std::vector<int>& blocks, double theta, const std::string& format) {
    const GramianPair g = make_gramian_pair(blocks, theta);
    const double lyap = lyapunov_residual(g.S, theta, blocks);
    const double ricc = riccati_residual(g.T, theta, blocks);

    if (format == "json") {
        json j;
        j["theta"] = theta;
        j["block_lengths"] = blocks;
        j["S"] = matrix_to_json(g.S);
        j["T"] = matrix_to_json(g.T);
        j["lyapunov_residual"] = lyap;
        j["riccati_residual"] = ricc;
        std::cout << j.dump(2) << "\n";
    } else {
        const Eigen::IOFormat fmt(Eigen::StreamPrecision, 0, "  ", "\n", "  ");
        std::cout << "S(theta = " << theta << "):\n" << g.S.format(fmt) << "\n";
        std::cout << "T(theta = " << theta << "):\n" << g.T.format(fmt) << "\n";
        std::cout << "lyapunov residual: " << lyap << "\n";
        std::cout << "riccati residual:  " << ricc << "\n";
    }
    return (lyap <= 1e-9 && ricc <= 1e-9) ? kExitOk : kExitMismatch;
}

int cmd_diagnose(const std::string& run_path, double L, double m7, const std::string& format) {
    const SampleSeries s = series_from_csv(read_file(run_path));
    const DiagnosticsReport rep = diagnose_series(s, L, m7);
    if (format == "json") {
        std::cout << diagnostics_to_json(rep).dump(2) << "\n";
    } else {
        std::cout << rep.text();
    }
    return kExitOk;
}

int cmd_validate(const std::string& system_name, double lo, double hi, int samples, double tol) {
    const System sys = make_system(system_name);
    if (!sys.canonical)
        throw std::invalid_argument("system '" + system_name +
                                    "' has no declared canonical structure");
    const auto pts = halton_box_samples(sys.state_dim, sys.input_dim, lo, hi, samples);
    const ValidationReport rep = validate_structure(sys, pts, tol);
    std::cout << rep.summary() << "\n";
    return rep.pass ? kExitOk : kExitMismatch;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"ekflab: continuous-time extended Kalman filter laboratory"};
    app.set_version_flag("--version", std::string(kToolVersion));
    app.require_subcommand(1);

    std::string output_dir = "out";
    if (const char* env = std::getenv("EKFLAB_OUTPUT_DIR"); env && *env) output_dir = env;

    // run
    auto* run = app.add_subcommand("run", "run one scenario and write its artifacts");
    std::string run_scenario_name, run_config, run_expect, run_format = "csv";
    std::optional<double> run_dt, run_t_end;
    long run_seed = 0;
    run->add_option("scenario", run_scenario_name, "scenario name")->required();
    run->add_option("--config", run_config, "config file merged over catalog defaults");
    run->add_option("--output-dir", output_dir, "output root directory");
    run->add_option("--expect", run_expect, "override the expected verdict")
        ->check(CLI::IsMember({"converge", "diverge", "none"}));
    run->add_option("--dt", run_dt, "integrator step override");
    run->add_option("--t-end", run_t_end, "horizon override");
    run->add_option("--seed", run_seed, "reserved");
    run->add_option("--format", run_format, "trajectory format")
        ->check(CLI::IsMember({"csv", "json"}));

    // sweep
    auto* sweep = app.add_subcommand("sweep", "run a scenario across a parameter grid");
    std::string sweep_scenario, sweep_config, sweep_param;
    std::vector<double> sweep_grid;
    int sweep_jobs = 8;
    sweep->add_option("scenario", sweep_scenario, "scenario name")->required();
    sweep->add_option("--param", sweep_param, "swept parameter")
        ->required()
        ->check(CLI::IsMember({"xhat0_offset", "theta", "dt"}));
    sweep->add_option("--grid", sweep_grid, "grid values");
    sweep->add_option("--config", sweep_config, "config file merged over catalog defaults");
    sweep->add_option("--output-dir", output_dir, "output root directory");
    sweep->add_option("--jobs", sweep_jobs, "max concurrent runs");

    // gramian
    auto* gram = app.add_subcommand("gramian", "print S(theta), T(theta) and their residuals");
    std::vector<int> gram_blocks;
    double gram_theta = 1.0;
    std::string gram_format = "text";
    gram->add_option("--blocks", gram_blocks, "block lengths")->required();
    gram->add_option("--theta", gram_theta, "gain parameter")->required();
    gram->add_option("--format", gram_format, "output format")
        ->check(CLI::IsMember({"text", "json"}));

    // diagnose
    auto* diag = app.add_subcommand("diagnose", "re-diagnose a stored trajectory CSV");
    std::string diag_path, diag_format = "text";
    double diag_L = 0.0, diag_m7 = 1.0;
    diag->add_option("run_csv", diag_path, "trajectory CSV path")->required();
    diag->add_option("--L", diag_L, "second-derivative bound (0 = unconstrained)");
    diag->add_option("--m7", diag_m7, "lambda_min of Gamma");
    diag->add_option("--format", diag_format, "output format")
        ->check(CLI::IsMember({"text", "json"}));

    // validate
    auto* val = app.add_subcommand("validate", "check a system's canonical structure");
    std::string val_system;
    double val_lo = -5.0, val_hi = 5.0, val_tol = 1e-6;
    int val_samples = 200;
    val->add_option("system", val_system, "system name")->required();
    val->add_option("--box-lo", val_lo, "sample box lower bound");
    val->add_option("--box-hi", val_hi, "sample box upper bound");
    val->add_option("--samples", val_samples, "sample count");
    val->add_option("--tol", val_tol, "forbidden-partial tolerance");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run)
            return cmd_run(run_scenario_name, run_config, run_dt, run_t_end, run_expect,
                           output_dir, run_format);
        if (*sweep)
            return cmd_sweep(sweep_scenario, sweep_config, sweep_param, sweep_grid, output_dir,
                             sweep_jobs);
        if (*gram) return cmd_gramian(gram_blocks, gram_theta, gram_format);
        if (*diag) return cmd_diagnose(diag_path, diag_L, diag_m7, diag_format);
        if (*val) return cmd_validate(val_system, val_lo, val_hi, val_samples, val_tol);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitError;
    }
    return kExitError;
}
