// Command-line front end: run scenarios, validate scenario files, and batch
// whole directories. Exit codes: 0 = success, 1 = scenario/parse problem,
// 2 = a run completed but violated a runtime invariant.

#include <nomadsim/nomadsim.hpp>

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace fs = std::filesystem;
using namespace nomadsim;

namespace {

enum class LogLevel { Quiet, Info, Debug };

LogLevel parse_log_level(const std::string& s) {
    if (s == "quiet") return LogLevel::Quiet;
    if (s == "info") return LogLevel::Info;
    if (s == "debug") return LogLevel::Debug;
    throw CLI::ValidationError("--log-level", "expected quiet, info, or debug");
}

struct RunResult {
    int exit_code = 0;
    std::string line; // one-line summary for stderr
};

RunResult run_one(const fs::path& path, std::optional<std::uint64_t> seed,
                  std::optional<double> until_sec, const std::string& out_path,
                  LogLevel level) {
    RunResult res;
    Scenario sc;
    try {
        sc = parse_scenario(path.string());
    } catch (const SimError& e) {
        res.exit_code = 1;
        res.line = std::string("error: ") + e.what();
        return res;
    }
    if (seed) sc.seed = *seed;
    if (until_sec) sc.duration = SimTime::from_us(static_cast<std::int64_t>(*until_sec * 1e6));

    Simulation sim(std::move(sc));
    MetricsReport report = sim.run();

    try {
        if (out_path.empty() || out_path == "-") {
            std::cout << metrics_to_string(report);
        } else {
            emit_metrics_file(report, out_path);
        }
    } catch (const SimError& e) {
        res.exit_code = 1;
        res.line = std::string("error: ") + e.what();
        return res;
    }

    auto checks = run_all_checks(report);
    bool ok = std::all_of(checks.begin(), checks.end(),
                          [](const CheckResult& c) { return c.passed; });

    std::string summary = report.scenario + ": seed=" + std::to_string(report.seed) +
                          " records=" + std::to_string(report.records.size()) +
                          " delivered=" + std::to_string(report.counters.packets_delivered) +
                          " violations=" + std::to_string(report.counters.licensing_violations);
    if (!ok) {
        for (const auto& c : checks) {
            if (!c.passed) summary += "\n  check failed: " + c.name + " (" + c.detail + ")";
        }
        res.exit_code = 2;
    }
    if (level == LogLevel::Debug) {
        summary += "\n  counters: " + metrics_detail::counters_to_json(report.counters).dump();
    }
    res.line = summary;
    return res;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic simulator for nomadic network clusters"};
    app.require_subcommand(1);
    app.fallthrough(); // parent options (e.g. --log-level) may follow the subcommand

    std::string log_level_str = "info";
    app.add_option("--log-level", log_level_str, "quiet, info, or debug")
        ->capture_default_str();

    // ---- run ------------------------------------------------------------
    std::string run_scenario;
    std::optional<std::uint64_t> run_seed;
    std::optional<double> run_until;
    std::string run_out;
    auto* run = app.add_subcommand("run", "Run one scenario and emit metrics");
    run->add_option("scenario", run_scenario, "Scenario JSON file")->required();
    run->add_option("--seed", run_seed, "Override the scenario seed");
    run->add_option("--until", run_until, "Stop after this many simulated seconds");
    run->add_option("--out", run_out, "Metrics output path (default: stdout)");

    // ---- validate -------------------------------------------------------
    std::string val_scenario;
    auto* validate = app.add_subcommand("validate", "Parse and check a scenario file");
    validate->add_option("scenario", val_scenario, "Scenario JSON file")->required();

    // ---- batch ----------------------------------------------------------
    std::string batch_dir;
    std::string batch_out_dir;
    unsigned batch_jobs = 1;
    auto* batch = app.add_subcommand("batch", "Run every scenario in a directory");
    batch->add_option("dir", batch_dir, "Directory of scenario JSON files")->required();
    batch->add_option("--jobs", batch_jobs, "Worker threads")->capture_default_str();
    batch->add_option("--out-dir", batch_out_dir, "Directory for per-scenario metrics files");

    CLI11_PARSE(app, argc, argv);
    LogLevel level = parse_log_level(log_level_str);

    if (*run) {
        RunResult r = run_one(run_scenario, run_seed, run_until, run_out, level);
        if (level != LogLevel::Quiet && !r.line.empty()) std::cerr << r.line << "\n";
        return r.exit_code;
    }

    if (*validate) {
        try {
            Scenario sc = parse_scenario(val_scenario);
            auto warnings = validate_scenario(sc);
            for (const auto& w : warnings) {
                std::cerr << "warning: " << w.code << ": " << w.detail << "\n";
            }
            if (level != LogLevel::Quiet) {
                std::cerr << sc.name << ": ok (" << sc.nodes.size() << " node(s), "
                          << warnings.size() << " warning(s))\n";
            }
            return 0;
        } catch (const SimError& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
    }

    if (*batch) {
        std::vector<fs::path> files;
        try {
            for (const auto& entry : fs::directory_iterator(batch_dir)) {
                if (entry.path().extension() == ".json") files.push_back(entry.path());
            }
        } catch (const fs::filesystem_error& e) {
            std::cerr << "error: " << e.what() << "\n";
            return 1;
        }
        std::sort(files.begin(), files.end());
        if (!batch_out_dir.empty()) fs::create_directories(batch_out_dir);

        std::vector<RunResult> results(files.size());
        std::atomic<std::size_t> next{0};
        unsigned jobs = std::max(1u, batch_jobs);
        auto worker = [&] {
            for (;;) {
                std::size_t i = next.fetch_add(1);
                if (i >= files.size()) return;
                std::string out;
                if (!batch_out_dir.empty()) {
                    out = (fs::path(batch_out_dir) / files[i].stem()).string() + ".ndjson";
                }
                results[i] = run_one(files[i], std::nullopt, std::nullopt,
                                     out.empty() ? "/dev/null" : out, LogLevel::Quiet);
            }
        };
        std::vector<std::thread> pool;
        for (unsigned j = 1; j < jobs; ++j) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();

        int exit_code = 0;
        for (std::size_t i = 0; i < files.size(); ++i) {
            if (level != LogLevel::Quiet) {
                std::cerr << files[i].filename().string() << " -> "
                          << (results[i].exit_code == 0 ? "ok" : "FAILED") << "\n";
                if (results[i].exit_code != 0) std::cerr << "  " << results[i].line << "\n";
            }
            exit_code = std::max(exit_code, results[i].exit_code);
        }
        return exit_code;
    }

    return 0;
}
