// tara: run, sweep and audit replicated-state-machine scenarios.

#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "tara/scenario.hpp"

namespace {

tara::ScenarioConfig base_config(const std::string& path) {
    return path.empty() ? tara::ScenarioConfig{} : tara::load_config(path);
}

int cmd_run(const std::string& config_path, std::optional<std::uint64_t> seed,
            const std::string& trace_path, const std::string& metrics_path) {
    auto config = base_config(config_path);
    if (seed) config.network.seed = *seed;
    if (!trace_path.empty()) config.trace = true;
    auto result = tara::run_scenario(config);

    if (!trace_path.empty()) {
        std::ofstream out(trace_path);
        for (const auto& r : result.trace) out << tara::format_trace_record(r) << '\n';
    }
    if (metrics_path.empty()) {
        tara::write_metrics(std::cout, result.metrics);
    } else {
        std::ofstream out(metrics_path);
        tara::write_metrics(out, result.metrics);
    }
    tara::print_audit(std::cout, result.audit);
    std::cout << "linearizability: " << tara::verdict_name(result.linearizability.verdict);
    if (!result.linearizability.detail.empty()) std::cout << " (" << result.linearizability.detail << ')';
    std::cout << '\n';
    return result.safe() ? 0 : 1;
}

int cmd_sweep(const std::string& config_path, std::uint64_t first_seed, std::size_t runs,
              int threads) {
    std::optional<tara::ScenarioConfig> base;
    if (!config_path.empty()) base = tara::load_config(config_path);
    auto make = [&](std::uint64_t seed) {
        if (!base) return tara::randomized_config(seed);
        auto c = *base;
        c.network.seed = seed;
        return c;
    };
    auto report = tara::sweep(first_seed, runs, make, threads);
    std::cout << "runs\t" << report.runs << "\nfailures\t" << report.failures
              << "\ncompleted_commands\t" << report.completed
              << "\nlinearizability_inconclusive\t" << report.inconclusive
              << "\nfaults_injected\t" << report.faults << "\nview_changes\t" << report.view_changes
              << "\ncheckpoint_loads\t" << report.catch_ups << '\n';
    for (const auto& [check, n] : report.failures_by_check)
        std::cout << "failed_check\t" << check << '\t' << n << '\n';
    for (auto seed : report.failed_seeds) std::cout << "failed_seed\t" << seed << '\n';
    return report.failures == 0 ? 0 : 1;
}

int cmd_audit(const std::string& trace_path, const std::string& config_path) {
    std::ifstream in(trace_path);
    if (!in) throw tara::config_error("cannot read " + trace_path);
    std::vector<tara::TraceRecord> records;
    std::size_t line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (line.empty()) continue;
        auto record = tara::parse_trace_record(line);
        if (!record) throw tara::config_error("malformed trace line " + std::to_string(line_no));
        records.push_back(std::move(*record));
    }
    auto config = base_config(config_path);
    auto recorder = tara::Recorder::replay(records);
    auto audit = tara::run_audits(recorder, config.params);
    tara::print_audit(std::cout, audit);
    auto lin = tara::check_kv_history(recorder.history());
    std::cout << "linearizability: " << tara::verdict_name(lin.verdict) << '\n';
    return audit.passed() && lin.verdict != tara::Verdict::violation ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic scenario runner for the TARA replication protocol"};
    app.require_subcommand(1);

    std::string config_path;
    std::string trace_path;
    std::string metrics_path;
    std::optional<std::uint64_t> seed;

    auto* run = app.add_subcommand("run", "Run one scenario and audit it");
    run->add_option("-c,--config", config_path, "Scenario file (key = value)")->check(CLI::ExistingFile);
    run->add_option("-s,--seed", seed, "Override the scenario seed");
    run->add_option("-t,--trace", trace_path, "Write the full event trace here");
    run->add_option("-m,--metrics", metrics_path, "Write metrics here instead of stdout");

    std::uint64_t first_seed = 1;
    std::size_t runs = 100;
    int threads = 1;
    auto* sw = app.add_subcommand("sweep", "Run many seeds; randomized faults unless a config is given");
    sw->add_option("-c,--config", config_path, "Base scenario file")->check(CLI::ExistingFile);
    sw->add_option("-s,--seed", first_seed, "First seed");
    sw->add_option("-n,--runs", runs, "Number of runs");
    sw->add_option("-j,--threads", threads, "Worker threads")
        ->default_val(std::max(1u, std::thread::hardware_concurrency()));

    auto* audit = app.add_subcommand("audit", "Re-check a stored trace");
    audit->add_option("-t,--trace", trace_path, "Trace file")->required()->check(CLI::ExistingFile);
    audit->add_option("-c,--config", config_path, "Scenario file the trace came from");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, seed, trace_path, metrics_path);
        if (*sw) return cmd_sweep(config_path, first_seed, runs, threads);
        if (*audit) return cmd_audit(trace_path, config_path);
    } catch (const tara::config_error& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
