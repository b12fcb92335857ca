#pragma once

// Scenario harness: configuration, fault schedules, a full seeded run with
// metrics and audits, and multi-seed sweeps.

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tara/client.hpp"
#include "tara/linearizability.hpp"
#include "tara/recorder.hpp"
#include "tara/simulator.hpp"

namespace tara {

struct FaultEvent {
    // Either a concrete instance or, with `active_proposer`, whichever
    // proposer of `partition` leads when the fault fires.
    NodeId node;
    bool active_proposer = false;
    int partition = 0;
    Tick at = 0;
    Tick restart_delay = -1;  // -1: never restarted

    bool operator==(const FaultEvent&) const = default;
};

struct ScenarioConfig {
    ProtocolParams params;
    NetworkModel network;
    int clients = 8;
    Workload workload;
    Tick duration = 2000;
    Tick bucket = 50;
    std::vector<FaultEvent> faults;
    bool beyond_f = false;  // more than f concurrent crashes per stage: only safety holds
    bool trace = false;
    bool check_linearizability = true;

    // Throws config_error with a diagnostic.
    void validate() const;
};

// Flat `key = value` text, `#` starts a comment. Fault lines:
//   crash = <role:partition:index | active-proposer:partition> <tick> [restart_delay]
//   block = <from> <to> <role:partition:index> <role:partition:index>
ScenarioConfig parse_config(std::string_view text);
ScenarioConfig load_config(const std::string& path);
std::string format_config(const ScenarioConfig& config);

struct MetricsReport {
    std::vector<std::uint64_t> throughput;  // first executions per bucket
    Tick bucket = 0;
    std::vector<Tick> latencies;            // per completed command
    std::map<Role, std::uint64_t> delivered;
    ViewNo view_changes = 0;
    std::size_t checkpoints = 0;
    std::uint64_t invoked = 0;
    std::uint64_t completed = 0;

    Tick latency_percentile(double q) const;
    // Mean throughput over buckets [from, to).
    double mean_throughput(std::size_t from, std::size_t to) const;
};

void write_metrics(std::ostream& out, const MetricsReport& metrics);

struct ExecutorSnapshot {
    bool alive = false;
    bool restarted = false;
    SeqNo next_exec = 0;
    Bytes app_snapshot;
};

struct ScenarioResult {
    MetricsReport metrics;
    SafetyAudit audit;
    LinearizabilityReport linearizability;
    std::vector<TraceRecord> trace;
    std::map<std::uint16_t, ExecutorSnapshot> executors;
    std::size_t checkpoint_loads = 0;

    // Audits pass and the history is not shown to be non-linearizable.
    bool safe() const;
};

ScenarioResult run_scenario(const ScenarioConfig& config);

// Draws a fault schedule with at most f crashed instances per stage at any
// time, each optionally restarted.
std::vector<FaultEvent> random_faults(const ProtocolParams& params, Tick duration,
                                      std::uint64_t seed);

struct SweepReport {
    std::size_t runs = 0;
    std::size_t failures = 0;
    std::vector<std::uint64_t> failed_seeds;
    std::map<std::string, std::size_t> failures_by_check;
    std::uint64_t completed = 0;
    std::size_t inconclusive = 0;
    std::size_t faults = 0;        // crash events injected
    std::uint64_t view_changes = 0;
    std::size_t catch_ups = 0;     // executor checkpoint loads
};

// Runs `runs` seeds starting at `first_seed`; `make` builds each config.
SweepReport sweep(std::uint64_t first_seed, std::size_t runs,
                  const std::function<ScenarioConfig(std::uint64_t seed)>& make, int threads = 1);

// The randomized configuration used by the safety sweep.
ScenarioConfig randomized_config(std::uint64_t seed);

}  // namespace tara
