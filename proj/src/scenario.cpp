#include "tara/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <fstream>
#include <mutex>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

#include "tara/execution.hpp"
#include "tara/garbage_collection.hpp"
#include "tara/kv_service.hpp"
#include "tara/ordering.hpp"
#include "tara/view_change.hpp"

namespace tara {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> words(std::string_view s) {
    std::vector<std::string> out;
    std::istringstream in{std::string(s)};
    for (std::string w; in >> w;) out.push_back(w);
    return out;
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw config_error("bad value for " + key + ": '" + text + "'");
    return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
    if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
    if (text == "0" || text == "false" || text == "no" || text == "off") return false;
    throw config_error("bad value for " + key + ": '" + text + "'");
}

NodeId parse_node(const std::string& text) {
    auto id = parse_node_id(text);
    if (!id) throw config_error("bad node id '" + text + "'");
    return *id;
}

FaultEvent parse_crash(const std::string& value) {
    auto w = words(value);
    if (w.size() < 2 || w.size() > 3)
        throw config_error("crash expects '<node> <tick> [restart_delay]', got '" + value + "'");
    FaultEvent fault;
    constexpr std::string_view kActive = "active-proposer:";
    if (w[0].starts_with(kActive)) {
        fault.active_proposer = true;
        fault.partition = parse_number<int>("crash", w[0].substr(kActive.size()));
        fault.node = NodeId{Role::proposer, static_cast<std::uint16_t>(fault.partition), 0};
    } else {
        fault.node = parse_node(w[0]);
        fault.partition = fault.node.partition;
    }
    fault.at = parse_number<Tick>("crash", w[1]);
    if (w.size() == 3) fault.restart_delay = parse_number<Tick>("crash", w[2]);
    return fault;
}

NetworkModel::Block parse_block(const std::string& value) {
    auto w = words(value);
    if (w.size() != 4) throw config_error("block expects '<from> <to> <node> <node>'");
    return NetworkModel::Block{parse_number<Tick>("block", w[0]), parse_number<Tick>("block", w[1]),
                               parse_node(w[2]), parse_node(w[3])};
}

using Setter = std::function<void(ScenarioConfig&, const std::string& key, const std::string&)>;

template <typename T, typename Field>
Setter number(Field field) {
    return [field](ScenarioConfig& c, const std::string& key, const std::string& v) {
        field(c) = parse_number<T>(key, v);
    };
}

const std::map<std::string, Setter>& setters() {
    static const std::map<std::string, Setter> table = {
        {"f", number<int>([](ScenarioConfig& c) -> int& { return c.params.f; })},
        {"partitions", number<int>([](ScenarioConfig& c) -> int& { return c.params.partitions; })},
        {"checkpoint_interval",
         number<SeqNo>([](ScenarioConfig& c) -> SeqNo& { return c.params.checkpoint_interval; })},
        {"window", number<SeqNo>([](ScenarioConfig& c) -> SeqNo& { return c.params.window; })},
        {"max_batch", number<std::size_t>(
             [](ScenarioConfig& c) -> std::size_t& { return c.params.max_batch; })},
        {"batch_timeout",
         number<Tick>([](ScenarioConfig& c) -> Tick& { return c.params.batch_timeout; })},
        {"retransmit_timeout",
         number<Tick>([](ScenarioConfig& c) -> Tick& { return c.params.retransmit_timeout; })},
        {"report_period",
         number<Tick>([](ScenarioConfig& c) -> Tick& { return c.params.report_period; })},
        {"gossip_period",
         number<Tick>([](ScenarioConfig& c) -> Tick& { return c.params.gossip_period; })},
        {"stall_timeout",
         number<Tick>([](ScenarioConfig& c) -> Tick& { return c.params.stall_timeout; })},
        {"proposer_cap", number<int>([](ScenarioConfig& c) -> int& { return c.params.proposer_cap; })},
        {"noop_heartbeat",
         number<Tick>([](ScenarioConfig& c) -> Tick& { return c.params.noop_heartbeat; })},
        {"seed",
         number<std::uint64_t>([](ScenarioConfig& c) -> std::uint64_t& { return c.network.seed; })},
        {"min_delay", number<Tick>([](ScenarioConfig& c) -> Tick& { return c.network.min_delay; })},
        {"max_delay", number<Tick>([](ScenarioConfig& c) -> Tick& { return c.network.max_delay; })},
        {"pre_gst_max_delay",
         number<Tick>([](ScenarioConfig& c) -> Tick& { return c.network.pre_gst_max_delay; })},
        {"loss", number<double>([](ScenarioConfig& c) -> double& { return c.network.loss; })},
        {"duplication",
         number<double>([](ScenarioConfig& c) -> double& { return c.network.duplication; })},
        {"gst", number<Tick>([](ScenarioConfig& c) -> Tick& { return c.network.gst; })},
        {"clients", number<int>([](ScenarioConfig& c) -> int& { return c.clients; })},
        {"keys", number<int>([](ScenarioConfig& c) -> int& { return c.workload.keys; })},
        {"read_ratio",
         number<double>([](ScenarioConfig& c) -> double& { return c.workload.read_ratio; })},
        {"delete_ratio",
         number<double>([](ScenarioConfig& c) -> double& { return c.workload.delete_ratio; })},
        {"think_time", number<Tick>([](ScenarioConfig& c) -> Tick& { return c.workload.think_time; })},
        {"client_timeout",
         number<Tick>([](ScenarioConfig& c) -> Tick& { return c.workload.timeout; })},
        {"client_stop", number<Tick>([](ScenarioConfig& c) -> Tick& { return c.workload.stop_at; })},
        {"max_commands", number<std::uint64_t>([](ScenarioConfig& c) -> std::uint64_t& {
             return c.workload.max_commands;
         })},
        {"duration", number<Tick>([](ScenarioConfig& c) -> Tick& { return c.duration; })},
        {"bucket", number<Tick>([](ScenarioConfig& c) -> Tick& { return c.bucket; })},
        {"beyond_f", [](ScenarioConfig& c, const std::string& k,
                        const std::string& v) { c.beyond_f = parse_bool(k, v); }},
        {"trace", [](ScenarioConfig& c, const std::string& k,
                     const std::string& v) { c.trace = parse_bool(k, v); }},
        {"linearizability", [](ScenarioConfig& c, const std::string& k, const std::string& v) {
             c.check_linearizability = parse_bool(k, v);
         }},
        {"crash", [](ScenarioConfig& c, const std::string&,
                     const std::string& v) { c.faults.push_back(parse_crash(v)); }},
        {"block", [](ScenarioConfig& c, const std::string&,
                     const std::string& v) { c.network.blocks.push_back(parse_block(v)); }},
    };
    return table;
}

std::unique_ptr<Node> make_node(const NodeId& id, const ProtocolParams& params) {
    switch (id.role) {
        case Role::request_source: return std::make_unique<RequestSource>(params);
        case Role::gc_source: return std::make_unique<GcSource>(params.f);
        case Role::view_source: return std::make_unique<ViewSource>();
        case Role::record_source: return std::make_unique<RecordSource>();
        case Role::proposer: return std::make_unique<Proposer>(id, params);
        case Role::committer: return std::make_unique<Committer>(id, params);
        case Role::executor:
            return std::make_unique<Executor>(id, params, std::make_unique<KvService>());
        case Role::controller: return std::make_unique<Controller>(id, params);
        case Role::reply_sink: return std::make_unique<ReplySink>();
        case Role::gc_sink: return std::make_unique<FeedbackSink>(Stream::gc_feedback, false);
        case Role::view_sink: return std::make_unique<FeedbackSink>(Stream::view_feedback, true);
        case Role::record_sink: return std::make_unique<FeedbackSink>(Stream::record_feedback, true);
        default: break;
    }
    throw config_error("no node implementation for role " + std::string(role_name(id.role)));
}

std::string stage_key(const FaultEvent& fault) {
    if (fault.active_proposer) return "proposer/p" + std::to_string(fault.partition);
    return stage_name(fault.node.role, fault.node.partition);
}

}  // namespace

void ScenarioConfig::validate() const {
    params.validate();
    network.validate();
    if (clients < 1) throw config_error("clients must be at least 1");
    if (workload.keys < 1) throw config_error("keys must be at least 1");
    if (workload.timeout < 1) throw config_error("client_timeout must be positive");
    if (workload.read_ratio < 0 || workload.delete_ratio < 0 ||
        workload.read_ratio + workload.delete_ratio > 1)
        throw config_error("read_ratio + delete_ratio must lie in [0, 1]");
    if (duration < 1) throw config_error("duration must be positive");
    if (bucket < 1) throw config_error("bucket must be positive");

    // Instance ids must exist, and at most f instances of a stage may be
    // down at any time unless the scenario is marked beyond-f.
    auto topology = build_topology(params);
    std::map<std::string, std::vector<std::pair<Tick, int>>> edges;
    for (const auto& fault : faults) {
        if (fault.at < 0) throw config_error("crash tick must be non-negative");
        auto stage = stage_key(fault);
        const auto* spec = topology.find_stage(stage);
        if (spec == nullptr) throw config_error("crash targets unknown stage " + stage);
        if (!fault.active_proposer && fault.node.index >= spec->instance_count)
            throw config_error("crash targets missing instance " + to_string(fault.node));
        Tick end = fault.restart_delay < 0 ? kNever : fault.at + fault.restart_delay;
        edges[stage].push_back({fault.at, +1});
        if (end != kNever) edges[stage].push_back({end, -1});
    }
    if (beyond_f) return;
    for (auto& [stage, list] : edges) {
        std::sort(list.begin(), list.end());  // restarts (-1) sort before crashes at the same tick
        int down = 0;
        for (const auto& [tick, delta] : list) {
            down += delta;
            if (down > params.f)
                throw config_error("more than f concurrent crashes in stage " + stage +
                                   " (mark the scenario beyond_f to allow)");
        }
    }
}

ScenarioConfig parse_config(std::string_view text) {
    ScenarioConfig config;
    std::istringstream in{std::string(text)};
    int line_no = 0;
    for (std::string line; std::getline(in, line);) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        auto body = trim(line);
        if (body.empty()) continue;
        auto eq = body.find('=');
        if (eq == std::string::npos)
            throw config_error("line " + std::to_string(line_no) + ": expected key = value");
        auto key = trim(std::string_view(body).substr(0, eq));
        auto value = trim(std::string_view(body).substr(eq + 1));
        auto it = setters().find(key);
        if (it == setters().end())
            throw config_error("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
        try {
            it->second(config, key, value);
        } catch (const config_error& e) {
            throw config_error("line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    config.validate();
    return config;
}

ScenarioConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw config_error("cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string format_config(const ScenarioConfig& c) {
    std::ostringstream out;
    out.precision(17);
    const auto& p = c.params;
    const auto& n = c.network;
    const auto& w = c.workload;
    out << "f = " << p.f << "\npartitions = " << p.partitions
        << "\ncheckpoint_interval = " << p.checkpoint_interval << "\nwindow = " << p.window
        << "\nmax_batch = " << p.max_batch << "\nbatch_timeout = " << p.batch_timeout
        << "\nretransmit_timeout = " << p.retransmit_timeout
        << "\nreport_period = " << p.report_period << "\ngossip_period = " << p.gossip_period
        << "\nstall_timeout = " << p.stall_timeout << "\nproposer_cap = " << p.proposer_cap
        << "\nnoop_heartbeat = " << p.noop_heartbeat << "\nseed = " << n.seed
        << "\nmin_delay = " << n.min_delay << "\nmax_delay = " << n.max_delay
        << "\npre_gst_max_delay = " << n.pre_gst_max_delay << "\nloss = " << n.loss
        << "\nduplication = " << n.duplication << "\ngst = " << n.gst
        << "\nclients = " << c.clients << "\nkeys = " << w.keys << "\nread_ratio = " << w.read_ratio
        << "\ndelete_ratio = " << w.delete_ratio << "\nthink_time = " << w.think_time
        << "\nclient_timeout = " << w.timeout << "\nclient_stop = " << w.stop_at
        << "\nmax_commands = " << w.max_commands << "\nduration = " << c.duration
        << "\nbucket = " << c.bucket << "\nbeyond_f = " << (c.beyond_f ? "true" : "false")
        << "\ntrace = " << (c.trace ? "true" : "false")
        << "\nlinearizability = " << (c.check_linearizability ? "true" : "false") << '\n';
    for (const auto& fault : c.faults) {
        out << "crash = ";
        if (fault.active_proposer)
            out << "active-proposer:" << fault.partition;
        else
            out << to_string(fault.node);
        out << ' ' << fault.at;
        if (fault.restart_delay >= 0) out << ' ' << fault.restart_delay;
        out << '\n';
    }
    for (const auto& b : n.blocks)
        out << "block = " << b.from << ' ' << b.to << ' ' << to_string(b.a) << ' ' << to_string(b.b)
            << '\n';
    return out.str();
}

Tick MetricsReport::latency_percentile(double q) const {
    if (latencies.empty()) return 0;
    auto sorted = latencies;
    std::sort(sorted.begin(), sorted.end());
    auto idx = static_cast<std::size_t>(q * static_cast<double>(sorted.size() - 1) + 0.5);
    return sorted[std::min(idx, sorted.size() - 1)];
}

double MetricsReport::mean_throughput(std::size_t from, std::size_t to) const {
    to = std::min(to, throughput.size());
    if (from >= to) return 0.0;
    double sum = 0;
    for (auto i = from; i < to; ++i) sum += static_cast<double>(throughput[i]);
    return sum / static_cast<double>(to - from);
}

void write_metrics(std::ostream& out, const MetricsReport& m) {
    out << "metric\tkey\tvalue\n";
    out << "summary\tinvoked\t" << m.invoked << '\n';
    out << "summary\tcompleted\t" << m.completed << '\n';
    out << "summary\tview_changes\t" << m.view_changes << '\n';
    out << "summary\tcheckpoints\t" << m.checkpoints << '\n';
    out << "summary\tbucket_ticks\t" << m.bucket << '\n';
    for (double q : {0.5, 0.9, 0.99})
        out << "latency\tp" << static_cast<int>(q * 100) << '\t' << m.latency_percentile(q) << '\n';
    for (std::size_t i = 0; i < m.throughput.size(); ++i)
        out << "throughput\t" << static_cast<Tick>(i) * m.bucket << '\t' << m.throughput[i] << '\n';
    for (const auto& [role, count] : m.delivered)
        out << "delivered\t" << role_name(role) << '\t' << count << '\n';
}

bool ScenarioResult::safe() const {
    return audit.passed() && linearizability.verdict != Verdict::violation;
}

ScenarioResult run_scenario(const ScenarioConfig& config) {
    config.validate();
    const auto& params = config.params;
    Recorder recorder(config.trace);
    CheckpointStore store;
    Simulator sim(build_topology(params), params, config.network,
                  [&params](const NodeId& id) { return make_node(id, params); }, recorder, store);

    for (int i = 0; i < config.clients; ++i) {
        sim.add_actor(NodeId{Role::client, 0, static_cast<std::uint16_t>(i)},
                      std::make_unique<Client>(static_cast<ClientId>(i), params.small_stage(),
                                               config.workload, config.network.seed));
    }
    sim.start();

    std::set<std::uint16_t> restarted_executors;
    for (const auto& fault : config.faults) {
        if (fault.node.role == Role::executor && fault.restart_delay >= 0)
            restarted_executors.insert(fault.node.index);
        sim.schedule_action(fault.at, [fault, &params](Simulator& s) {
            NodeId target = fault.node;
            if (fault.active_proposer) {
                // Whoever leads the partition right now; fall back to the
                // proposer the current view designates.
                bool found = false;
                for (int i = 0; i < params.small_stage() && !found; ++i) {
                    NodeId id{Role::proposer, static_cast<std::uint16_t>(fault.partition),
                              static_cast<std::uint16_t>(i)};
                    if (auto* p = s.node_as<Proposer>(id); p && p->leading()) {
                        target = id;
                        found = true;
                    }
                }
                for (int i = 0; i < params.small_stage() && !found; ++i) {
                    NodeId id{Role::proposer, static_cast<std::uint16_t>(fault.partition),
                              static_cast<std::uint16_t>(i)};
                    if (auto* p = s.node_as<Proposer>(id); p && p->active()) {
                        target = id;
                        found = true;
                    }
                }
            }
            s.crash_node(target, s.now());
            if (fault.restart_delay >= 0) s.restart_node(target, s.now() + fault.restart_delay);
        });
    }

    sim.run(config.duration);
    recorder.flush_window_records(config.duration);

    ScenarioResult result;
    auto& m = result.metrics;
    m.bucket = config.bucket;
    m.throughput.assign(static_cast<std::size_t>(config.duration / config.bucket), 0);
    for (Tick t : recorder.first_execution_ticks()) {
        auto b = static_cast<std::size_t>(t / config.bucket);
        if (b < m.throughput.size()) ++m.throughput[b];
    }
    for (const auto& [id, entry] : recorder.history()) {
        ++m.invoked;
        if (!entry.completed) continue;
        ++m.completed;
        m.latencies.push_back(*entry.completed - entry.invoked);
    }
    m.delivered = sim.delivered_counts();
    m.view_changes = static_cast<ViewNo>(recorder.view_announcements());
    m.checkpoints = recorder.checkpoints_written();

    result.audit = run_audits(recorder, params);
    if (config.check_linearizability) {
        result.linearizability = check_kv_history(recorder.history());
    } else {
        result.linearizability.verdict = Verdict::inconclusive;
        result.linearizability.detail = "not checked";
    }

    for (int i = 0; i < params.large_stage(); ++i) {
        NodeId id{Role::executor, 0, static_cast<std::uint16_t>(i)};
        ExecutorSnapshot snap;
        snap.restarted = restarted_executors.count(id.index) != 0;
        if (auto* e = sim.node_as<Executor>(id)) {
            snap.alive = true;
            snap.next_exec = e->next_exec();
            snap.app_snapshot = e->app().snapshot();
        }
        result.executors[id.index] = std::move(snap);
    }
    result.checkpoint_loads = recorder.checkpoint_loads().size();
    if (config.trace) result.trace = recorder.records();
    return result;
}

std::vector<FaultEvent> random_faults(const ProtocolParams& params, Tick duration,
                                      std::uint64_t seed) {
    std::mt19937_64 rng(seed ^ 0x5bd1e995ULL);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::vector<FaultEvent> faults;
    auto topology = build_topology(params);
    Tick lo = std::min<Tick>(50, duration / 4);
    Tick hi = std::max<Tick>(lo + 1, duration * 3 / 4);
    for (const auto& stage : topology.stages) {
        if (unit(rng) >= 0.25) continue;
        // Crashes within a stage are sequential, so at most one instance
        // (which is <= f for f >= 1) is down at a time.
        if (params.f < 1) continue;
        Tick at = std::uniform_int_distribution<Tick>(lo, hi)(rng);
        int crashes = 1 + static_cast<int>(rng() % 2);
        for (int k = 0; k < crashes && at < duration; ++k) {
            FaultEvent fault;
            bool leader = stage.role == Role::proposer && unit(rng) < 0.5;
            fault.active_proposer = leader;
            fault.partition = stage.partition;
            fault.node = NodeId{stage.role, static_cast<std::uint16_t>(stage.partition),
                                static_cast<std::uint16_t>(rng() % stage.instance_count)};
            fault.at = at;
            bool restart = unit(rng) < 0.7;
            fault.restart_delay = restart ? std::uniform_int_distribution<Tick>(20, 300)(rng) : -1;
            faults.push_back(fault);
            if (!restart) break;
            at += fault.restart_delay + std::uniform_int_distribution<Tick>(1, 200)(rng);
        }
    }
    return faults;
}

ScenarioConfig randomized_config(std::uint64_t seed) {
    std::mt19937_64 rng(seed * 0x2545f4914f6cdd1dULL + 7);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    ScenarioConfig c;
    c.params.f = 1;
    c.params.partitions = 1 + static_cast<int>(rng() % 2);
    c.params.checkpoint_interval = 8 + static_cast<SeqNo>(rng() % 3) * 8;
    c.params.window = c.params.checkpoint_interval * 2;
    c.params.max_batch = 1 + rng() % 3;
    c.params.noop_heartbeat = unit(rng) < 0.5 ? 10 : 0;
    c.network.seed = seed;
    c.network.loss = 0.3 * unit(rng);
    c.network.duplication = 0.05 * unit(rng);
    c.network.gst = std::uniform_int_distribution<Tick>(100, 500)(rng);
    c.network.pre_gst_max_delay = std::uniform_int_distribution<Tick>(3, 40)(rng);
    c.clients = 4;
    c.workload.keys = 6;
    c.duration = 1200;
    c.bucket = 50;
    c.faults = random_faults(c.params, c.duration, seed);
    return c;
}

SweepReport sweep(std::uint64_t first_seed, std::size_t runs,
                  const std::function<ScenarioConfig(std::uint64_t seed)>& make, int threads) {
    SweepReport report;
    std::mutex mu;
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < runs; i = next++) {
            std::uint64_t seed = first_seed + i;
            auto config = make(seed);
            auto result = run_scenario(config);
            std::lock_guard lock(mu);
            ++report.runs;
            report.faults += config.faults.size();
            report.view_changes += static_cast<std::uint64_t>(result.metrics.view_changes);
            report.catch_ups += result.checkpoint_loads;
            report.completed += result.metrics.completed;
            if (result.linearizability.verdict == Verdict::inconclusive) ++report.inconclusive;
            if (result.safe()) continue;
            ++report.failures;
            report.failed_seeds.push_back(seed);
            const auto& a = result.audit;
            if (!a.agreement.passed) ++report.failures_by_check["agreement"];
            if (!a.durability.passed) ++report.failures_by_check["durability"];
            if (!a.exactly_once.passed) ++report.failures_by_check["exactly_once"];
            if (!a.window_bound.passed) ++report.failures_by_check["window_bound"];
            if (!a.protocol.passed) ++report.failures_by_check["protocol"];
            if (result.linearizability.verdict == Verdict::violation)
                ++report.failures_by_check["linearizability"];
        }
    };
    threads = std::max(1, threads);
    std::vector<std::thread> pool;
    for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    std::sort(report.failed_seeds.begin(), report.failed_seeds.end());
    return report;
}

}  // namespace tara
