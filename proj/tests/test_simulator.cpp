#include <doctest.h>

#include <map>

#include "tara/garbage_collection.hpp"
#include "tara/scenario.hpp"
#include "tara/simulator.hpp"

using namespace tara;

namespace {

struct Log {
    std::map<NodeId, int> received;
    std::vector<std::pair<Tick, NodeId>> events;
};

class Probe final : public Node {
public:
    using Hook = std::function<void(Context&)>;
    Probe(Log& log, Hook on_start) : log_(log), on_start_(std::move(on_start)) {}

    void start(Context& ctx) override {
        if (on_start_) on_start_(ctx);
    }
    void on_tuple(Context& ctx, const NodeId&, const Tuple&) override {
        ++log_.received[ctx.self()];
        log_.events.emplace_back(ctx.now(), ctx.self());
    }

private:
    Log& log_;
    Hook on_start_;
};

const NodeId kProposer{Role::proposer, 0, 0};
const NodeId kGcSink{Role::gc_sink, 0, 0};

struct Rig {
    ProtocolParams params;
    NetworkModel network;
    Log log;
    Recorder recorder{true};
    CheckpointStore store;
    std::unique_ptr<Simulator> sim;

    explicit Rig(NetworkModel net, std::function<void(const NodeId&, Context&)> hook = {})
        : network(net) {
        sim = std::make_unique<Simulator>(
            build_topology(params), params, network,
            [this, hook](const NodeId& id) {
                Probe::Hook h;
                if (hook) h = [hook, id](Context& ctx) { hook(id, ctx); };
                return std::make_unique<Probe>(log, h);
            },
            recorder, store);
    }

    int received_by(Role role) const {
        int n = 0;
        for (const auto& [id, count] : log.received)
            if (id.role == role) n += count;
        return n;
    }
};

void propose_once(const NodeId& id, Context& ctx) {
    if (id == kProposer) ctx.emit(Stream::propose, Propose{}, Route::broadcast());
}

}  // namespace

TEST_CASE("broadcast reaches every instance of the target stage") {
    Rig rig(NetworkModel{}, propose_once);
    rig.sim->start();
    rig.sim->run(100);
    CHECK(rig.received_by(Role::committer) == 3);
}

TEST_CASE("total loss before GST drops everything") {
    NetworkModel net;
    net.loss = 1.0;
    net.gst = 1000;
    Rig rig(net, propose_once);
    rig.sim->start();
    rig.sim->run(100);
    CHECK(rig.received_by(Role::committer) == 0);
}

TEST_CASE("loss stops at GST") {
    NetworkModel net;
    net.loss = 1.0;
    net.gst = 0;
    Rig rig(net, propose_once);
    rig.sim->start();
    rig.sim->run(100);
    CHECK(rig.received_by(Role::committer) == 3);
}

TEST_CASE("duplication doubles deliveries") {
    NetworkModel net;
    net.duplication = 1.0;
    Rig rig(net, [](const NodeId& id, Context& ctx) {
        if (id == kProposer)
            ctx.emit(Stream::propose, Propose{}, Route::broadcast());
    });
    rig.sim->start();
    rig.sim->run(100);
    for (int i = 0; i < 3; ++i) CHECK(rig.log.received[NodeId{Role::committer, 0, static_cast<std::uint16_t>(i)}] == 2);
}

TEST_CASE("feedback edges are reliable even under total loss") {
    NetworkModel net;
    net.loss = 1.0;
    net.gst = 1000;
    Rig rig(net, [](const NodeId& id, Context& ctx) {
        if (id == kGcSink) ctx.emit(Stream::gc_feedback, Checkpoint{0, 0}, Route::direct(0, 0));
    });
    rig.sim->start();
    rig.sim->run(100);
    CHECK(rig.received_by(Role::gc_source) == 1);
    REQUIRE(rig.log.events.size() == 1);
    CHECK(rig.log.events[0].first == 1);
}

TEST_CASE("undeclared streams are configuration errors") {
    Rig rig(NetworkModel{}, [](const NodeId& id, Context& ctx) {
        if (id == kProposer) ctx.emit(Stream::commit, Commit{}, Route::broadcast());
    });
    CHECK_THROWS_AS(rig.sim->start(), topology_error);
}

TEST_CASE("until=0 processes only tick-0 events") {
    Rig rig(NetworkModel{}, propose_once);
    rig.sim->start();
    rig.sim->run(0);
    CHECK(rig.log.events.empty());
    CHECK(rig.sim->now() == 0);
}

TEST_CASE("a crashed node receives nothing and in-flight tuples die with it") {
    Rig rig(NetworkModel{}, propose_once);
    NodeId victim{Role::committer, 0, 1};
    rig.sim->crash_node(victim, 0);
    rig.sim->restart_node(victim, 50);
    rig.sim->start();
    rig.sim->run(100);
    CHECK(rig.log.received[victim] == 0);
    CHECK(rig.sim->alive(victim));
    CHECK(rig.received_by(Role::committer) == 2);
}

TEST_CASE("blocked links drop traffic for the block interval") {
    NetworkModel net;
    NodeId blocked{Role::committer, 0, 2};
    net.blocks.push_back({0, 10, kProposer, blocked});
    Rig rig(net, propose_once);
    rig.sim->start();
    rig.sim->run(100);
    CHECK(rig.log.received[blocked] == 0);
    CHECK(rig.received_by(Role::committer) == 2);
}

TEST_CASE("network model validation") {
    NetworkModel net;
    net.loss = 1.5;
    CHECK_THROWS_AS(net.validate(), config_error);
    net = NetworkModel{};
    net.min_delay = 0;
    CHECK_THROWS_AS(net.validate(), config_error);
    net = NetworkModel{};
    net.max_delay = 0;
    CHECK_THROWS_AS(net.validate(), config_error);
}

TEST_CASE("same seed, same trace") {
    ScenarioConfig config;
    config.duration = 600;
    config.trace = true;
    config.network.loss = 0.2;
    config.network.gst = 300;
    config.network.pre_gst_max_delay = 20;
    config.faults.push_back(FaultEvent{NodeId{Role::committer, 0, 1}, false, 0, 200, 100});
    auto a = run_scenario(config);
    auto b = run_scenario(config);
    REQUIRE_FALSE(a.trace.empty());
    CHECK(a.trace == b.trace);
    CHECK(a.metrics.throughput == b.metrics.throughput);
    CHECK(a.metrics.latencies == b.metrics.latencies);

    config.network.seed = 2;
    auto c = run_scenario(config);
    CHECK(c.trace != a.trace);
}

TEST_CASE("trace records survive formatting") {
    ScenarioConfig config;
    config.duration = 200;
    config.trace = true;
    auto result = run_scenario(config);
    for (const auto& r : result.trace) {
        auto back = parse_trace_record(format_trace_record(r));
        REQUIRE(back.has_value());
        CHECK(*back == r);
    }
}
