#include <doctest.h>

#include <set>

#include "tara/topology.hpp"

using namespace tara;

namespace {

ProtocolParams params(int f, int partitions) {
    ProtocolParams p;
    p.f = f;
    p.partitions = partitions;
    return p;
}

// Replica counts per role, written out per fault threshold.
int expected_instances(Role role, int f) {
    switch (role) {
        case Role::request_source:
        case Role::proposer:
        case Role::controller:
        case Role::reply_sink:
            return f + 1;
        default:
            return 2 * f + 1;
    }
}

}  // namespace

TEST_CASE("stage sizes follow the replica table") {
    for (int f = 0; f <= 3; ++f) {
        for (int partitions = 1; partitions <= 3; ++partitions) {
            auto topo = build_topology(params(f, partitions));
            CHECK_NOTHROW(topo.validate());
            for (const auto& stage : topo.stages) {
                CAPTURE(stage.name);
                CHECK(stage.instance_count == expected_instances(stage.role, f));
                std::set<int> servers(stage.servers.begin(), stage.servers.end());
                CHECK(servers.size() == stage.servers.size());
            }
        }
    }
}

TEST_CASE("f=1 P=1 has a committer stage of three") {
    auto topo = build_topology(params(1, 1));
    const auto* committer = topo.stage_of(Role::committer, 0);
    REQUIRE(committer != nullptr);
    CHECK(committer->instance_count == 3);
}

TEST_CASE("f=0 gives one instance everywhere") {
    for (const auto& stage : build_topology(params(0, 1)).stages) CHECK(stage.instance_count == 1);
}

TEST_CASE("f=1 P=2 layout") {
    auto topo = build_topology(params(1, 2));
    int proposer_stages = 0;
    int gc_source_stages = 0;
    for (const auto& stage : topo.stages) {
        if (stage.role == Role::proposer) {
            ++proposer_stages;
            CHECK(stage.instance_count == 2);
        }
        if (stage.role == Role::gc_source) {
            ++gc_source_stages;
            CHECK(stage.instance_count == 3);
        }
    }
    CHECK(proposer_stages == 2);
    CHECK(gc_source_stages == 1);
    CHECK(topo.find_stage("proposer/p1") != nullptr);
    CHECK(topo.find_stage("executor") != nullptr);
    CHECK(topo.find_stage("executor/p0") == nullptr);
    // 4 shared stages + 8 per partition.
    CHECK(topo.stages.size() == 4 + 8 * 2);
}

TEST_CASE("feedback edges run sink to source only") {
    auto topo = build_topology(params(1, 2));
    for (const auto& route : topo.routes) {
        const auto* from = topo.find_stage(route.from_stage);
        const auto* to = topo.find_stage(route.to_stage);
        REQUIRE(from != nullptr);
        REQUIRE(to != nullptr);
        if (route.feedback) {
            CHECK(is_sink(from->role));
            CHECK(is_source(to->role));
        } else {
            CHECK_FALSE(is_sink(from->role));
            CHECK_FALSE(is_source(to->role));
        }
    }
}

TEST_CASE("validation rejects broken graphs") {
    auto base = build_topology(params(1, 1));

    SUBCASE("processing cycle") {
        auto t = base;
        t.routes.push_back({Stream::commit, "executor", "proposer/p0", RoutingMode::broadcast, false});
        CHECK_THROWS_AS(t.validate(), topology_error);
    }
    SUBCASE("feedback edge not from a sink") {
        auto t = base;
        t.routes.push_back({Stream::gc_feedback, "executor", "gc_source", RoutingMode::broadcast, true});
        CHECK_THROWS_AS(t.validate(), topology_error);
    }
    SUBCASE("unknown stage") {
        auto t = base;
        t.routes.push_back({Stream::commit, "committer/p0", "nowhere", RoutingMode::broadcast, false});
        CHECK_THROWS_AS(t.validate(), topology_error);
    }
    SUBCASE("duplicate stage name") {
        auto t = base;
        t.stages.push_back(t.stages.front());
        CHECK_THROWS_AS(t.validate(), topology_error);
    }
    SUBCASE("replicas sharing a server") {
        auto t = base;
        t.stages.front().servers.assign(t.stages.front().servers.size(), 0);
        CHECK_THROWS_AS(t.validate(), topology_error);
    }
    SUBCASE("zero instances") {
        auto t = base;
        t.stages.front().instance_count = 0;
        t.stages.front().servers.clear();
        CHECK_THROWS_AS(t.validate(), topology_error);
    }
}

TEST_CASE("node ids print and parse") {
    NodeId id{Role::committer, 1, 2};
    CHECK(to_string(id) == "committer:1:2");
    auto back = parse_node_id("committer:1:2");
    REQUIRE(back.has_value());
    CHECK(*back == id);
    CHECK_FALSE(parse_node_id("committer:1").has_value());
    CHECK_FALSE(parse_node_id("bogus:0:0").has_value());
}
