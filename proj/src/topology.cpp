#include "tara/topology.hpp"

#include <array>
#include <functional>
#include <set>

namespace tara {

namespace {

constexpr std::array<std::string_view, 18> kStreamNames = {
    "submit",     "request",     "target",        "propose",         "commit",
    "reply",      "completion",  "client_reply",  "checkpoint",      "gc_feedback",
    "stable",     "actual",      "view",          "view_feedback",   "view_announce",
    "record",     "record_feedback", "record_forward",
};

}  // namespace

std::string_view stream_name(Stream stream) {
    return kStreamNames.at(static_cast<std::size_t>(stream));
}

int instances_for(Role role, int f) {
    switch (role) {
        case Role::request_source:
        case Role::proposer:
        case Role::controller:
        case Role::reply_sink:
            return f + 1;
        case Role::gc_source:
        case Role::view_source:
        case Role::record_source:
        case Role::committer:
        case Role::executor:
        case Role::gc_sink:
        case Role::view_sink:
        case Role::record_sink:
            return 2 * f + 1;
        default:
            return 0;
    }
}

std::string stage_name(Role role, int partition) {
    std::string name(role_name(role));
    if (is_partitioned(role)) name += "/p" + std::to_string(partition);
    return name;
}

const StageSpec* Topology::find_stage(std::string_view name) const {
    for (const auto& stage : stages) {
        if (stage.name == name) return &stage;
    }
    return nullptr;
}

const StageSpec* Topology::stage_of(Role role, int partition) const {
    return find_stage(stage_name(role, is_partitioned(role) ? partition : 0));
}

void Topology::validate() const {
    if (partition_count < 1) throw topology_error("partition count must be >= 1");
    std::set<std::string> names;
    for (const auto& stage : stages) {
        if (!names.insert(stage.name).second)
            throw topology_error("duplicate stage name: " + stage.name);
        if (stage.instance_count <= 0)
            throw topology_error("stage " + stage.name + " has no instances");
        if (static_cast<int>(stage.servers.size()) != stage.instance_count)
            throw topology_error("stage " + stage.name + " has incomplete placement");
        std::set<int> servers(stage.servers.begin(), stage.servers.end());
        if (static_cast<int>(servers.size()) != stage.instance_count)
            throw topology_error("replicas of stage " + stage.name + " share a server");
    }

    std::map<std::string, std::vector<std::string>> edges;
    for (const auto& route : routes) {
        const auto* from = find_stage(route.from_stage);
        const auto* to = find_stage(route.to_stage);
        if (from == nullptr || to == nullptr)
            throw topology_error("route " + std::string(stream_name(route.stream)) +
                                 " references an unknown stage");
        if (route.feedback) {
            if (!is_sink(from->role) || !is_source(to->role))
                throw topology_error("feedback edge " + route.from_stage + " -> " +
                                     route.to_stage + " is not sink -> source");
            continue;
        }
        if (is_sink(from->role))
            throw topology_error("sink " + route.from_stage + " has a processing edge");
        if (is_source(to->role))
            throw topology_error("source " + route.to_stage + " has a processing input");
        edges[route.from_stage].push_back(route.to_stage);
    }

    // 0 = unvisited, 1 = on stack, 2 = done
    std::map<std::string, int> state;
    std::function<void(const std::string&)> visit = [&](const std::string& node) {
        state[node] = 1;
        for (const auto& next : edges[node]) {
            if (state[next] == 1)
                throw topology_error("processing edges form a cycle through " + next);
            if (state[next] == 0) visit(next);
        }
        state[node] = 2;
    };
    for (const auto& stage : stages) {
        if (state[stage.name] == 0) visit(stage.name);
    }
}

std::vector<NodeId> Topology::nodes() const {
    std::vector<NodeId> out;
    for (const auto& stage : stages) {
        for (int i = 0; i < stage.instance_count; ++i) {
            out.push_back(NodeId{stage.role, static_cast<std::uint16_t>(stage.partition),
                                 static_cast<std::uint16_t>(i)});
        }
    }
    return out;
}

Topology build_topology(const ProtocolParams& params) {
    if (params.f < 0) throw topology_error("f must be >= 0");
    if (params.partitions < 1) throw topology_error("partition count must be >= 1");

    Topology topo;
    topo.partition_count = params.partitions;

    auto add_stage = [&](Role role, int partition) {
        StageSpec stage;
        stage.name = stage_name(role, partition);
        stage.role = role;
        stage.partition = partition;
        stage.instance_count = instances_for(role, params.f);
        for (int i = 0; i < stage.instance_count; ++i) stage.servers.push_back(i);
        topo.stages.push_back(std::move(stage));
    };

    for (Role role : {Role::request_source, Role::gc_source, Role::executor, Role::gc_sink})
        add_stage(role, 0);
    for (int p = 0; p < params.partitions; ++p) {
        for (Role role : {Role::proposer, Role::committer, Role::controller, Role::view_source,
                          Role::view_sink, Role::record_source, Role::record_sink,
                          Role::reply_sink})
            add_stage(role, p);
    }

    auto route = [&](Stream stream, Role from, int from_p, Role to, int to_p, RoutingMode mode,
                     bool feedback = false) {
        topo.routes.push_back(
            RouteSpec{stream, stage_name(from, from_p), stage_name(to, to_p), mode, feedback});
    };

    using M = RoutingMode;
    route(Stream::checkpoint, Role::executor, 0, Role::gc_sink, 0, M::broadcast);
    route(Stream::gc_feedback, Role::gc_sink, 0, Role::gc_source, 0, M::direct, true);
    route(Stream::stable, Role::gc_source, 0, Role::executor, 0, M::broadcast);
    for (int p = 0; p < params.partitions; ++p) {
        route(Stream::request, Role::request_source, 0, Role::proposer, p, M::partition);
        route(Stream::target, Role::request_source, 0, Role::controller, p, M::partition);
        route(Stream::propose, Role::proposer, p, Role::committer, p, M::broadcast);
        route(Stream::commit, Role::committer, p, Role::executor, 0, M::broadcast);
        route(Stream::reply, Role::executor, 0, Role::reply_sink, p, M::direct);
        route(Stream::completion, Role::reply_sink, p, Role::request_source, 0, M::direct, true);
        route(Stream::stable, Role::gc_source, 0, Role::proposer, p, M::broadcast);
        route(Stream::stable, Role::gc_source, 0, Role::committer, p, M::broadcast);
        route(Stream::actual, Role::executor, 0, Role::controller, p, M::partition);
        route(Stream::view, Role::controller, p, Role::view_sink, p, M::broadcast);
        route(Stream::view_feedback, Role::view_sink, p, Role::view_source, p, M::direct, true);
        for (Role to : {Role::proposer, Role::committer, Role::controller})
            route(Stream::view_announce, Role::view_source, p, to, p, M::broadcast);
        route(Stream::view_announce, Role::view_source, p, Role::executor, 0, M::broadcast);
        route(Stream::record, Role::committer, p, Role::record_sink, p, M::broadcast);
        route(Stream::record_feedback, Role::record_sink, p, Role::record_source, p, M::direct,
              true);
        route(Stream::record_forward, Role::record_source, p, Role::proposer, p, M::direct);
    }

    topo.validate();
    return topo;
}

}  // namespace tara
