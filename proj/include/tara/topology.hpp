#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "tara/types.hpp"

namespace tara {

enum class Stream : std::uint8_t {
    submit,           // client -> request source queue
    request,          // request source -> proposers of one partition
    target,           // request source -> controllers of one partition
    propose,          // proposer -> committers
    commit,           // committer -> executors
    reply,            // executor -> reply sink
    completion,       // reply sink -> request source queue
    client_reply,     // reply sink -> client
    checkpoint,       // executor -> gc sinks
    gc_feedback,      // gc sink -> gc source queue
    stable,           // gc source -> proposers, committers, executors
    actual,           // executor -> controllers of one partition
    view,             // controller -> view sinks
    view_feedback,    // view sink -> view source queue
    view_announce,    // view source -> proposers, committers, executors, controllers
    record,           // committer -> record sinks
    record_feedback,  // record sink -> record source queue
    record_forward,   // record source -> active proposer
};

std::string_view stream_name(Stream stream);

enum class RoutingMode : std::uint8_t {
    broadcast,  // every instance of the target stages in the sender's scope
    direct,     // one named instance
    partition,  // every instance of one chosen partition's stages
};

struct StageSpec {
    std::string name;
    Role role = Role::harness;
    int partition = 0;  // 0 for shared stages
    int instance_count = 0;
    std::vector<int> servers;  // logical server per instance
};

struct RouteSpec {
    Stream stream;
    std::string from_stage;
    std::string to_stage;
    RoutingMode mode;
    // Sink -> source queue edge that reinserts tuples into the graph.
    bool feedback = false;
};

class topology_error : public config_error {
public:
    using config_error::config_error;
};

struct Topology {
    std::vector<StageSpec> stages;
    std::vector<RouteSpec> routes;
    int partition_count = 1;

    const StageSpec* find_stage(std::string_view name) const;
    const StageSpec* stage_of(Role role, int partition) const;

    // Checks instance counts, stage/route references, placement, the
    // sink->source rule for feedback edges and acyclicity of processing edges.
    // Throws topology_error.
    void validate() const;

    // Every node instance, in deterministic order.
    std::vector<NodeId> nodes() const;
};

// Replica count for a role under the given fault threshold.
int instances_for(Role role, int f);

std::string stage_name(Role role, int partition);

Topology build_topology(const ProtocolParams& params);

}  // namespace tara
