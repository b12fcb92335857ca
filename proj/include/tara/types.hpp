#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace tara {

using Tick = std::int64_t;
using SeqNo = std::int64_t;
using ViewNo = std::int64_t;
using ClientId = std::uint32_t;
using SourceId = std::uint32_t;
using Bytes = std::string;

inline constexpr Tick kNever = std::numeric_limits<Tick>::max();

// The twelve protocol roles plus the two actors that live outside the graph.
enum class Role : std::uint8_t {
    request_source,
    gc_source,
    view_source,
    record_source,
    proposer,
    committer,
    executor,
    controller,
    reply_sink,
    gc_sink,
    view_sink,
    record_sink,
    client,
    harness,
};

inline constexpr int kStageRoleCount = 12;

std::string_view role_name(Role role);
std::optional<Role> role_from_name(std::string_view name);

// Stages owned by a single partition; the rest are shared by all partitions.
bool is_partitioned(Role role);
bool is_source(Role role);
bool is_sink(Role role);

struct NodeId {
    Role role = Role::harness;
    std::uint16_t partition = 0;
    std::uint16_t index = 0;

    auto operator<=>(const NodeId&) const = default;
};

// "committer:0:2" (role:partition:index)
std::string to_string(const NodeId& id);
std::optional<NodeId> parse_node_id(std::string_view text);

class config_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Protocol constants shared by every node of one deployment.
struct ProtocolParams {
    int f = 1;
    int partitions = 1;
    SeqNo checkpoint_interval = 100;
    SeqNo window = 128;
    std::size_t max_batch = 1;
    Tick batch_timeout = 2;
    Tick retransmit_timeout = 50;
    Tick report_period = 5;
    Tick gossip_period = 20;
    Tick stall_timeout = 80;
    int proposer_cap = 0;       // proposals per tick, 0 = unthrottled
    Tick noop_heartbeat = 0;    // idle filler period, 0 = off

    int quorum() const { return f + 1; }
    int small_stage() const { return f + 1; }
    int large_stage() const { return 2 * f + 1; }

    void validate() const;
};

}  // namespace tara
