#include "tara/types.hpp"

#include <array>
#include <charconv>

namespace tara {

namespace {

constexpr std::array<std::string_view, 14> kRoleNames = {
    "request_source", "gc_source", "view_source", "record_source",
    "proposer",       "committer", "executor",    "controller",
    "reply_sink",     "gc_sink",   "view_sink",   "record_sink",
    "client",         "harness",
};

std::optional<std::uint16_t> parse_u16(std::string_view text) {
    std::uint16_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
    return value;
}

}  // namespace

std::string_view role_name(Role role) {
    return kRoleNames.at(static_cast<std::size_t>(role));
}

std::optional<Role> role_from_name(std::string_view name) {
    for (std::size_t i = 0; i < kRoleNames.size(); ++i) {
        if (kRoleNames[i] == name) return static_cast<Role>(i);
    }
    return std::nullopt;
}

bool is_partitioned(Role role) {
    switch (role) {
        case Role::proposer:
        case Role::committer:
        case Role::controller:
        case Role::view_source:
        case Role::view_sink:
        case Role::record_source:
        case Role::record_sink:
        case Role::reply_sink:
            return true;
        default:
            return false;
    }
}

bool is_source(Role role) {
    return role == Role::request_source || role == Role::gc_source ||
           role == Role::view_source || role == Role::record_source;
}

bool is_sink(Role role) {
    return role == Role::reply_sink || role == Role::gc_sink ||
           role == Role::view_sink || role == Role::record_sink;
}

std::string to_string(const NodeId& id) {
    std::string out(role_name(id.role));
    out += ':';
    out += std::to_string(id.partition);
    out += ':';
    out += std::to_string(id.index);
    return out;
}

std::optional<NodeId> parse_node_id(std::string_view text) {
    auto first = text.find(':');
    if (first == std::string_view::npos) return std::nullopt;
    auto second = text.find(':', first + 1);
    if (second == std::string_view::npos) return std::nullopt;
    auto role = role_from_name(text.substr(0, first));
    auto partition = parse_u16(text.substr(first + 1, second - first - 1));
    auto index = parse_u16(text.substr(second + 1));
    if (!role || !partition || !index) return std::nullopt;
    return NodeId{*role, *partition, *index};
}

void ProtocolParams::validate() const {
    if (f < 0) throw config_error("f must be >= 0");
    if (partitions < 1) throw config_error("partition count must be >= 1");
    if (checkpoint_interval < 1) throw config_error("checkpoint interval must be >= 1");
    if (window < 1) throw config_error("window size must be >= 1");
    if (window < checkpoint_interval)
        throw config_error("window size must be at least the checkpoint interval");
    if (max_batch < 1) throw config_error("max batch size must be >= 1");
    if (batch_timeout < 0 || retransmit_timeout < 1 || report_period < 1 ||
        gossip_period < 1 || stall_timeout < 1)
        throw config_error("timer periods must be positive");
    if (proposer_cap < 0) throw config_error("proposer cap must be >= 0");
    if (noop_heartbeat < 0) throw config_error("no-op heartbeat must be >= 0");
}

}  // namespace tara
