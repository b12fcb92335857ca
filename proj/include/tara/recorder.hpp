#pragma once

// Observation log of a simulation run. Nodes report protocol-level facts
// (proposals, commits, executions, client invocations) here; the safety
// audits run over this data, and the same facts can be written to and read
// back from the textual trace so that a stored trace can be re-audited.

#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tara/messages.hpp"
#include "tara/types.hpp"

namespace tara {

struct TraceRecord {
    Tick tick = 0;
    std::string kind;
    std::string node;
    std::uint64_t digest = 0;
    std::string detail;

    bool operator==(const TraceRecord&) const = default;
};

// tick \t kind \t node \t digest(hex) \t detail
std::string format_trace_record(const TraceRecord& record);
std::optional<TraceRecord> parse_trace_record(std::string_view line);

struct AppliedCommand {
    CommandId id;
    Bytes result;

    bool operator==(const AppliedCommand&) const = default;
};

struct ExecutionEntry {
    std::uint64_t request_digest = 0;
    std::vector<AppliedCommand> applied;
};

struct HistoryEntry {
    CommandId id;
    Bytes op;
    Tick invoked = 0;
    std::optional<Tick> completed;
    Bytes result;
};

class Recorder {
public:
    explicit Recorder(bool keep_trace = false) : keep_trace_(keep_trace) {}

    bool tracing() const { return keep_trace_; }
    void trace(Tick tick, std::string_view kind, const NodeId& node, std::uint64_t digest,
               std::string detail = {});
    const std::vector<TraceRecord>& records() const { return records_; }

    void proposed(Tick tick, const NodeId& node, int partition, SeqNo s, ViewNo v,
                  std::uint64_t request_digest);
    void committed(Tick tick, const NodeId& node, int partition, SeqNo s, ViewNo v,
                   std::uint64_t request_digest);
    void executed(Tick tick, const NodeId& node, SeqNo position, std::uint64_t request_digest,
                  std::vector<AppliedCommand> applied);
    void checkpoint_written(Tick tick, const NodeId& node, SeqNo s);
    void checkpoint_loaded(Tick tick, const NodeId& node, SeqNo s);
    void view_announced(Tick tick, const NodeId& node, int partition, ViewNo v);
    void window_sample(const NodeId& node, std::size_t slots);
    void client_invoked(Tick tick, const CommandId& id, const Bytes& op);
    void client_completed(Tick tick, const CommandId& id, const Bytes& result);
    void violation(Tick tick, const NodeId& node, std::string what);

    // Emits one window record per node carrying its maximum slot count, so
    // that a stored trace also carries the memory bound observations.
    void flush_window_records(Tick tick);

    // Rebuilds the observation state from trace records.
    static Recorder replay(const std::vector<TraceRecord>& records);

    using SlotKey = std::pair<int, SeqNo>;                 // (partition, s)
    using VoteKey = std::pair<ViewNo, std::uint64_t>;      // (view, request digest)

    const std::map<SlotKey, std::map<ViewNo, std::set<std::uint64_t>>>& proposals() const {
        return proposals_;
    }
    const std::map<SlotKey, std::map<VoteKey, std::set<int>>>& commit_votes() const {
        return commit_votes_;
    }
    const std::map<int, std::map<SeqNo, ExecutionEntry>>& exec_logs() const { return exec_logs_; }
    const std::map<CommandId, HistoryEntry>& history() const { return history_; }
    const std::map<NodeId, std::size_t>& window_max() const { return window_max_; }
    const std::vector<Tick>& first_execution_ticks() const { return first_exec_ticks_; }
    const std::map<CommandId, Bytes>& first_results() const { return first_results_; }
    const std::vector<std::string>& violations() const { return violations_; }
    const std::vector<std::pair<int, SeqNo>>& checkpoint_loads() const { return loads_; }
    std::size_t checkpoints_written() const { return checkpoints_written_; }
    ViewNo max_view_announced() const { return max_view_; }
    std::size_t view_announcements() const { return view_announcements_.size(); }

private:
    bool keep_trace_;
    std::vector<TraceRecord> records_;

    std::map<SlotKey, std::map<ViewNo, std::set<std::uint64_t>>> proposals_;
    std::map<SlotKey, std::map<VoteKey, std::set<int>>> commit_votes_;
    std::map<int, std::map<SeqNo, ExecutionEntry>> exec_logs_;
    std::map<CommandId, HistoryEntry> history_;
    std::map<NodeId, std::size_t> window_max_;
    std::vector<Tick> first_exec_ticks_;
    std::map<CommandId, Bytes> first_results_;
    std::vector<std::string> violations_;
    std::vector<std::pair<int, SeqNo>> loads_;
    std::size_t checkpoints_written_ = 0;
    ViewNo max_view_ = 0;
    std::set<std::pair<int, ViewNo>> view_announcements_;
};

struct AuditCheck {
    bool passed = true;
    std::string detail;
};

struct SafetyAudit {
    AuditCheck agreement;      // executors agree on every execution position
    AuditCheck durability;     // committed requests survive view changes
    AuditCheck exactly_once;   // one application per command, replies match
    AuditCheck window_bound;   // slot counts never exceed W
    AuditCheck protocol;       // assertions raised inside nodes

    bool passed() const {
        return agreement.passed && durability.passed && exactly_once.passed &&
               window_bound.passed && protocol.passed;
    }
};

SafetyAudit run_audits(const Recorder& recorder, const ProtocolParams& params);
void print_audit(std::ostream& out, const SafetyAudit& audit);

}  // namespace tara
