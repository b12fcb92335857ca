#pragma once

// Agreement pipeline: request sources number client commands, the active
// proposer of a view assigns sequence numbers, committers attest them.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <vector>

#include "tara/quorum.hpp"
#include "tara/simulator.hpp"
#include "tara/window.hpp"

namespace tara {

class RequestSource final : public Node {
public:
    explicit RequestSource(const ProtocolParams& params);

    void start(Context& ctx) override;
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
    void on_timer(Context& ctx, std::uint64_t timer_id) override;

    // Wraps (or buffers) a client command. Returns the request it emitted.
    std::optional<Request> on_command(Context& ctx, const Command& command);
    // Flushes the batch buffer as one request.
    std::optional<Request> flush(Context& ctx);
    // Completion feedback from the reply sink of this source.
    void on_completion(const Reply& reply);
    Target target_for(int partition) const;

    std::uint64_t next_request_number() const { return next_q_; }
    std::size_t buffered() const { return batch_.size(); }
    std::size_t unacknowledged() const { return pending_.size(); }
    bool pending(std::uint64_t q) const { return pending_.count(q) != 0; }

private:
    struct Pending {
        Request request;
        int partition = 0;
        std::set<std::uint16_t> completions;
    };

    void send(Context& ctx, const Pending& pending);

    ProtocolParams params_;
    SourceId self_ = 0;
    std::uint64_t next_q_ = 1;
    std::vector<Command> batch_;
    bool batch_timer_armed_ = false;
    std::uint64_t batch_epoch_ = 0;
    std::map<std::uint64_t, Pending> pending_;
    std::vector<std::uint64_t> highest_per_partition_;
};

class Proposer final : public Node {
public:
    Proposer(const NodeId& id, const ProtocolParams& params);

    void start(Context& ctx) override;
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
    void on_timer(Context& ctx, std::uint64_t timer_id) override;
    std::size_t slot_count() const override { return window_.occupied(); }

    void on_request(Context& ctx, const Request& request);
    void on_stable(Context& ctx, std::uint16_t source, SeqNo threshold);
    void on_view(Context& ctx, std::uint16_t source, ViewNo view);
    void on_record(Context& ctx, const RecordTuple& record);

    // Takes over view `view` from at least f+1 committer records: re-proposes
    // the highest-view request of every covered sequence number and fills
    // uncovered gaps with pending requests or no-ops.
    void enter_view(Context& ctx, ViewNo view, const std::vector<RecordTuple>& records);

    // p = v % (f+1), unless this instance restarted after leading `view`.
    bool active() const;
    // Active and done with view entry, i.e. allowed to propose.
    bool leading() const { return active() && entered_; }
    ViewNo view() const { return view_; }
    SeqNo next_sequence() const { return next_seq_; }
    SeqNo floor() const { return window_.floor(); }
    std::size_t queued() const { return pending_.size(); }

private:
    void propose(Context& ctx, SeqNo s, const Request& request, bool fresh);
    void drain(Context& ctx);
    bool has_budget(Context& ctx);
    void advance_floor(SeqNo local);
    void try_enter(Context& ctx);

    NodeId id_;
    ProtocolParams params_;
    QuorumTracker<std::uint16_t, ViewNo> views_;
    QuorumTracker<std::uint16_t, SeqNo> stable_;
    ViewNo view_ = 0;
    ViewNo min_active_view_ = 0;
    bool entered_ = false;
    SeqNo next_seq_ = 0;
    ConsensusWindow<Request> window_;
    std::map<std::pair<SourceId, std::uint64_t>, SeqNo> assigned_;
    std::deque<Request> pending_;
    std::set<std::pair<SourceId, std::uint64_t>> queued_;
    std::map<ViewNo, std::map<std::uint16_t, RecordTuple>> records_;
    Tick budget_tick_ = -1;
    int budget_used_ = 0;
    bool drain_armed_ = false;
    Tick last_proposal_ = 0;
};

class Committer final : public Node {
public:
    Committer(const NodeId& id, const ProtocolParams& params);

    void start(Context& ctx) override;
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
    std::size_t slot_count() const override { return window_.occupied(); }

    // Returns the Commit it emitted, if the proposal was accepted.
    std::optional<Commit> on_propose(Context& ctx, const Propose& propose);
    // Switches to a higher view and emits the record set. Stale views are ignored.
    std::optional<RecordTuple> on_new_view(Context& ctx, ViewNo view);
    void on_view(Context& ctx, std::uint16_t source, ViewNo view);
    void on_stable(Context& ctx, std::uint16_t source, SeqNo threshold);

    ViewNo view() const { return view_; }
    const ConsensusWindow<SlotRecord>& window() const { return window_; }

private:
    RecordTuple make_record() const;
    void persist_slot(Context& ctx, const SlotRecord& record);

    NodeId id_;
    ProtocolParams params_;
    QuorumTracker<std::uint16_t, ViewNo> views_;
    QuorumTracker<std::uint16_t, SeqNo> stable_;
    ViewNo view_ = 0;
    ConsensusWindow<SlotRecord> window_;
    bool proposal_seen_ = false;
    Tick last_record_ = -1;
};

}  // namespace tara
