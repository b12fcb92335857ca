#pragma once

// Failure detection and view changes. Controllers compare Target (highest
// request number handed to the partition per source) with Actual (highest
// request number each executor has run) and, once f+1 executors stall,
// propose the next view. View sources announce the adopted view; record
// sources forward committer records to the new proposer.

#include <map>
#include <optional>
#include <vector>

#include "tara/quorum.hpp"
#include "tara/simulator.hpp"

namespace tara {

class Controller final : public Node {
public:
    Controller(const NodeId& id, const ProtocolParams& params);

    void start(Context& ctx) override;
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
    void on_timer(Context& ctx, std::uint64_t timer_id) override;

    void on_target(Tick now, const Target& target);
    void on_actual(Tick now, const Actual& actual);
    void on_view(Tick now, std::uint16_t source, ViewNo view);
    // Re-evaluates the stall detector at `now`. Returns the view to announce
    // when f+1 executors have made no progress for stall_timeout ticks while
    // behind the targets.
    std::optional<ViewNo> evaluate(Tick now);

    ViewNo local_view() const { return local_; }
    ViewNo adopted_view() const { return views_.adopted(); }
    int stalled(Tick now) const;

private:
    bool behind(std::uint16_t executor) const;
    void announce(Context& ctx);

    NodeId id_;
    ProtocolParams params_;
    QuorumTracker<std::uint16_t, ViewNo> views_;
    ViewNo local_ = 0;
    bool waiting_for_views_ = false;
    std::map<SourceId, std::pair<std::uint64_t, Tick>> targets_;  // latest target, received at
    Tick now_ = 0;
    std::map<std::uint16_t, std::map<SourceId, std::uint64_t>> actuals_;
    std::vector<Tick> since_;  // last tick each executor was caught up or progressed
};

class ViewSource final : public Node {
public:
    void start(Context& ctx) override;
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
    void on_timer(Context& ctx, std::uint64_t timer_id) override;

    ViewNo view() const { return view_; }

private:
    void announce(Context& ctx);
    ViewNo view_ = 0;
};

class RecordSource final : public Node {
public:
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
};

}  // namespace tara
