#pragma once

#include <map>
#include <set>

#include "tara/checkpoint.hpp"
#include "tara/simulator.hpp"

namespace tara {

// s_stable as the (f+1)-highest entry of S_cp, or `fallback` while fewer
// than f+1 executors have reported.
SeqNo stability_threshold(const std::map<std::uint16_t, SeqNo>& checkpoints, int f,
                          SeqNo fallback = 0);

// S_cp with an incrementally maintained (f+1)-highest element.
class StabilityVector {
public:
    explicit StabilityVector(int f) : rank_(static_cast<std::size_t>(f) + 1) {}

    // Raises the entry of `executor` to `sequence` (lower values are ignored).
    // Returns true when the threshold increased.
    bool report(std::uint16_t executor, SeqNo sequence);

    SeqNo threshold() const { return threshold_; }
    const std::map<std::uint16_t, SeqNo>& entries() const { return entries_; }

private:
    std::size_t rank_;
    std::map<std::uint16_t, SeqNo> entries_;
    std::multiset<SeqNo, std::greater<SeqNo>> sorted_;
    SeqNo threshold_ = 0;
};

// Collects Checkpoint tuples from its sink queue and announces the
// stability threshold to proposers, committers and executors.
class GcSource final : public Node {
public:
    explicit GcSource(int f) : vector_(f) {}

    void start(Context& ctx) override;
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
    void on_timer(Context& ctx, std::uint64_t timer_id) override;

    SeqNo threshold() const { return vector_.threshold(); }

private:
    void announce(Context& ctx);
    StabilityVector vector_;
};

// Sinks hand every tuple to the source bound to the same queue.
class FeedbackSink final : public Node {
public:
    FeedbackSink(Stream feedback, bool partitioned) : feedback_(feedback), partitioned_(partitioned) {}

    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;

private:
    Stream feedback_;
    bool partitioned_;
};

}  // namespace tara
