#pragma once

// Drives a single node outside the simulator and records what it emits.

#include <string>
#include <vector>

#include "tara/checkpoint.hpp"
#include "tara/simulator.hpp"

namespace tara::testing {

struct Emission {
    Stream stream;
    Tuple tuple;
    Route route;
};

class FakeContext final : public Context {
public:
    explicit FakeContext(NodeId self, ProtocolParams params = {}, bool restarted = false)
        : self_(self), params_(params), restarted_(restarted) {}

    Tick now() const override { return now_; }
    const NodeId& self() const override { return self_; }
    const ProtocolParams& params() const override { return params_; }
    bool restarted() const override { return restarted_; }

    void emit(Stream stream, Tuple tuple, Route route) override {
        emitted.push_back({stream, std::move(tuple), route});
    }
    void set_timer(Tick delay, std::uint64_t timer_id) override {
        timers.emplace_back(now_ + delay, timer_id);
    }

    CheckpointStore& checkpoints() override { return *store_; }
    DurableStore& durable() override { return durable_; }
    Recorder& recorder() override { return recorder_; }

    void set_now(Tick t) { now_ = t; }
    void set_restarted(bool r) { restarted_ = r; }
    void share_store(CheckpointStore& store) { store_ = &store; }

    template <typename T>
    std::vector<T> emitted_of(Stream stream) const {
        std::vector<T> out;
        for (const auto& e : emitted)
            if (e.stream == stream)
                if (const auto* t = std::get_if<T>(&e.tuple)) out.push_back(*t);
        return out;
    }

    std::vector<Emission> emitted;
    std::vector<std::pair<Tick, std::uint64_t>> timers;

private:
    NodeId self_;
    ProtocolParams params_;
    bool restarted_;
    Tick now_ = 0;
    CheckpointStore own_store_;
    CheckpointStore* store_ = &own_store_;
    DurableStore durable_;
    Recorder recorder_;
};

inline Request make_request(SourceId source, std::uint64_t q, ClientId client, std::uint64_t t,
                            Bytes op = "op") {
    return Request{source, q, {Command{CommandId{client, t}, std::move(op)}}};
}

}  // namespace tara::testing
