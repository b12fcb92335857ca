#pragma once

// Closed-loop clients: one outstanding command at a time, retried on a
// different front end after a timeout with the same command id.

#include <optional>
#include <random>

#include "tara/simulator.hpp"

namespace tara {

struct Workload {
    int keys = 16;
    double read_ratio = 0.5;
    double delete_ratio = 0.05;
    Tick think_time = 0;
    Tick timeout = 100;
    Tick stop_at = kNever;         // no new commands from this tick on
    std::uint64_t max_commands = 0;  // 0 = unbounded
};

class Client final : public Node {
public:
    Client(ClientId id, int front_ends, Workload workload, std::uint64_t seed);

    void start(Context& ctx) override;
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
    void on_timer(Context& ctx, std::uint64_t timer_id) override;

    std::uint64_t completed() const { return completed_; }
    std::uint64_t retries() const { return retries_; }
    bool outstanding() const { return outstanding_.has_value(); }

private:
    Bytes next_op();
    void submit(Context& ctx);
    void send(Context& ctx);

    ClientId id_;
    int front_ends_;
    Workload workload_;
    std::mt19937_64 rng_;
    std::uint64_t next_t_ = 1;
    int front_end_;
    std::optional<Command> outstanding_;
    std::uint64_t completed_ = 0;
    std::uint64_t retries_ = 0;
};

}  // namespace tara
