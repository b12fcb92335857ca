#pragma once

// Executors apply committed requests in merged sequence order, deduplicate
// client commands, checkpoint their state and catch up from stored blobs.

#include <functional>
#include <map>
#include <memory>
#include <vector>

#include "tara/checkpoint.hpp"
#include "tara/partitioning.hpp"
#include "tara/quorum.hpp"
#include "tara/simulator.hpp"
#include "tara/window.hpp"

namespace tara {

// The replicated service. apply must be deterministic.
class ServiceApplication {
public:
    virtual ~ServiceApplication() = default;

    virtual Bytes apply(std::string_view op) = 0;
    virtual Bytes snapshot() const = 0;
    virtual void restore(std::string_view snapshot) = 0;
};

using AppFactory = std::function<std::unique_ptr<ServiceApplication>()>;

struct ExecutorState {
    std::map<ClientId, std::uint64_t> executed;  // T_exec
    std::map<ClientId, std::pair<std::uint64_t, Bytes>> result_cache;
    std::map<std::pair<std::uint16_t, SourceId>, std::uint64_t> agreed;
    SeqNo next_exec = 0;
    SeqNo last_checkpoint = -1;
    std::uint64_t app_invocations = 0;
};

class Executor final : public Node {
public:
    Executor(const NodeId& id, const ProtocolParams& params,
             std::unique_ptr<ServiceApplication> app);

    void start(Context& ctx) override;
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
    void on_timer(Context& ctx, std::uint64_t timer_id) override;
    std::size_t slot_count() const override;

    void on_commit(Context& ctx, const Commit& commit);
    void on_stable(Context& ctx, std::uint16_t source, SeqNo threshold);
    void on_view(Context& ctx, std::uint16_t source, int partition, ViewNo view);

    // Runs one committed request at the current merged position and returns
    // the reply it emitted (none for a no-op).
    std::optional<Reply> execute_request(Context& ctx, int partition, const Request& request);
    // Writes a checkpoint if the next position is a multiple of CP.
    bool maybe_checkpoint(Context& ctx);
    // Loads the checkpoint stored for `threshold`. False if none is stored yet.
    bool catch_up(Context& ctx, SeqNo threshold);

    Actual actual_for(int partition) const;
    const ExecutorState& state() const { return state_; }
    const ServiceApplication& app() const { return *app_; }
    SeqNo next_exec() const { return state_.next_exec; }
    ViewNo view(int partition) const { return views_[static_cast<std::size_t>(partition)].adopted(); }
    bool waiting_for_catch_up() const { return awaiting_catch_up_; }

private:
    struct Vote {
        ViewNo view = 0;
        Request request;
    };
    using Tally = std::map<std::uint16_t, Vote>;

    void try_execute(Context& ctx);
    void apply_threshold(Context& ctx, SeqNo threshold);
    const Request* decided(int partition, const Tally& tally) const;
    CheckpointBlob make_blob(SeqNo sequence) const;

    NodeId id_;
    ProtocolParams params_;
    std::unique_ptr<ServiceApplication> app_;
    ExecutorState state_;
    std::vector<ConsensusWindow<Tally>> tallies_;
    std::vector<QuorumTracker<std::uint16_t, ViewNo>> views_;
    QuorumTracker<std::uint16_t, SeqNo> stable_;
    bool awaiting_catch_up_ = false;
    bool retry_armed_ = false;
};

// Fans executor replies out to clients and acknowledges completion to the
// request source with the same index.
class ReplySink final : public Node {
public:
    void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) override;
};

}  // namespace tara
