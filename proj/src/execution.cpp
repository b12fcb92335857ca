#include "tara/execution.hpp"

#include <algorithm>

namespace tara {

namespace {

constexpr std::uint64_t kReportTimer = 1;
constexpr std::uint64_t kRetryTimer = 2;
constexpr std::uint64_t kAnnounceTimer = 3;

}  // namespace

Executor::Executor(const NodeId& id, const ProtocolParams& params,
                   std::unique_ptr<ServiceApplication> app)
    : id_(id),
      params_(params),
      app_(std::move(app)),
      stable_(static_cast<std::size_t>(params.quorum()), 0) {
    for (int p = 0; p < params.partitions; ++p) {
        tallies_.emplace_back(params.window);
        views_.emplace_back(static_cast<std::size_t>(params.quorum()), 0);
    }
}

void Executor::start(Context& ctx) {
    ctx.set_timer(params_.report_period, kReportTimer);
    ctx.set_timer(params_.gossip_period, kAnnounceTimer);
    // A restarted executor has lost its state and must wait for the
    // stability threshold before it can tell which checkpoint to load.
    if (ctx.restarted())
        awaiting_catch_up_ = true;
    else
        maybe_checkpoint(ctx);
}

std::size_t Executor::slot_count() const {
    std::size_t n = 0;
    for (const auto& t : tallies_) n = std::max(n, t.occupied());
    return n;
}

void Executor::on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) {
    if (const auto* c = std::get_if<Commit>(&tuple)) {
        on_commit(ctx, *c);
    } else if (const auto* st = std::get_if<Stable>(&tuple)) {
        on_stable(ctx, from.index, st->threshold);
    } else if (const auto* v = std::get_if<View>(&tuple)) {
        on_view(ctx, from.index, v->partition, v->view);
    }
}

void Executor::on_timer(Context& ctx, std::uint64_t timer_id) {
    switch (timer_id) {
        case kReportTimer:
            for (int p = 0; p < params_.partitions; ++p)
                ctx.emit(Stream::actual, actual_for(p), Route::to_partition(p));
            ctx.set_timer(params_.report_period, kReportTimer);
            break;
        case kRetryTimer:
            retry_armed_ = false;
            if (awaiting_catch_up_ || state_.next_exec < stable_.adopted()) {
                if (catch_up(ctx, stable_.adopted())) try_execute(ctx);
            }
            break;
        case kAnnounceTimer:
            if (state_.last_checkpoint >= 0 && !awaiting_catch_up_) {
                ctx.emit(Stream::checkpoint, Checkpoint{id_.index, state_.last_checkpoint},
                         Route::broadcast());
            }
            ctx.set_timer(params_.gossip_period, kAnnounceTimer);
            break;
        default:
            break;
    }
}

void Executor::on_commit(Context& ctx, const Commit& commit) {
    if (commit.partition >= params_.partitions) return;
    auto p = static_cast<std::size_t>(commit.partition);
    if (commit.view < views_[p].adopted()) return;
    auto& window = tallies_[p];
    if (!window.contains(commit.sequence)) return;
    if (exec_sequence(commit.sequence, commit.partition, params_.partitions) < state_.next_exec)
        return;
    Tally* tally = window.find(commit.sequence);
    if (tally == nullptr) {
        window.put(commit.sequence, Tally{});
        tally = window.find(commit.sequence);
    }
    auto [it, inserted] = tally->try_emplace(commit.committer, Vote{commit.view, commit.request});
    if (!inserted) {
        if (commit.view < it->second.view) return;
        it->second = Vote{commit.view, commit.request};
    }
    try_execute(ctx);
}

const Request* Executor::decided(int partition, const Tally& tally) const {
    ViewNo floor = views_[static_cast<std::size_t>(partition)].adopted();
    for (auto i = tally.begin(); i != tally.end(); ++i) {
        if (i->second.view < floor) continue;
        int votes = 0;
        for (const auto& [_, other] : tally)
            if (other.view == i->second.view && other.request == i->second.request) ++votes;
        if (votes >= params_.quorum()) return &i->second.request;
    }
    return nullptr;
}

void Executor::try_execute(Context& ctx) {
    if (awaiting_catch_up_) return;
    for (;;) {
        maybe_checkpoint(ctx);
        auto [partition, local] = split_exec_sequence(state_.next_exec, params_.partitions);
        auto& window = tallies_[static_cast<std::size_t>(partition)];
        const Tally* tally = window.find(local);
        if (tally == nullptr) return;
        const Request* request = decided(partition, *tally);
        if (request == nullptr) return;
        Request chosen = *request;
        window.erase(local);
        execute_request(ctx, partition, chosen);
    }
}

std::optional<Reply> Executor::execute_request(Context& ctx, int partition,
                                               const Request& request) {
    SeqNo position = state_.next_exec;
    if (position < stable_.adopted()) {
        ctx.recorder().violation(ctx.now(), id_,
                                 "executing pos=" + std::to_string(position) +
                                     " below stable threshold " +
                                     std::to_string(stable_.adopted()));
    }
    ++state_.next_exec;
    if (request.is_noop()) {
        ctx.recorder().executed(ctx.now(), id_, position, digest(request), {});
        return std::nullopt;
    }

    Reply reply{static_cast<std::uint16_t>(partition), id_.index, request.source,
                request.number, {}};
    std::vector<AppliedCommand> applied;
    for (const auto& cmd : request.commands) {
        auto client = cmd.id.client;
        auto t = cmd.id.timestamp;
        auto done = state_.executed.find(client);
        if (done != state_.executed.end() && t <= done->second) {
            // Already executed: answer from the cache if it is the latest.
            auto cached = state_.result_cache.find(client);
            if (cached != state_.result_cache.end() && cached->second.first == t)
                reply.items.push_back({cmd.id, cached->second.second});
            continue;
        }
        Bytes result = app_->apply(cmd.op);
        ++state_.app_invocations;
        state_.executed[client] = t;
        state_.result_cache[client] = {t, result};
        applied.push_back({cmd.id, result});
        reply.items.push_back({cmd.id, std::move(result)});
    }
    auto& agreed = state_.agreed[{static_cast<std::uint16_t>(partition), request.source}];
    agreed = std::max(agreed, request.number);
    ctx.recorder().executed(ctx.now(), id_, position, digest(request), std::move(applied));
    ctx.emit(Stream::reply, reply, Route::direct(partition, static_cast<int>(request.source)));
    return reply;
}

CheckpointBlob Executor::make_blob(SeqNo sequence) const {
    CheckpointBlob blob;
    blob.executor = id_.index;
    blob.sequence = sequence;
    blob.app_snapshot = app_->snapshot();
    blob.executed = state_.executed;
    blob.result_cache = state_.result_cache;
    blob.agreed = state_.agreed;
    return blob;
}

bool Executor::maybe_checkpoint(Context& ctx) {
    SeqNo n = state_.next_exec;
    if (awaiting_catch_up_ || n % params_.checkpoint_interval != 0 || state_.last_checkpoint >= n)
        return false;
    ctx.checkpoints().put(make_blob(n));
    state_.last_checkpoint = n;
    ctx.recorder().checkpoint_written(ctx.now(), id_, n);
    ctx.emit(Stream::checkpoint, Checkpoint{id_.index, n}, Route::broadcast());
    return true;
}

bool Executor::catch_up(Context& ctx, SeqNo threshold) {
    if (threshold <= state_.next_exec && !awaiting_catch_up_) return true;
    if (threshold == 0 && state_.next_exec == 0) {
        awaiting_catch_up_ = false;
        maybe_checkpoint(ctx);
        return true;
    }
    auto blob = ctx.checkpoints().any_at(threshold);
    if (!blob) {
        if (!retry_armed_) {
            retry_armed_ = true;
            ctx.set_timer(params_.gossip_period, kRetryTimer);
        }
        return false;
    }
    app_->restore(blob->app_snapshot);
    state_.executed = std::move(blob->executed);
    state_.result_cache = std::move(blob->result_cache);
    state_.agreed = std::move(blob->agreed);
    state_.next_exec = threshold;
    state_.last_checkpoint = threshold;
    awaiting_catch_up_ = false;
    for (int p = 0; p < params_.partitions; ++p)
        tallies_[static_cast<std::size_t>(p)].advance(local_floor(threshold, p, params_.partitions));
    ctx.recorder().checkpoint_loaded(ctx.now(), id_, threshold);
    return true;
}

void Executor::apply_threshold(Context& ctx, SeqNo threshold) {
    for (int p = 0; p < params_.partitions; ++p)
        tallies_[static_cast<std::size_t>(p)].advance(local_floor(threshold, p, params_.partitions));
    if (awaiting_catch_up_ || state_.next_exec < threshold) catch_up(ctx, threshold);
    try_execute(ctx);
}

void Executor::on_stable(Context& ctx, std::uint16_t source, SeqNo threshold) {
    bool increased = stable_.report(source, threshold);
    if (increased || (awaiting_catch_up_ && stable_.has_quorum()))
        apply_threshold(ctx, stable_.adopted());
}

void Executor::on_view(Context& ctx, std::uint16_t source, int partition, ViewNo view) {
    if (partition < 0 || partition >= params_.partitions) return;
    auto p = static_cast<std::size_t>(partition);
    if (!views_[p].report(source, view)) return;
    ViewNo adopted = views_[p].adopted();
    auto& slots = tallies_[p].slots();
    for (auto it = slots.begin(); it != slots.end();) {
        std::erase_if(it->second, [&](const auto& kv) { return kv.second.view < adopted; });
        if (it->second.empty())
            it = slots.erase(it);
        else
            ++it;
    }
    try_execute(ctx);
}

Actual Executor::actual_for(int partition) const {
    Actual actual{static_cast<std::uint16_t>(partition), id_.index, {}};
    for (const auto& [key, q] : state_.agreed)
        if (key.first == partition) actual.agreed[key.second] = q;
    return actual;
}

void ReplySink::on_tuple(Context& ctx, const NodeId&, const Tuple& tuple) {
    const auto* reply = std::get_if<Reply>(&tuple);
    if (reply == nullptr) return;
    for (const auto& item : reply->items) {
        Reply single{reply->partition, reply->executor, reply->source, reply->number, {item}};
        ctx.emit(Stream::client_reply, std::move(single),
                 Route::direct(0, static_cast<int>(item.id.client)));
    }
    Reply ack{reply->partition, reply->executor, reply->source, reply->number, {}};
    ctx.emit(Stream::completion, std::move(ack), Route::direct(0, ctx.self().index));
}

}  // namespace tara
