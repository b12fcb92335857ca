#include "tara/ordering.hpp"

#include <algorithm>
#include <cstdio>

#include "tara/partitioning.hpp"

namespace tara {

namespace {

constexpr std::uint64_t kTargetTimer = 1;
constexpr std::uint64_t kBatchTimer = 2;
constexpr std::uint64_t kDrainTimer = 1;
constexpr std::uint64_t kHeartbeatTimer = 2;
constexpr std::uint64_t kRetransmitBase = 1u << 20;

constexpr const char* kNextRequest = "next_request";
constexpr const char* kLastActiveView = "last_active_view";
constexpr const char* kCommitterView = "view";
constexpr const char* kCommitterStable = "stable";

std::string slot_key(SeqNo s) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "slot/%020lld", static_cast<long long>(s));
    return buf;
}

Bytes encode_i64(std::int64_t v) {
    WireWriter w;
    w.i64(v);
    return w.take();
}

std::optional<std::int64_t> load_i64(const DurableStore& store, const std::string& key) {
    auto it = store.find(key);
    if (it == store.end()) return std::nullopt;
    WireReader r(it->second);
    return r.i64();
}

}  // namespace

// ---- request source ----

RequestSource::RequestSource(const ProtocolParams& params)
    : params_(params), highest_per_partition_(static_cast<std::size_t>(params.partitions), 0) {}

void RequestSource::start(Context& ctx) {
    self_ = ctx.self().index;
    // Request numbers must never be reused; requests in flight at the crash
    // are lost, so the targets restart from nothing outstanding.
    if (auto next = load_i64(ctx.durable(), kNextRequest)) next_q_ = static_cast<std::uint64_t>(*next);
    ctx.set_timer(params_.report_period, kTargetTimer);
}

void RequestSource::on_tuple(Context& ctx, const NodeId&, const Tuple& tuple) {
    if (const auto* c = std::get_if<Command>(&tuple)) {
        on_command(ctx, *c);
    } else if (const auto* r = std::get_if<Reply>(&tuple)) {
        on_completion(*r);
    }
}

void RequestSource::on_timer(Context& ctx, std::uint64_t timer_id) {
    if (timer_id == kTargetTimer) {
        for (int p = 0; p < params_.partitions; ++p)
            ctx.emit(Stream::target, target_for(p), Route::to_partition(p));
        ctx.set_timer(params_.report_period, kTargetTimer);
    } else if (timer_id >= kRetransmitBase) {
        auto it = pending_.find(timer_id - kRetransmitBase);
        if (it == pending_.end()) return;
        send(ctx, it->second);
        ctx.set_timer(params_.retransmit_timeout, timer_id);
    } else if (timer_id >= kBatchTimer && timer_id < kRetransmitBase) {
        // Batch timers carry the epoch of the batch they were armed for.
        if (timer_id - kBatchTimer != batch_epoch_) return;
        batch_timer_armed_ = false;
        flush(ctx);
    }
}

std::optional<Request> RequestSource::on_command(Context& ctx, const Command& command) {
    batch_.push_back(command);
    if (batch_.size() >= params_.max_batch) return flush(ctx);
    if (!batch_timer_armed_) {
        batch_timer_armed_ = true;
        ctx.set_timer(params_.batch_timeout, kBatchTimer + batch_epoch_);
    }
    return std::nullopt;
}

std::optional<Request> RequestSource::flush(Context& ctx) {
    if (batch_.empty()) return std::nullopt;
    ++batch_epoch_;
    batch_timer_armed_ = false;
    std::uint64_t q = next_q_++;
    ctx.durable()[kNextRequest] = encode_i64(static_cast<std::int64_t>(next_q_));
    int partition = assign_partition(q, params_.partitions);
    Pending pending{Request{self_, q, std::move(batch_)}, partition, {}};
    batch_.clear();
    auto& hp = highest_per_partition_[static_cast<std::size_t>(partition)];
    hp = std::max(hp, q);
    auto [it, _] = pending_.emplace(q, std::move(pending));
    send(ctx, it->second);
    ctx.set_timer(params_.retransmit_timeout, kRetransmitBase + q);
    return it->second.request;
}

void RequestSource::send(Context& ctx, const Pending& pending) {
    ctx.emit(Stream::request, pending.request, Route::to_partition(pending.partition));
}

void RequestSource::on_completion(const Reply& reply) {
    if (reply.source != self_) return;
    auto it = pending_.find(reply.number);
    if (it == pending_.end()) return;
    it->second.completions.insert(reply.executor);
    if (static_cast<int>(it->second.completions.size()) >= params_.quorum()) pending_.erase(it);
}

Target RequestSource::target_for(int partition) const {
    return Target{static_cast<std::uint16_t>(partition), self_,
                  highest_per_partition_[static_cast<std::size_t>(partition)]};
}

// ---- proposer ----

Proposer::Proposer(const NodeId& id, const ProtocolParams& params)
    : id_(id),
      params_(params),
      views_(static_cast<std::size_t>(params.quorum()), 0),
      stable_(static_cast<std::size_t>(params.quorum()), 0),
      window_(params.window) {}

void Proposer::start(Context& ctx) {
    if (ctx.restarted()) {
        if (auto last = load_i64(ctx.durable(), kLastActiveView)) min_active_view_ = *last + 1;
    } else if (id_.index == 0) {
        entered_ = true;
        ctx.durable()[kLastActiveView] = encode_i64(0);
    }
    if (params_.noop_heartbeat > 0) ctx.set_timer(params_.noop_heartbeat, kHeartbeatTimer);
}

bool Proposer::active() const {
    return view_ % (params_.f + 1) == id_.index && view_ >= min_active_view_;
}

void Proposer::on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) {
    if (const auto* r = std::get_if<Request>(&tuple)) {
        on_request(ctx, *r);
    } else if (const auto* st = std::get_if<Stable>(&tuple)) {
        on_stable(ctx, from.index, st->threshold);
    } else if (const auto* v = std::get_if<View>(&tuple)) {
        if (v->partition == id_.partition) on_view(ctx, from.index, v->view);
    } else if (const auto* rec = std::get_if<RecordTuple>(&tuple)) {
        on_record(ctx, *rec);
    }
}

void Proposer::on_timer(Context& ctx, std::uint64_t timer_id) {
    if (timer_id == kDrainTimer) {
        drain_armed_ = false;
        drain(ctx);
    } else if (timer_id == kHeartbeatTimer) {
        if (leading() && pending_.empty() && ctx.now() - last_proposal_ >= params_.noop_heartbeat &&
            next_seq_ < window_.end()) {
            propose(ctx, next_seq_, Request::noop(), true);
            ++next_seq_;
        }
        ctx.set_timer(params_.noop_heartbeat, kHeartbeatTimer);
    }
}

void Proposer::on_request(Context& ctx, const Request& request) {
    if (!active()) return;
    auto key = std::make_pair(request.source, request.number);
    if (entered_) {
        if (auto it = assigned_.find(key); it != assigned_.end()) {
            // Retransmission: repeat the earlier assignment.
            if (const auto* slot = window_.find(it->second)) {
                ctx.emit(Stream::propose,
                         Propose{id_.partition, id_.index, it->second, view_, *slot},
                         Route::broadcast());
            }
            return;
        }
    }
    if (!queued_.insert(key).second) return;
    pending_.push_back(request);
    drain(ctx);
}

bool Proposer::has_budget(Context& ctx) {
    if (params_.proposer_cap <= 0) return true;
    if (ctx.now() != budget_tick_) {
        budget_tick_ = ctx.now();
        budget_used_ = 0;
    }
    return budget_used_ < params_.proposer_cap;
}

void Proposer::drain(Context& ctx) {
    if (!leading()) return;
    while (!pending_.empty() && next_seq_ < window_.end() && has_budget(ctx)) {
        Request request = std::move(pending_.front());
        pending_.pop_front();
        auto key = std::make_pair(request.source, request.number);
        queued_.erase(key);
        if (assigned_.count(key)) continue;
        propose(ctx, next_seq_, request, true);
        ++next_seq_;
    }
    if (!pending_.empty() && next_seq_ < window_.end() && !drain_armed_) {
        drain_armed_ = true;
        ctx.set_timer(1, kDrainTimer);
    }
}

void Proposer::propose(Context& ctx, SeqNo s, const Request& request, bool fresh) {
    window_.put(s, request);
    if (!request.is_noop()) assigned_[{request.source, request.number}] = s;
    if (fresh && params_.proposer_cap > 0) {
        has_budget(ctx);
        ++budget_used_;
    }
    last_proposal_ = ctx.now();
    ctx.recorder().proposed(ctx.now(), id_, id_.partition, s, view_, digest(request));
    ctx.emit(Stream::propose, Propose{id_.partition, id_.index, s, view_, request},
             Route::broadcast());
}

void Proposer::advance_floor(SeqNo local) {
    if (!window_.advance(local)) return;
    for (auto it = assigned_.begin(); it != assigned_.end();) {
        if (it->second < local)
            it = assigned_.erase(it);
        else
            ++it;
    }
    if (entered_ && next_seq_ < local) next_seq_ = local;
}

void Proposer::on_stable(Context& ctx, std::uint16_t source, SeqNo threshold) {
    if (!stable_.report(source, threshold)) return;
    advance_floor(local_floor(stable_.adopted(), id_.partition, params_.partitions));
    drain(ctx);
}

void Proposer::on_view(Context& ctx, std::uint16_t source, ViewNo view) {
    if (!views_.report(source, view)) return;
    view_ = views_.adopted();
    entered_ = false;
    pending_.clear();
    queued_.clear();
    assigned_.clear();
    window_.clear();
    records_.erase(records_.begin(), records_.lower_bound(view_));
    if (active()) try_enter(ctx);
}

void Proposer::on_record(Context& ctx, const RecordTuple& record) {
    if (record.partition != id_.partition || record.view_target < view_) return;
    records_[record.view_target].try_emplace(record.committer, record);
    if (record.view_target == view_ && active() && !entered_) try_enter(ctx);
}

void Proposer::try_enter(Context& ctx) {
    auto it = records_.find(view_);
    if (it == records_.end() || static_cast<int>(it->second.size()) < params_.quorum()) return;
    std::vector<RecordTuple> records;
    for (const auto& [_, rec] : it->second) records.push_back(rec);
    enter_view(ctx, view_, records);
}

void Proposer::enter_view(Context& ctx, ViewNo view, const std::vector<RecordTuple>& records) {
    view_ = view;
    SeqNo floor = window_.floor();
    for (const auto& rec : records) floor = std::max(floor, rec.window_floor);
    window_.advance(floor);
    window_.clear();
    assigned_.clear();

    std::map<SeqNo, SlotRecord> chosen;
    for (const auto& rec : records) {
        for (const auto& d : rec.records) {
            if (d.sequence < floor) continue;
            auto [it, inserted] = chosen.try_emplace(d.sequence, d);
            if (inserted) continue;
            if (d.view > it->second.view) {
                it->second = d;
            } else if (d.view == it->second.view && d.request != it->second.request) {
                ctx.recorder().violation(ctx.now(), id_,
                                         "conflicting records for s=" + std::to_string(d.sequence));
            }
        }
    }

    ctx.durable()[kLastActiveView] = encode_i64(view);
    entered_ = true;
    SeqNo top = chosen.empty() ? floor - 1 : chosen.rbegin()->first;
    for (SeqNo s = floor; s <= top; ++s) {
        if (auto it = chosen.find(s); it != chosen.end()) {
            propose(ctx, s, it->second.request, false);
        } else if (!pending_.empty()) {
            Request request = std::move(pending_.front());
            pending_.pop_front();
            queued_.erase({request.source, request.number});
            propose(ctx, s, request, false);
        } else {
            propose(ctx, s, Request::noop(), false);
        }
    }
    next_seq_ = top + 1;
    records_.erase(records_.begin(), records_.upper_bound(view));
    drain(ctx);
}

// ---- committer ----

Committer::Committer(const NodeId& id, const ProtocolParams& params)
    : id_(id),
      params_(params),
      views_(static_cast<std::size_t>(params.quorum()), 0),
      stable_(static_cast<std::size_t>(params.quorum()), 0),
      window_(params.window) {}

void Committer::start(Context& ctx) {
    if (!ctx.restarted()) return;
    auto& store = ctx.durable();
    if (auto v = load_i64(store, kCommitterView)) {
        view_ = *v;
        views_ = QuorumTracker<std::uint16_t, ViewNo>(static_cast<std::size_t>(params_.quorum()),
                                                      view_);
    }
    if (auto t = load_i64(store, kCommitterStable)) {
        stable_ = QuorumTracker<std::uint16_t, SeqNo>(static_cast<std::size_t>(params_.quorum()),
                                                      *t);
        window_.advance(local_floor(*t, id_.partition, params_.partitions));
    }
    for (auto it = store.lower_bound("slot/"); it != store.end() && it->first.starts_with("slot/");
         ++it) {
        WireReader r(it->second);
        SlotRecord rec;
        rec.sequence = r.i64();
        rec.view = r.i64();
        rec.request = r.request();
        window_.put(rec.sequence, std::move(rec));
    }
}

void Committer::on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) {
    if (const auto* p = std::get_if<Propose>(&tuple)) {
        on_propose(ctx, *p);
    } else if (const auto* v = std::get_if<View>(&tuple)) {
        if (v->partition == id_.partition) on_view(ctx, from.index, v->view);
    } else if (const auto* st = std::get_if<Stable>(&tuple)) {
        on_stable(ctx, from.index, st->threshold);
    }
}

std::optional<Commit> Committer::on_propose(Context& ctx, const Propose& propose) {
    if (propose.partition != id_.partition || propose.view != view_) return std::nullopt;
    if (!window_.contains(propose.sequence)) return std::nullopt;
    if (const auto* existing = window_.find(propose.sequence);
        existing && existing->view == propose.view && existing->request != propose.request) {
        ctx.recorder().violation(ctx.now(), id_,
                                 "two proposals for s=" + std::to_string(propose.sequence) +
                                     " in v=" + std::to_string(propose.view));
        return std::nullopt;
    }
    SlotRecord rec{propose.sequence, propose.view, propose.request};
    persist_slot(ctx, rec);
    window_.put(propose.sequence, rec);
    proposal_seen_ = true;
    Commit commit{id_.partition, id_.index, propose.sequence, propose.view, propose.request};
    ctx.recorder().committed(ctx.now(), id_, id_.partition, commit.sequence, commit.view,
                             digest(commit.request));
    ctx.emit(Stream::commit, commit, Route::broadcast());
    return commit;
}

std::optional<RecordTuple> Committer::on_new_view(Context& ctx, ViewNo view) {
    if (view <= view_) return std::nullopt;
    view_ = view;
    ctx.durable()[kCommitterView] = encode_i64(view_);
    proposal_seen_ = false;
    last_record_ = ctx.now();
    auto record = make_record();
    ctx.emit(Stream::record, record, Route::broadcast());
    return record;
}

void Committer::on_view(Context& ctx, std::uint16_t source, ViewNo view) {
    if (views_.report(source, view)) {
        on_new_view(ctx, views_.adopted());
        return;
    }
    // The new proposer may have missed the record set; repeat it until a
    // proposal in this view shows up.
    if (view == view_ && view_ > 0 && !proposal_seen_ &&
        ctx.now() - last_record_ >= params_.gossip_period) {
        last_record_ = ctx.now();
        ctx.emit(Stream::record, make_record(), Route::broadcast());
    }
}

void Committer::on_stable(Context& ctx, std::uint16_t source, SeqNo threshold) {
    if (!stable_.report(source, threshold)) return;
    SeqNo merged = stable_.adopted();
    ctx.durable()[kCommitterStable] = encode_i64(merged);
    SeqNo local = local_floor(merged, id_.partition, params_.partitions);
    SeqNo old = window_.floor();
    if (!window_.advance(local)) return;
    auto& store = ctx.durable();
    store.erase(store.lower_bound(slot_key(old)), store.lower_bound(slot_key(local)));
}

RecordTuple Committer::make_record() const {
    RecordTuple record{id_.partition, id_.index, view_, window_.floor(), {}};
    for (const auto& [_, rec] : window_.slots()) record.records.push_back(rec);
    return record;
}

void Committer::persist_slot(Context& ctx, const SlotRecord& record) {
    WireWriter w;
    w.i64(record.sequence);
    w.i64(record.view);
    w.request(record.request);
    ctx.durable()[slot_key(record.sequence)] = w.take();
}

}  // namespace tara
