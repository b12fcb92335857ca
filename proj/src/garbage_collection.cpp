#include "tara/garbage_collection.hpp"

#include <iterator>

#include "tara/quorum.hpp"

namespace tara {

namespace {

constexpr std::uint64_t kGossipTimer = 1;

}  // namespace

Bytes encode_blob(const CheckpointBlob& blob) {
    WireWriter w;
    w.u16(blob.executor);
    w.i64(blob.sequence);
    w.bytes(blob.app_snapshot);
    w.count(blob.executed.size());
    for (const auto& [client, t] : blob.executed) {
        w.u32(client);
        w.u64(t);
    }
    w.count(blob.result_cache.size());
    for (const auto& [client, entry] : blob.result_cache) {
        w.u32(client);
        w.u64(entry.first);
        w.bytes(entry.second);
    }
    w.count(blob.agreed.size());
    for (const auto& [key, q] : blob.agreed) {
        w.u16(key.first);
        w.u32(key.second);
        w.u64(q);
    }
    return w.take();
}

CheckpointBlob decode_blob(std::string_view bytes) {
    WireReader r(bytes);
    CheckpointBlob blob;
    blob.executor = r.u16();
    blob.sequence = r.i64();
    blob.app_snapshot = r.bytes();
    for (auto n = r.count(12); n > 0; --n) {
        auto client = r.u32();
        blob.executed[client] = r.u64();
    }
    for (auto n = r.count(16); n > 0; --n) {
        auto client = r.u32();
        auto t = r.u64();
        blob.result_cache[client] = {t, r.bytes()};
    }
    for (auto n = r.count(14); n > 0; --n) {
        auto partition = r.u16();
        auto source = r.u32();
        blob.agreed[{partition, source}] = r.u64();
    }
    if (!r.done()) throw decode_error("trailing bytes in checkpoint blob");
    return blob;
}

bool CheckpointStore::put(const CheckpointBlob& blob) {
    return blobs_.try_emplace({blob.sequence, blob.executor}, encode_blob(blob)).second;
}

std::optional<CheckpointBlob> CheckpointStore::get(SeqNo sequence, std::uint16_t executor) const {
    auto it = blobs_.find({sequence, executor});
    if (it == blobs_.end()) return std::nullopt;
    return decode_blob(it->second);
}

std::optional<CheckpointBlob> CheckpointStore::any_at(SeqNo sequence) const {
    auto it = blobs_.lower_bound({sequence, 0});
    if (it == blobs_.end() || it->first.first != sequence) return std::nullopt;
    return decode_blob(it->second);
}

std::size_t CheckpointStore::copies_at(SeqNo sequence) const {
    std::size_t n = 0;
    for (auto it = blobs_.lower_bound({sequence, 0});
         it != blobs_.end() && it->first.first == sequence; ++it)
        ++n;
    return n;
}

SeqNo stability_threshold(const std::map<std::uint16_t, SeqNo>& checkpoints, int f,
                          SeqNo fallback) {
    std::vector<SeqNo> values;
    values.reserve(checkpoints.size());
    for (const auto& [_, s] : checkpoints) values.push_back(s);
    auto kth = kth_highest(std::move(values), static_cast<std::size_t>(f) + 1);
    return kth ? std::max(*kth, fallback) : fallback;
}

bool StabilityVector::report(std::uint16_t executor, SeqNo sequence) {
    auto [it, inserted] = entries_.try_emplace(executor, sequence);
    if (!inserted) {
        if (sequence <= it->second) return false;
        sorted_.erase(sorted_.find(it->second));
        it->second = sequence;
    }
    sorted_.insert(sequence);
    if (sorted_.size() < rank_) return false;
    auto candidate = *std::next(sorted_.begin(), static_cast<std::ptrdiff_t>(rank_ - 1));
    if (candidate <= threshold_) return false;
    threshold_ = candidate;
    return true;
}

void GcSource::start(Context& ctx) { ctx.set_timer(ctx.params().gossip_period, kGossipTimer); }

void GcSource::on_tuple(Context& ctx, const NodeId&, const Tuple& tuple) {
    const auto* cp = std::get_if<Checkpoint>(&tuple);
    if (cp == nullptr) return;
    if (vector_.report(cp->executor, cp->sequence)) announce(ctx);
}

void GcSource::on_timer(Context& ctx, std::uint64_t timer_id) {
    if (timer_id != kGossipTimer) return;
    // Source-originated tuples are re-emitted until superseded.
    announce(ctx);
    ctx.set_timer(ctx.params().gossip_period, kGossipTimer);
}

void GcSource::announce(Context& ctx) {
    ctx.emit(Stream::stable, Stable{ctx.self().index, vector_.threshold()}, Route::broadcast());
}

void FeedbackSink::on_tuple(Context& ctx, const NodeId&, const Tuple& tuple) {
    const auto& self = ctx.self();
    ctx.emit(feedback_, tuple, Route::direct(partitioned_ ? self.partition : 0, self.index));
}

}  // namespace tara
