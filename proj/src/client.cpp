#include "tara/client.hpp"

#include "tara/kv_service.hpp"

namespace tara {

namespace {

constexpr std::uint64_t kSubmitTimer = 1;
constexpr std::uint64_t kTimeoutBase = 1u << 20;

}  // namespace

Client::Client(ClientId id, int front_ends, Workload workload, std::uint64_t seed)
    : id_(id),
      front_ends_(front_ends),
      workload_(workload),
      rng_(seed * 0x9e3779b97f4a7c15ULL + id),
      front_end_(static_cast<int>(id % static_cast<ClientId>(front_ends))) {}

void Client::start(Context& ctx) { ctx.set_timer(workload_.think_time, kSubmitTimer); }

Bytes Client::next_op() {
    std::uniform_int_distribution<int> key_dist(0, workload_.keys - 1);
    std::uniform_real_distribution<double> kind(0.0, 1.0);
    std::string key = "k" + std::to_string(key_dist(rng_));
    double roll = kind(rng_);
    if (roll < workload_.read_ratio) return kv::get(key);
    if (roll < workload_.read_ratio + workload_.delete_ratio) return kv::del(key);
    // Unique values make every write distinguishable to the checker.
    return kv::put(key, "v" + std::to_string(id_) + "." + std::to_string(next_t_));
}

void Client::submit(Context& ctx) {
    if (outstanding_) return;
    if (ctx.now() >= workload_.stop_at) return;
    if (workload_.max_commands != 0 && next_t_ > workload_.max_commands) return;
    Command cmd{CommandId{id_, next_t_}, next_op()};
    ++next_t_;
    ctx.recorder().client_invoked(ctx.now(), cmd.id, cmd.op);
    outstanding_ = std::move(cmd);
    send(ctx);
}

void Client::send(Context& ctx) {
    ctx.emit(Stream::submit, *outstanding_, Route::direct(0, front_end_));
    ctx.set_timer(workload_.timeout, kTimeoutBase + outstanding_->id.timestamp);
}

void Client::on_timer(Context& ctx, std::uint64_t timer_id) {
    if (timer_id == kSubmitTimer) {
        submit(ctx);
        return;
    }
    if (!outstanding_ || timer_id - kTimeoutBase != outstanding_->id.timestamp) return;
    ++retries_;
    front_end_ = (front_end_ + 1) % front_ends_;
    send(ctx);
}

void Client::on_tuple(Context& ctx, const NodeId&, const Tuple& tuple) {
    const auto* reply = std::get_if<Reply>(&tuple);
    if (reply == nullptr || !outstanding_) return;
    for (const auto& item : reply->items) {
        if (item.id != outstanding_->id) continue;
        ctx.recorder().client_completed(ctx.now(), item.id, item.result);
        outstanding_.reset();
        ++completed_;
        if (workload_.think_time > 0)
            ctx.set_timer(workload_.think_time, kSubmitTimer);
        else
            submit(ctx);
        return;
    }
}

}  // namespace tara
