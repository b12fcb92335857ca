#include "tara/view_change.hpp"

#include <algorithm>

namespace tara {

namespace {

constexpr std::uint64_t kEvaluateTimer = 1;
constexpr std::uint64_t kGossipTimer = 2;

}  // namespace

Controller::Controller(const NodeId& id, const ProtocolParams& params)
    : id_(id),
      params_(params),
      views_(static_cast<std::size_t>(params.quorum()), 0),
      since_(static_cast<std::size_t>(2 * params.f + 1), 0) {}

void Controller::start(Context& ctx) {
    std::fill(since_.begin(), since_.end(), ctx.now());
    // After a restart the local view is unknown; hold off until f+1 view
    // sources have told us where the system is.
    waiting_for_views_ = ctx.restarted();
    ctx.set_timer(params_.report_period, kEvaluateTimer);
    ctx.set_timer(params_.gossip_period, kGossipTimer);
}

void Controller::on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) {
    if (const auto* t = std::get_if<Target>(&tuple)) {
        if (t->partition == id_.partition) on_target(ctx.now(), *t);
    } else if (const auto* a = std::get_if<Actual>(&tuple)) {
        if (a->partition == id_.partition) on_actual(ctx.now(), *a);
    } else if (const auto* v = std::get_if<View>(&tuple)) {
        if (v->partition == id_.partition) on_view(ctx.now(), from.index, v->view);
    }
}

void Controller::on_timer(Context& ctx, std::uint64_t timer_id) {
    if (timer_id == kEvaluateTimer) {
        if (auto v = evaluate(ctx.now())) {
            ctx.recorder().view_announced(ctx.now(), id_, id_.partition, *v);
            announce(ctx);
        } else if (local_ > views_.adopted()) {
            announce(ctx);
        }
        ctx.set_timer(params_.report_period, kEvaluateTimer);
    } else if (timer_id == kGossipTimer) {
        if (!waiting_for_views_) announce(ctx);
        ctx.set_timer(params_.gossip_period, kGossipTimer);
    }
}

void Controller::announce(Context& ctx) {
    ctx.emit(Stream::view, View{id_.partition, id_.index, local_}, Route::broadcast());
}

void Controller::on_target(Tick now, const Target& target) {
    targets_[target.source] = {target.number, now};
}

void Controller::on_actual(Tick now, const Actual& actual) {
    if (actual.executor >= since_.size()) return;
    auto& known = actuals_[actual.executor];
    bool progressed = false;
    for (const auto& [source, q] : actual.agreed) {
        auto& k = known[source];
        if (q > k) {
            k = q;
            progressed = true;
        }
    }
    if (progressed) since_[actual.executor] = now;
}

void Controller::on_view(Tick now, std::uint16_t source, ViewNo view) {
    bool increased = views_.report(source, view);
    if (waiting_for_views_ && views_.has_quorum()) {
        waiting_for_views_ = false;
        local_ = std::max(local_, views_.adopted());
        increased = true;
    }
    if (!increased) return;
    local_ = std::max(local_, views_.adopted());
    // Give the new view a full timeout before suspecting it.
    std::fill(since_.begin(), since_.end(), now);
}

bool Controller::behind(std::uint16_t executor) const {
    auto it = actuals_.find(executor);
    for (const auto& [source, target] : targets_) {
        // A source that stopped reporting has crashed; its stale target
        // must not keep the detector firing forever.
        if (now_ - target.second > params_.stall_timeout) continue;
        std::uint64_t have = 0;
        if (it != actuals_.end()) {
            if (auto a = it->second.find(source); a != it->second.end()) have = a->second;
        }
        if (have < target.first) return true;
    }
    return false;
}

int Controller::stalled(Tick now) const {
    int n = 0;
    for (std::size_t e = 0; e < since_.size(); ++e) {
        if (behind(static_cast<std::uint16_t>(e)) && now - since_[e] >= params_.stall_timeout) ++n;
    }
    return n;
}

std::optional<ViewNo> Controller::evaluate(Tick now) {
    now_ = now;
    for (std::size_t e = 0; e < since_.size(); ++e)
        if (!behind(static_cast<std::uint16_t>(e))) since_[e] = now;
    if (waiting_for_views_) return std::nullopt;
    if (stalled(now) < params_.quorum()) return std::nullopt;
    local_ = std::max(local_, views_.adopted()) + 1;
    std::fill(since_.begin(), since_.end(), now);
    return local_;
}

void ViewSource::start(Context& ctx) { ctx.set_timer(ctx.params().gossip_period, kGossipTimer); }

void ViewSource::on_tuple(Context& ctx, const NodeId&, const Tuple& tuple) {
    const auto* v = std::get_if<View>(&tuple);
    if (v == nullptr || v->view <= view_) return;
    view_ = v->view;
    announce(ctx);
}

void ViewSource::on_timer(Context& ctx, std::uint64_t timer_id) {
    if (timer_id != kGossipTimer) return;
    announce(ctx);
    ctx.set_timer(ctx.params().gossip_period, kGossipTimer);
}

void ViewSource::announce(Context& ctx) {
    const auto& self = ctx.self();
    ctx.emit(Stream::view_announce, View{self.partition, self.index, view_}, Route::broadcast());
}

void RecordSource::on_tuple(Context& ctx, const NodeId&, const Tuple& tuple) {
    const auto* rec = std::get_if<RecordTuple>(&tuple);
    if (rec == nullptr) return;
    int proposer = static_cast<int>(rec->view_target % (ctx.params().f + 1));
    ctx.emit(Stream::record_forward, *rec, Route::direct(ctx.self().partition, proposer));
}

}  // namespace tara
