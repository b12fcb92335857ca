#include "tara/simulator.hpp"

#include <array>
#include <limits>

#include "tara/garbage_collection.hpp"

namespace tara {

namespace {

constexpr std::array<std::string_view, 6> kEventKindNames = {
    "deliver", "crash", "restart", "timer", "queue-insert", "action",
};

}  // namespace

std::string_view event_kind_name(EventKind kind) {
    return kEventKindNames.at(static_cast<std::size_t>(kind));
}

void NetworkModel::validate() const {
    if (min_delay < 1) throw config_error("minimum delay must be >= 1 tick");
    if (max_delay < min_delay || pre_gst_max_delay < min_delay)
        throw config_error("delay bounds must not be below the minimum delay");
    if (loss < 0.0 || loss > 1.0) throw config_error("loss probability outside [0, 1]");
    if (duplication < 0.0 || duplication > 1.0)
        throw config_error("duplication probability outside [0, 1]");
    if (gst < 0) throw config_error("GST must be >= 0");
}

class Simulator::NodeContext final : public Context {
public:
    NodeContext(Simulator& sim, Slot& slot) : sim_(sim), slot_(slot) {}

    Tick now() const override { return sim_.now_; }
    const NodeId& self() const override { return slot_.id; }
    const ProtocolParams& params() const override { return sim_.params_; }
    bool restarted() const override { return slot_.restarted; }

    void emit(Stream stream, Tuple tuple, Route route) override {
        sim_.emit(slot_.id, stream, std::move(tuple), route);
    }

    void set_timer(Tick delay, std::uint64_t timer_id) override {
        Event e;
        e.tick = sim_.now_ + std::max<Tick>(delay, 0);
        e.sender = sim_.ordinal(slot_.id);
        e.counter = slot_.counter++;
        e.kind = EventKind::timer;
        e.target = e.sender;
        e.incarnation = slot_.incarnation;
        e.timer_id = timer_id;
        sim_.schedule(std::move(e));
    }

    CheckpointStore& checkpoints() override { return sim_.store_; }
    DurableStore& durable() override { return slot_.durable; }
    Recorder& recorder() override { return sim_.recorder_; }

private:
    Simulator& sim_;
    Slot& slot_;
};

Simulator::Simulator(Topology topology, ProtocolParams params, NetworkModel network,
                     NodeFactory factory, Recorder& recorder, CheckpointStore& store)
    : topology_(std::move(topology)),
      params_(params),
      network_(std::move(network)),
      factory_(std::move(factory)),
      recorder_(recorder),
      store_(store),
      harness_(std::numeric_limits<std::uint32_t>::max()),
      rng_(network_.seed) {
    topology_.validate();
    params_.validate();
    network_.validate();
    for (const auto& stage : topology_.stages) {
        for (int i = 0; i < stage.instance_count; ++i) {
            Slot slot;
            slot.id = NodeId{stage.role, static_cast<std::uint16_t>(stage.partition),
                             static_cast<std::uint16_t>(i)};
            slot.stage = stage.name;
            index_.emplace(slot.id, static_cast<std::uint32_t>(slots_.size()));
            slots_.push_back(std::move(slot));
        }
    }
    for (const auto& route : topology_.routes)
        routes_by_sender_[{route.from_stage, route.stream}].push_back(&route);
}

Simulator::~Simulator() = default;

void Simulator::add_actor(const NodeId& id, std::unique_ptr<Node> actor) {
    if (started_) throw config_error("actors must be added before the simulation starts");
    if (index_.count(id) != 0) throw config_error("duplicate actor " + to_string(id));
    Slot slot;
    slot.id = id;
    slot.node = std::move(actor);
    index_.emplace(id, static_cast<std::uint32_t>(slots_.size()));
    slots_.push_back(std::move(slot));
}

void Simulator::start() {
    if (started_) return;
    started_ = true;
    for (auto& slot : slots_) {
        if (!slot.node) slot.node = factory_(slot.id);
    }
    for (auto& slot : slots_) {
        invoke(slot, [](Node& node, Context& ctx) { node.start(ctx); });
    }
}

std::uint32_t Simulator::ordinal(const NodeId& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw topology_error("unknown node " + to_string(id));
    return it->second;
}

bool Simulator::alive(const NodeId& node) const { return slots_.at(ordinal(node)).alive; }

Node* Simulator::node(const NodeId& id) {
    auto& slot = slots_.at(ordinal(id));
    return slot.alive ? slot.node.get() : nullptr;
}

void Simulator::crash_node(const NodeId& node, Tick at) {
    Event e;
    e.tick = at;
    e.sender = harness_;
    e.counter = harness_counter_++;
    e.kind = EventKind::crash;
    e.target = ordinal(node);
    schedule(std::move(e));
}

void Simulator::restart_node(const NodeId& node, Tick at) {
    if (at == kNever) return;
    Event e;
    e.tick = at;
    e.sender = harness_;
    e.counter = harness_counter_++;
    e.kind = EventKind::restart;
    e.target = ordinal(node);
    schedule(std::move(e));
}

void Simulator::schedule_action(Tick at, std::function<void(Simulator&)> action) {
    actions_.push_back(std::move(action));
    Event e;
    e.tick = at;
    e.sender = harness_;
    e.counter = harness_counter_++;
    e.kind = EventKind::action;
    e.action = static_cast<std::uint32_t>(actions_.size() - 1);
    schedule(std::move(e));
}

void Simulator::schedule(Event event) {
    if (event.tick < now_) event.tick = now_;
    queue_.push(std::move(event));
}

const std::vector<std::uint32_t>& Simulator::receivers(std::uint32_t sender, Stream stream,
                                                       const Route& route) {
    std::uint64_t key = (static_cast<std::uint64_t>(sender) << 40) ^
                        (static_cast<std::uint64_t>(stream) << 32) ^
                        (static_cast<std::uint64_t>(route.mode) << 30) ^
                        (static_cast<std::uint64_t>(route.partition & 0x7fff) << 15) ^
                        static_cast<std::uint64_t>(route.instance & 0x7fff);
    auto cached = route_cache_.find(key);
    if (cached != route_cache_.end()) return cached->second;

    const auto& from = slots_.at(sender);
    std::vector<std::uint32_t> out;
    if (stream == Stream::submit) {
        if (from.id.role != Role::client)
            throw topology_error("only clients may insert commands into request queues");
        out.push_back(ordinal(NodeId{Role::request_source, 0,
                                     static_cast<std::uint16_t>(route.instance)}));
    } else if (stream == Stream::client_reply) {
        if (from.id.role != Role::reply_sink)
            throw topology_error("only reply sinks may answer clients");
        auto it = index_.find(
            NodeId{Role::client, 0, static_cast<std::uint16_t>(route.instance)});
        if (it != index_.end()) out.push_back(it->second);
    } else {
        auto routes = routes_by_sender_.find({from.stage, stream});
        if (routes == routes_by_sender_.end())
            throw topology_error("stream " + std::string(stream_name(stream)) +
                                 " is not declared for " + to_string(from.id));
        for (const auto* spec : routes->second) {
            const auto* to = topology_.find_stage(spec->to_stage);
            bool shared = !is_partitioned(to->role);
            switch (route.mode) {
                case RoutingMode::broadcast:
                    for (int i = 0; i < to->instance_count; ++i)
                        out.push_back(ordinal(NodeId{to->role, static_cast<std::uint16_t>(to->partition),
                                                     static_cast<std::uint16_t>(i)}));
                    break;
                case RoutingMode::partition:
                    if (!shared && to->partition != route.partition) break;
                    for (int i = 0; i < to->instance_count; ++i)
                        out.push_back(ordinal(NodeId{to->role, static_cast<std::uint16_t>(to->partition),
                                                     static_cast<std::uint16_t>(i)}));
                    break;
                case RoutingMode::direct:
                    if (!shared && to->partition != route.partition) break;
                    if (route.instance < 0 || route.instance >= to->instance_count)
                        throw topology_error("direct route to missing instance of " + to->name);
                    out.push_back(ordinal(NodeId{to->role, static_cast<std::uint16_t>(to->partition),
                                                 static_cast<std::uint16_t>(route.instance)}));
                    break;
            }
        }
    }
    return route_cache_.emplace(key, std::move(out)).first->second;
}

bool Simulator::link_blocked(std::uint32_t a, std::uint32_t b) const {
    if (network_.blocks.empty()) return false;
    const auto& ia = slots_[a].id;
    const auto& ib = slots_[b].id;
    for (const auto& block : network_.blocks) {
        if (now_ < block.from || now_ >= block.to) continue;
        if ((block.a == ia && block.b == ib) || (block.a == ib && block.b == ia)) return true;
    }
    return false;
}

void Simulator::transmit(std::uint32_t sender, std::uint32_t target, Stream stream,
                         const std::shared_ptr<const Tuple>& tuple, EventKind kind,
                         bool reliable) {
    auto make = [&](Tick delay) {
        Event e;
        e.tick = now_ + delay;
        e.sender = sender;
        e.counter = slots_[sender].counter++;
        e.kind = kind;
        e.target = target;
        e.incarnation = slots_[target].incarnation;
        e.stream = stream;
        e.tuple = tuple;
        schedule(std::move(e));
    };
    if (reliable) {
        make(1);
        return;
    }
    if (link_blocked(sender, target)) return;
    bool synchronous = now_ >= network_.gst;
    if (!synchronous && network_.loss > 0.0 &&
        std::bernoulli_distribution(network_.loss)(rng_))
        return;
    Tick max = synchronous ? network_.max_delay : network_.pre_gst_max_delay;
    std::uniform_int_distribution<Tick> delay(network_.min_delay, max);
    make(delay(rng_));
    if (network_.duplication > 0.0 && std::bernoulli_distribution(network_.duplication)(rng_))
        make(delay(rng_));
}

void Simulator::emit(const NodeId& from, Stream stream, Tuple tuple, Route route) {
    auto sender = ordinal(from);
    const auto& targets = receivers(sender, stream, route);
    if (targets.empty()) return;
    auto shared = std::make_shared<const Tuple>(std::move(tuple));
    bool feedback = stream == Stream::completion || stream == Stream::gc_feedback ||
                    stream == Stream::view_feedback || stream == Stream::record_feedback;
    auto kind = (feedback || stream == Stream::submit) ? EventKind::queue_insert
                                                       : EventKind::deliver;
    for (auto target : targets) transmit(sender, target, stream, shared, kind, feedback);
}

void Simulator::invoke(Slot& slot, const std::function<void(Node&, Context&)>& fn) {
    NodeContext ctx(*this, slot);
    fn(*slot.node, ctx);
    if (slot.alive && slot.node) recorder_.window_sample(slot.id, slot.node->slot_count());
}

void Simulator::dispatch(const Event& event) {
    if (event.kind == EventKind::action) {
        recorder_.trace(now_, "action", NodeId{}, 0);
        actions_.at(event.action)(*this);
        return;
    }
    auto& slot = slots_.at(event.target);
    switch (event.kind) {
        case EventKind::crash:
            if (!slot.alive) return;
            slot.alive = false;
            slot.node.reset();
            ++slot.incarnation;
            recorder_.trace(now_, "crash", slot.id, 0);
            return;
        case EventKind::restart:
            if (slot.alive) return;
            slot.alive = true;
            slot.restarted = true;
            ++slot.incarnation;
            slot.node = factory_(slot.id);
            recorder_.trace(now_, "restart", slot.id, 0);
            invoke(slot, [](Node& node, Context& ctx) { node.start(ctx); });
            return;
        case EventKind::timer:
            if (!slot.alive || event.incarnation != slot.incarnation) return;
            if (recorder_.tracing())
                recorder_.trace(now_, "timer", slot.id, event.timer_id);
            invoke(slot, [&](Node& node, Context& ctx) { node.on_timer(ctx, event.timer_id); });
            return;
        case EventKind::deliver:
        case EventKind::queue_insert: {
            if (!slot.alive || event.incarnation != slot.incarnation) return;
            const auto& from = event.sender == harness_ ? NodeId{} : slots_.at(event.sender).id;
            ++delivered_[slot.id.role];
            if (recorder_.tracing()) {
                recorder_.trace(now_, event_kind_name(event.kind), slot.id, digest(*event.tuple),
                                "from=" + to_string(from) + " stream=" +
                                    std::string(stream_name(event.stream)) +
                                    " type=" + std::string(tuple_name(*event.tuple)));
            }
            invoke(slot, [&](Node& node, Context& ctx) { node.on_tuple(ctx, from, *event.tuple); });
            return;
        }
        case EventKind::action:
            return;
    }
}

std::size_t Simulator::run(Tick until) {
    start();
    std::size_t processed = 0;
    while (!queue_.empty() && queue_.top().tick <= until) {
        Event event = queue_.top();
        queue_.pop();
        now_ = event.tick;
        dispatch(event);
        ++processed;
    }
    if (now_ < until) now_ = until;
    return processed;
}

}  // namespace tara
