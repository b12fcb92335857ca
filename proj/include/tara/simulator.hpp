#pragma once

// Deterministic discrete-event substrate. Hosts one Node object per
// instance of every stage, routes emitted tuples along the topology's
// streams through a seeded network model, and crashes/restarts instances.
//
// Events are processed in (tick, sender ordinal, per-sender emission
// counter) order, so a run is a pure function of seed and configuration.

#include <functional>
#include <map>
#include <memory>
#include <queue>
#include <random>
#include <unordered_map>
#include <vector>

#include "tara/messages.hpp"
#include "tara/recorder.hpp"
#include "tara/topology.hpp"
#include "tara/types.hpp"

namespace tara {

class CheckpointStore;

using DurableStore = std::map<std::string, Bytes>;

struct NetworkModel {
    std::uint64_t seed = 1;
    Tick min_delay = 1;
    Tick max_delay = 3;          // bound after GST
    Tick pre_gst_max_delay = 3;  // bound before GST (reordering)
    double loss = 0.0;           // applies before GST only
    double duplication = 0.0;
    Tick gst = 0;

    struct Block {
        Tick from = 0;
        Tick to = 0;  // exclusive
        NodeId a;
        NodeId b;
    };
    std::vector<Block> blocks;  // symmetric link cuts

    void validate() const;
};

enum class EventKind : std::uint8_t { deliver, crash, restart, timer, queue_insert, action };

std::string_view event_kind_name(EventKind kind);

struct Route {
    RoutingMode mode = RoutingMode::broadcast;
    int partition = 0;
    int instance = 0;

    static Route broadcast() { return {RoutingMode::broadcast, 0, 0}; }
    static Route to_partition(int partition) { return {RoutingMode::partition, partition, 0}; }
    static Route direct(int partition, int instance) {
        return {RoutingMode::direct, partition, instance};
    }
};

// What a node sees of the substrate while handling one event.
class Context {
public:
    virtual ~Context() = default;

    virtual Tick now() const = 0;
    virtual const NodeId& self() const = 0;
    virtual const ProtocolParams& params() const = 0;
    // True for an instance started by restart_node rather than at deployment.
    virtual bool restarted() const = 0;

    virtual void emit(Stream stream, Tuple tuple, Route route) = 0;
    virtual void set_timer(Tick delay, std::uint64_t timer_id) = 0;

    virtual CheckpointStore& checkpoints() = 0;
    // Per-instance storage that survives crashes of this instance.
    virtual DurableStore& durable() = 0;
    virtual Recorder& recorder() = 0;
};

// One instance of a stage. Handlers run sequentially; instances never share
// mutable state.
class Node {
public:
    virtual ~Node() = default;

    virtual void start(Context&) {}
    virtual void on_tuple(Context& ctx, const NodeId& from, const Tuple& tuple) = 0;
    virtual void on_timer(Context&, std::uint64_t) {}
    // Consensus slots currently held, for the memory-bound audit.
    virtual std::size_t slot_count() const { return 0; }
};

using NodeFactory = std::function<std::unique_ptr<Node>(const NodeId&)>;

class Simulator {
public:
    Simulator(Topology topology, ProtocolParams params, NetworkModel network, NodeFactory factory,
              Recorder& recorder, CheckpointStore& store);
    ~Simulator();

    Simulator(const Simulator&) = delete;
    Simulator& operator=(const Simulator&) = delete;

    // Actors outside the graph (clients). Must be added before start().
    void add_actor(const NodeId& id, std::unique_ptr<Node> actor);

    // Deploys every instance at tick 0.
    void start();

    void crash_node(const NodeId& node, Tick at);
    // Restart takes effect at `at`; a live node is left alone.
    void restart_node(const NodeId& node, Tick at);
    void schedule_action(Tick at, std::function<void(Simulator&)> action);

    // Processes every event with tick <= until. Returns the number of events.
    std::size_t run(Tick until);

    // Routes a tuple from `from` along `stream`. Throws topology_error for a
    // stream not declared for the sender's stage.
    void emit(const NodeId& from, Stream stream, Tuple tuple, Route route);

    Tick now() const { return now_; }
    bool alive(const NodeId& node) const;
    Node* node(const NodeId& id);
    template <typename T>
    T* node_as(const NodeId& id) {
        return dynamic_cast<T*>(node(id));
    }

    const Topology& topology() const { return topology_; }
    const ProtocolParams& params() const { return params_; }
    Recorder& recorder() { return recorder_; }
    CheckpointStore& checkpoints() { return store_; }

    // Delivered tuples per receiving role.
    const std::map<Role, std::uint64_t>& delivered_counts() const { return delivered_; }

private:
    class NodeContext;

    struct Slot {
        NodeId id;
        std::unique_ptr<Node> node;
        bool alive = true;
        std::uint32_t incarnation = 0;
        std::uint64_t counter = 0;
        bool restarted = false;
        DurableStore durable;
        std::string stage;
    };

    struct Event {
        Tick tick = 0;
        std::uint32_t sender = 0;
        std::uint64_t counter = 0;
        EventKind kind = EventKind::deliver;
        std::uint32_t target = 0;
        std::uint32_t incarnation = 0;
        Stream stream = Stream::request;
        std::shared_ptr<const Tuple> tuple;
        std::uint64_t timer_id = 0;
        std::uint32_t action = 0;
    };

    struct EventOrder {
        bool operator()(const Event& a, const Event& b) const {
            if (a.tick != b.tick) return a.tick > b.tick;
            if (a.sender != b.sender) return a.sender > b.sender;
            return a.counter > b.counter;
        }
    };

    std::uint32_t ordinal(const NodeId& id) const;
    const std::vector<std::uint32_t>& receivers(std::uint32_t sender, Stream stream,
                                                const Route& route);
    void schedule(Event event);
    void transmit(std::uint32_t sender, std::uint32_t target, Stream stream,
                  const std::shared_ptr<const Tuple>& tuple, EventKind kind, bool reliable);
    bool link_blocked(std::uint32_t a, std::uint32_t b) const;
    void dispatch(const Event& event);
    void invoke(Slot& slot, const std::function<void(Node&, Context&)>& fn);

    Topology topology_;
    ProtocolParams params_;
    NetworkModel network_;
    NodeFactory factory_;
    Recorder& recorder_;
    CheckpointStore& store_;

    std::vector<Slot> slots_;
    std::map<NodeId, std::uint32_t> index_;
    std::uint32_t harness_;
    std::uint64_t harness_counter_ = 0;
    std::vector<std::function<void(Simulator&)>> actions_;
    std::priority_queue<Event, std::vector<Event>, EventOrder> queue_;
    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> route_cache_;
    std::map<std::pair<std::string, Stream>, std::vector<const RouteSpec*>> routes_by_sender_;
    std::map<Role, std::uint64_t> delivered_;
    std::mt19937_64 rng_;
    Tick now_ = 0;
    bool started_ = false;
};

}  // namespace tara
