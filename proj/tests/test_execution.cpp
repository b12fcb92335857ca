#include <doctest.h>

#include "support.hpp"
#include "tara/kv_service.hpp"

using namespace tara;
using tara::testing::FakeContext;
using tara::testing::make_request;

namespace {

const NodeId kExec0{Role::executor, 0, 0};
const NodeId kExec1{Role::executor, 0, 1};

std::unique_ptr<Executor> make_executor(const NodeId& id, const ProtocolParams& params) {
    return std::make_unique<Executor>(id, params, std::make_unique<KvService>());
}

Commit vote(std::uint16_t committer, SeqNo s, ViewNo v, const Request& req, std::uint16_t partition = 0) {
    return Commit{partition, committer, s, v, req};
}

Request put_req(std::uint64_t q, ClientId client, std::uint64_t t, std::string_view value) {
    return make_request(0, q, client, t, kv::put("k", value));
}

void commit_all(Executor& e, FakeContext& ctx, SeqNo s, const Request& req, std::uint16_t partition = 0) {
    for (std::uint16_t c = 0; c < 3; ++c) e.on_commit(ctx, vote(c, s, 0, req, partition));
}

}  // namespace

TEST_CASE("f+1 matching commits execute, f do not") {
    ProtocolParams params;
    FakeContext ctx(kExec0, params);
    auto e = make_executor(kExec0, params);
    e->start(ctx);
    auto req = put_req(1, 5, 1, "a");
    e->on_commit(ctx, vote(0, 0, 0, req));
    CHECK(e->next_exec() == 0);
    e->on_commit(ctx, vote(0, 0, 0, req));
    CHECK(e->next_exec() == 0);
    e->on_commit(ctx, vote(2, 0, 0, req));
    CHECK(e->next_exec() == 1);
    auto replies = ctx.emitted_of<Reply>(Stream::reply);
    REQUIRE(replies.size() == 1);
    CHECK(replies[0].number == 1);
    REQUIRE(replies[0].items.size() == 1);
    CHECK(kv::decode_result(replies[0].items[0].result) == kv::Result{false, ""});
}

TEST_CASE("execution waits for gaps and then runs in order") {
    ProtocolParams params;
    FakeContext ctx(kExec0, params);
    auto e = make_executor(kExec0, params);
    e->start(ctx);
    commit_all(*e, ctx, 1, put_req(2, 5, 2, "second"));
    CHECK(e->next_exec() == 0);
    commit_all(*e, ctx, 0, put_req(1, 5, 1, "first"));
    CHECK(e->next_exec() == 2);
    const auto& kv = dynamic_cast<const KvService&>(e->app());
    CHECK(kv.data().at("k") == "second");
    auto replies = ctx.emitted_of<Reply>(Stream::reply);
    REQUIRE(replies.size() == 2);
    CHECK(replies[0].number == 1);
    CHECK(replies[1].number == 2);
}

TEST_CASE("votes from different views or requests do not combine") {
    ProtocolParams params;
    FakeContext ctx(kExec0, params);
    auto e = make_executor(kExec0, params);
    e->start(ctx);
    auto a = put_req(1, 5, 1, "a");
    auto b = put_req(2, 5, 2, "b");
    e->on_commit(ctx, vote(0, 0, 0, a));
    e->on_commit(ctx, vote(1, 0, 1, a));
    CHECK(e->next_exec() == 0);
    e->on_commit(ctx, vote(2, 0, 1, b));
    CHECK(e->next_exec() == 0);
    // Committer 0 moves to view 1 and now agrees with committer 1.
    e->on_commit(ctx, vote(0, 0, 1, a));
    CHECK(e->next_exec() == 1);
}

TEST_CASE("commits from views below the adopted view are ignored") {
    ProtocolParams params;
    FakeContext ctx(kExec0, params);
    auto e = make_executor(kExec0, params);
    e->start(ctx);
    e->on_view(ctx, 0, 0, 2);
    e->on_view(ctx, 1, 0, 2);
    CHECK(e->view(0) == 2);
    commit_all(*e, ctx, 0, put_req(1, 5, 1, "a"));
    CHECK(e->next_exec() == 0);
}

TEST_CASE("deduplication: fresh, duplicate, stale") {
    ProtocolParams params;
    FakeContext ctx(kExec0, params);
    auto e = make_executor(kExec0, params);

    auto fresh = e->execute_request(ctx, 0, put_req(1, 7, 2, "x"));
    REQUIRE(fresh.has_value());
    CHECK(e->state().app_invocations == 1);
    REQUIRE(fresh->items.size() == 1);

    // Same command in a later request: cached result, no re-execution.
    auto dup = e->execute_request(ctx, 0, put_req(2, 7, 2, "x"));
    REQUIRE(dup.has_value());
    CHECK(e->state().app_invocations == 1);
    REQUIRE(dup->items.size() == 1);
    CHECK(dup->items[0].result == fresh->items[0].result);

    // Older timestamp: dropped without a reply item.
    auto stale = e->execute_request(ctx, 0, put_req(3, 7, 1, "y"));
    REQUIRE(stale.has_value());
    CHECK(stale->items.empty());
    CHECK(e->state().app_invocations == 1);
    CHECK(e->state().executed.at(7) == 2);
    CHECK(e->next_exec() == 3);
    CHECK(e->state().agreed.at({0, 0}) == 3);
}

TEST_CASE("no-ops advance the position without a reply") {
    ProtocolParams params;
    FakeContext ctx(kExec0, params);
    auto e = make_executor(kExec0, params);
    CHECK_FALSE(e->execute_request(ctx, 0, Request::noop()).has_value());
    CHECK(e->next_exec() == 1);
    CHECK(e->state().app_invocations == 0);
}

TEST_CASE("checkpoints are written at multiples of CP") {
    ProtocolParams params;
    params.checkpoint_interval = 2;
    params.window = 4;
    FakeContext ctx(kExec0, params);
    auto e = make_executor(kExec0, params);
    e->start(ctx);
    for (SeqNo s = 0; s < 5; ++s) commit_all(*e, ctx, s, put_req(static_cast<std::uint64_t>(s) + 1, 1, static_cast<std::uint64_t>(s) + 1, "v"));
    CHECK(e->next_exec() == 4);  // window [0,4) with no stability yet
    auto cps = ctx.emitted_of<Checkpoint>(Stream::checkpoint);
    REQUIRE(cps.size() == 3);
    CHECK(cps[0].sequence == 0);
    CHECK(cps[1].sequence == 2);
    CHECK(cps[2].sequence == 4);
    CHECK(ctx.checkpoints().copies_at(2) == 1);
    CHECK_FALSE(ctx.checkpoints().any_at(1).has_value());
    CHECK(ctx.checkpoints().any_at(4)->app_snapshot == e->app().snapshot());
}

TEST_CASE("a restarted executor catches up from the stable checkpoint") {
    ProtocolParams params;
    params.checkpoint_interval = 2;
    CheckpointStore store;
    FakeContext ctx0(kExec0, params);
    ctx0.share_store(store);
    auto leader = make_executor(kExec0, params);
    leader->start(ctx0);
    for (SeqNo s = 0; s < 5; ++s)
        commit_all(*leader, ctx0, s, put_req(static_cast<std::uint64_t>(s) + 1, 1, static_cast<std::uint64_t>(s) + 1, "v" + std::to_string(s)));
    REQUIRE(leader->next_exec() == 5);

    FakeContext ctx1(kExec1, params, true);
    ctx1.share_store(store);
    auto fresh = make_executor(kExec1, params);
    fresh->start(ctx1);
    CHECK(fresh->waiting_for_catch_up());
    commit_all(*fresh, ctx1, 4, put_req(5, 1, 5, "v4"));
    CHECK(fresh->next_exec() == 0);

    fresh->on_stable(ctx1, 0, 4);
    CHECK(fresh->waiting_for_catch_up());
    fresh->on_stable(ctx1, 1, 4);
    CHECK_FALSE(fresh->waiting_for_catch_up());
    // Loaded at 4, then ran the buffered commit for position 4.
    CHECK(fresh->next_exec() == 5);
    CHECK(fresh->app().snapshot() == leader->app().snapshot());
    CHECK(fresh->state().executed == leader->state().executed);
    CHECK(fresh->state().agreed == leader->state().agreed);
    CHECK(ctx1.recorder().checkpoint_loads().size() == 1);
}

TEST_CASE("catch-up without a stored blob retries later") {
    ProtocolParams params;
    params.checkpoint_interval = 2;
    FakeContext ctx(kExec1, params, true);
    auto e = make_executor(kExec1, params);
    e->start(ctx);
    ctx.timers.clear();
    CHECK_FALSE(e->catch_up(ctx, 6));
    REQUIRE(ctx.timers.size() == 1);
    CHECK(ctx.timers[0].second == 2);
    CHECK(e->waiting_for_catch_up());
}

TEST_CASE("partitioned commits execute in merged order") {
    ProtocolParams params;
    params.partitions = 2;
    FakeContext ctx(kExec0, params);
    auto e = make_executor(kExec0, params);
    e->start(ctx);
    commit_all(*e, ctx, 0, make_request(0, 2, 1, 2, kv::put("k", "p1")), 1);
    CHECK(e->next_exec() == 0);
    commit_all(*e, ctx, 0, make_request(0, 1, 1, 1, kv::put("k", "p0")), 0);
    CHECK(e->next_exec() == 2);
    CHECK(dynamic_cast<const KvService&>(e->app()).data().at("k") == "p1");
    CHECK(e->actual_for(0).agreed.at(0) == 1);
    CHECK(e->actual_for(1).agreed.at(0) == 2);
}

TEST_CASE("reply sink fans out per client and acknowledges the source") {
    ProtocolParams params;
    FakeContext ctx(NodeId{Role::reply_sink, 0, 1}, params);
    ReplySink sink;
    Reply reply{0, 2, 1, 9, {ReplyItem{CommandId{3, 1}, "a"}, ReplyItem{CommandId{4, 1}, "b"}}};
    sink.on_tuple(ctx, NodeId{}, reply);
    REQUIRE(ctx.emitted.size() == 3);
    CHECK(ctx.emitted[0].stream == Stream::client_reply);
    CHECK(ctx.emitted[0].route.instance == 3);
    CHECK(ctx.emitted[1].route.instance == 4);
    CHECK(ctx.emitted[2].stream == Stream::completion);
    CHECK(ctx.emitted[2].route.instance == 1);
    CHECK(std::get<Reply>(ctx.emitted[2].tuple).items.empty());
}

TEST_CASE("kv operations return the prior value") {
    KvService kv;
    CHECK(kv::decode_result(kv.apply(kv::get("a"))) == kv::Result{false, ""});
    CHECK(kv::decode_result(kv.apply(kv::put("a", "1"))) == kv::Result{false, ""});
    CHECK(kv::decode_result(kv.apply(kv::put("a", "2"))) == kv::Result{true, "1"});
    CHECK(kv::decode_result(kv.apply(kv::del("a"))) == kv::Result{true, "2"});
    CHECK(kv::decode_result(kv.apply(kv::get("a"))) == kv::Result{false, ""});
    CHECK(kv.apply("garbage") == "E");
    kv.apply(kv::put("b", std::string("\0x", 2)));
    KvService copy;
    copy.restore(kv.snapshot());
    CHECK(copy.data() == kv.data());
}
