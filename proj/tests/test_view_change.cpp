#include <doctest.h>

#include <set>

#include "support.hpp"
#include "tara/view_change.hpp"

using namespace tara;
using tara::testing::FakeContext;

namespace {

const NodeId kController{Role::controller, 0, 0};

// Drives a controller at report_period granularity. Executors listed in
// `progressing` run every target as soon as it is issued.
struct StallRig {
    ProtocolParams params;
    Controller controller{kController, params};
    std::uint64_t issued = 0;
    std::map<std::uint16_t, std::uint64_t> done;

    std::optional<ViewNo> run(Tick from, Tick to, const std::set<std::uint16_t>& progressing,
                              bool issue = true) {
        for (Tick t = from; t <= to; t += params.report_period) {
            if (issue) ++issued;
            controller.on_target(t, Target{0, 0, issued});
            for (std::uint16_t e = 0; e < 3; ++e) {
                if (progressing.count(e)) done[e] = issued;
                controller.on_actual(t, Actual{0, e, {{0, done[e]}}});
            }
            if (auto v = controller.evaluate(t)) return v;
        }
        return std::nullopt;
    }
};

}  // namespace

TEST_CASE("f+1 stalled executors trigger the next view") {
    StallRig rig;
    CHECK_FALSE(rig.run(0, 40, {0, 1, 2}).has_value());
    auto fired = rig.run(45, 200, {0});
    REQUIRE(fired.has_value());
    CHECK(*fired == 1);
    CHECK(rig.controller.local_view() == 1);
}

TEST_CASE("the stall must last the full timeout") {
    StallRig rig;
    rig.run(0, 40, {0, 1, 2});
    // Executors 1 and 2 were last caught up at tick 40.
    Tick fire_at = 40 + rig.params.stall_timeout;
    CHECK_FALSE(rig.run(45, fire_at - rig.params.report_period, {0}).has_value());
    CHECK(rig.run(fire_at, fire_at, {0}).has_value());
}

TEST_CASE("a single stalled executor is not enough") {
    StallRig rig;
    CHECK_FALSE(rig.run(0, 1000, {0, 1}).has_value());
    CHECK(rig.controller.local_view() == 0);
}

TEST_CASE("an idle system never changes view") {
    StallRig rig;
    rig.run(0, 20, {0, 1, 2});
    CHECK_FALSE(rig.run(25, 2000, {}, false).has_value());
}

TEST_CASE("a silent source's last target causes at most one view change") {
    ProtocolParams params;
    Controller c(kController, params);
    c.on_target(0, Target{0, 0, 10});
    int fired = 0;
    for (Tick t = 0; t <= 1000; t += params.report_period) {
        for (std::uint16_t e = 0; e < 3; ++e) c.on_actual(t, Actual{0, e, {}});
        if (c.evaluate(t)) ++fired;
    }
    CHECK(fired == 1);
}

TEST_CASE("repeated stalls keep raising the view") {
    StallRig rig;
    std::vector<ViewNo> fired;
    for (Tick t = 0; t < 1000; t += rig.params.report_period) {
        if (auto v = rig.run(t, t, {})) fired.push_back(*v);
    }
    REQUIRE(fired.size() >= 2);
    for (std::size_t i = 0; i < fired.size(); ++i) CHECK(fired[i] == static_cast<ViewNo>(i) + 1);
}

TEST_CASE("controllers adopt a view from f+1 reports") {
    ProtocolParams params;
    Controller c(kController, params);
    c.on_view(0, 1, 3);
    CHECK(c.adopted_view() == 0);
    CHECK(c.local_view() == 0);
    c.on_view(0, 2, 3);
    CHECK(c.adopted_view() == 3);
    CHECK(c.local_view() == 3);
}

TEST_CASE("a restarted controller waits for the current view") {
    ProtocolParams params;
    FakeContext ctx(kController, params, true);
    Controller c(kController, params);
    c.start(ctx);
    for (Tick t = 0; t <= 400; t += params.report_period) {
        c.on_target(t, Target{0, 0, static_cast<std::uint64_t>(t) + 1});
        CHECK_FALSE(c.evaluate(t).has_value());
    }
    c.on_view(400, 0, 4);
    c.on_view(400, 1, 4);
    CHECK(c.local_view() == 4);
    std::optional<ViewNo> fired;
    for (Tick t = 405; t <= 800 && !fired; t += params.report_period) {
        c.on_target(t, Target{0, 0, static_cast<std::uint64_t>(t) + 1});
        fired = c.evaluate(t);
    }
    REQUIRE(fired.has_value());
    CHECK(*fired == 5);
}

TEST_CASE("view source announces only increases") {
    ProtocolParams params;
    FakeContext ctx(NodeId{Role::view_source, 0, 1}, params);
    ViewSource vs;
    vs.start(ctx);
    vs.on_tuple(ctx, NodeId{}, View{0, 0, 2});
    vs.on_tuple(ctx, NodeId{}, View{0, 1, 1});
    vs.on_tuple(ctx, NodeId{}, View{0, 1, 2});
    auto out = ctx.emitted_of<View>(Stream::view_announce);
    REQUIRE(out.size() == 1);
    CHECK(out[0] == View{0, 1, 2});
    CHECK(vs.view() == 2);
}

TEST_CASE("record source routes to the proposer of the target view") {
    ProtocolParams params;
    FakeContext ctx(NodeId{Role::record_source, 1, 0}, params);
    RecordSource rs;
    rs.on_tuple(ctx, NodeId{}, RecordTuple{1, 2, 3, 0, {}});
    rs.on_tuple(ctx, NodeId{}, RecordTuple{1, 2, 4, 0, {}});
    REQUIRE(ctx.emitted.size() == 2);
    CHECK(ctx.emitted[0].route.partition == 1);
    CHECK(ctx.emitted[0].route.instance == 1);
    CHECK(ctx.emitted[1].route.instance == 0);
}
