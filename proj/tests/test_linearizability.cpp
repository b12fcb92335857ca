#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "tara/kv_service.hpp"
#include "tara/linearizability.hpp"

using namespace tara;

namespace {

using History = std::map<CommandId, HistoryEntry>;

Bytes res(bool found, std::string value = {}) { return kv::encode_result({found, std::move(value)}); }

void add(History& h, ClientId c, std::uint64_t t, Bytes op, Tick inv, std::optional<Tick> done,
         Bytes result = {}) {
    h[CommandId{c, t}] = HistoryEntry{CommandId{c, t}, std::move(op), inv, done, std::move(result)};
}

// Exhaustive oracle: some subset of pending operations plus every completed
// one, in some order that respects real time and per-client timestamps,
// replays to the recorded results on a single map.
bool oracle_linearizable(const History& h) {
    std::vector<const HistoryEntry*> done;
    std::vector<const HistoryEntry*> pending;
    for (const auto& [_, e] : h) (e.completed ? done : pending).push_back(&e);

    auto precedes = [](const HistoryEntry* a, const HistoryEntry* b) {
        if (a->id.client == b->id.client && a->id.timestamp < b->id.timestamp) return true;
        return a->completed && *a->completed < b->invoked;
    };

    for (std::size_t mask = 0; mask < (std::size_t{1} << pending.size()); ++mask) {
        std::vector<const HistoryEntry*> ops = done;
        for (std::size_t i = 0; i < pending.size(); ++i)
            if (mask & (std::size_t{1} << i)) ops.push_back(pending[i]);
        std::vector<std::size_t> order(ops.size());
        std::iota(order.begin(), order.end(), 0);
        do {
            bool ok = true;
            for (std::size_t i = 0; i < order.size() && ok; ++i)
                for (std::size_t j = i + 1; j < order.size() && ok; ++j)
                    if (precedes(ops[order[j]], ops[order[i]])) ok = false;
            std::map<std::string, std::string> data;
            for (std::size_t i = 0; i < order.size() && ok; ++i) {
                const auto* e = ops[order[i]];
                auto r = kv::apply(data, *kv::decode_op(e->op));
                if (e->completed && kv::encode_result(r) != e->result) ok = false;
            }
            if (ok) return true;
        } while (std::next_permutation(order.begin(), order.end()));
    }
    return false;
}

// Small client histories: each client issues sequential operations, the last
// of which may never complete. Results come from a random serialization that
// is sometimes corrupted.
History random_history(std::mt19937_64& rng) {
    History h;
    int clients = 1 + static_cast<int>(rng() % 3);
    int value = 0;
    std::vector<std::pair<CommandId, Tick>> order;
    for (int c = 1; c <= clients; ++c) {
        Tick t = static_cast<Tick>(rng() % 4);
        int n = 1 + static_cast<int>(rng() % 3);
        for (int k = 1; k <= n; ++k) {
            std::string key = (rng() % 2) ? "a" : "b";
            Bytes op;
            switch (rng() % 3) {
                case 0: op = kv::put(key, "v" + std::to_string(++value)); break;
                case 1: op = kv::get(key); break;
                default: op = kv::del(key); break;
            }
            Tick inv = t;
            Tick end = inv + static_cast<Tick>(rng() % 5);
            bool pending = k == n && rng() % 4 == 0;
            add(h, static_cast<ClientId>(c), static_cast<std::uint64_t>(k), op, inv,
                pending ? std::nullopt : std::optional<Tick>(end));
            // Lin point somewhere inside [inv, end].
            order.emplace_back(CommandId{static_cast<ClientId>(c), static_cast<std::uint64_t>(k)},
                               inv + static_cast<Tick>(rng() % static_cast<std::uint64_t>(end - inv + 1)));
            t = end + static_cast<Tick>(rng() % 3);
        }
    }
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
    std::map<std::string, std::string> data;
    for (const auto& [id, _] : order) {
        auto& e = h[id];
        auto r = kv::apply(data, *kv::decode_op(e.op));
        if (e.completed) e.result = kv::encode_result(r);
    }
    if (rng() % 2 == 0) {
        auto it = std::next(h.begin(), static_cast<std::ptrdiff_t>(rng() % h.size()));
        if (it->second.completed) it->second.result = res(rng() % 2 == 0, "v" + std::to_string(rng() % (value + 1)));
    }
    return h;
}

}  // namespace

TEST_CASE("a sequential history is linearizable") {
    History h;
    add(h, 1, 1, kv::put("x", "1"), 0, 2, res(false));
    add(h, 1, 2, kv::get("x"), 3, 5, res(true, "1"));
    add(h, 2, 1, kv::put("x", "2"), 6, 8, res(true, "1"));
    add(h, 2, 2, kv::del("x"), 9, 10, res(true, "2"));
    add(h, 1, 3, kv::get("x"), 11, 12, res(false));
    auto report = check_kv_history(h);
    CHECK(report.verdict == Verdict::linearizable);
    CHECK(report.keys == 1);
    CHECK(report.operations == 5);
}

TEST_CASE("a stale read is a violation") {
    History h;
    add(h, 1, 1, kv::put("x", "1"), 0, 2, res(false));
    add(h, 2, 1, kv::put("x", "2"), 3, 5, res(true, "1"));
    add(h, 3, 1, kv::get("x"), 6, 7, res(true, "1"));
    auto report = check_kv_history(h);
    CHECK(report.verdict == Verdict::violation);
    CHECK(report.detail == "x");
}

TEST_CASE("concurrent operations may take either order") {
    History h;
    add(h, 1, 1, kv::put("x", "1"), 0, 10, res(false));
    add(h, 2, 1, kv::get("x"), 1, 2, res(true, "1"));
    CHECK(check_kv_history(h).verdict == Verdict::linearizable);
}

TEST_CASE("equal ticks are concurrent, except within a client") {
    History h;
    add(h, 1, 1, kv::put("x", "1"), 0, 5, res(false));
    add(h, 2, 1, kv::get("x"), 5, 6, res(false));
    CHECK(check_kv_history(h).verdict == Verdict::linearizable);

    History same;
    add(same, 1, 1, kv::put("x", "1"), 0, 5, res(false));
    add(same, 1, 2, kv::get("x"), 5, 6, res(false));
    CHECK(check_kv_history(same).verdict == Verdict::violation);
}

TEST_CASE("pending operations may or may not take effect") {
    History h;
    add(h, 1, 1, kv::put("x", "1"), 0, std::nullopt);
    add(h, 2, 1, kv::get("x"), 5, 6, res(true, "1"));
    add(h, 3, 1, kv::get("y"), 5, 6, res(false));
    CHECK(check_kv_history(h).verdict == Verdict::linearizable);
    add(h, 2, 2, kv::get("x"), 7, 8, res(false));
    CHECK(check_kv_history(h).verdict == Verdict::violation);
}

TEST_CASE("budget exhaustion is inconclusive, bad results are violations") {
    History h;
    // Commuting reads force a walk over every subset before the impossible
    // read is found out.
    for (ClientId c = 1; c <= 12; ++c) add(h, c, 1, kv::get("x"), 0, 100, res(false));
    add(h, 13, 1, kv::get("x"), 0, 100, res(true, "z"));
    CHECK(check_kv_history(h, 50).verdict == Verdict::inconclusive);
    CHECK(check_kv_history(h).verdict == Verdict::violation);

    History bad;
    add(bad, 1, 1, kv::get("x"), 0, 1, "not a result");
    CHECK(check_kv_history(bad).verdict == Verdict::violation);
}

TEST_CASE("checker agrees with permutation enumeration on small histories") {
    std::mt19937_64 rng(31337);
    int violations = 0;
    for (int i = 0; i < 3000; ++i) {
        auto h = random_history(rng);
        bool expect = oracle_linearizable(h);
        auto verdict = check_kv_history(h).verdict;
        REQUIRE(verdict != Verdict::inconclusive);
        CAPTURE(i);
        REQUIRE((verdict == Verdict::linearizable) == expect);
        if (!expect) ++violations;
    }
    // Both verdicts must be exercised.
    CHECK(violations > 100);
    CHECK(violations < 2900);
}
