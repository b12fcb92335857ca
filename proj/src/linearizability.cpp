#include "tara/linearizability.hpp"

#include <algorithm>
#include <optional>
#include <unordered_set>

#include "tara/kv_service.hpp"

namespace tara {

std::string_view verdict_name(Verdict verdict) {
    switch (verdict) {
        case Verdict::linearizable: return "linearizable";
        case Verdict::violation: return "violation";
        case Verdict::inconclusive: return "inconclusive";
    }
    return "?";
}

namespace {

struct KeyOp {
    CommandId id;
    kv::Op op;
    Tick invoked = 0;
    Tick completed = kNever;
    std::optional<kv::Result> result;  // empty while pending
};

struct BudgetExceeded {};

class KeySearch {
public:
    KeySearch(std::vector<KeyOp> ops, std::size_t& nodes, std::size_t budget)
        : ops_(std::move(ops)), done_((ops_.size() + 63) / 64, 0), nodes_(nodes), budget_(budget) {
        std::sort(ops_.begin(), ops_.end(), [](const KeyOp& a, const KeyOp& b) {
            return std::tie(a.invoked, a.id) < std::tie(b.invoked, b.id);
        });
        for (const auto& op : ops_)
            if (op.result) ++remaining_;
    }

    bool run() { return search(std::nullopt); }

private:
    bool is_done(std::size_t i) const { return (done_[i / 64] >> (i % 64)) & 1; }
    void flip(std::size_t i) { done_[i / 64] ^= std::uint64_t{1} << (i % 64); }

    bool search(const std::optional<std::string>& value) {
        if (remaining_ == 0) return true;
        if (++nodes_ > budget_) throw BudgetExceeded{};

        std::string memo(reinterpret_cast<const char*>(done_.data()), done_.size() * 8);
        memo.push_back(value ? '\1' : '\0');
        if (value) memo += *value;
        if (!seen_.insert(std::move(memo)).second) return false;

        // Everything invoked after the earliest outstanding response must
        // wait for that operation.
        Tick horizon = kNever;
        for (std::size_t i = 0; i < ops_.size(); ++i)
            if (!is_done(i) && ops_[i].result) horizon = std::min(horizon, ops_[i].completed);

        std::map<ClientId, std::uint64_t> first_of_client;
        for (std::size_t i = 0; i < ops_.size() && ops_[i].invoked <= horizon; ++i) {
            if (is_done(i)) continue;
            auto [it, inserted] = first_of_client.try_emplace(ops_[i].id.client, ops_[i].id.timestamp);
            if (!inserted) it->second = std::min(it->second, ops_[i].id.timestamp);
        }

        for (std::size_t i = 0; i < ops_.size() && ops_[i].invoked <= horizon; ++i) {
            if (is_done(i)) continue;
            const auto& op = ops_[i];
            if (first_of_client[op.id.client] != op.id.timestamp) continue;
            kv::Result before{value.has_value(), value.value_or(std::string{})};
            if (op.result && *op.result != before) continue;
            std::optional<std::string> next = value;
            if (op.op.kind == kv::OpKind::put) next = op.op.value;
            if (op.op.kind == kv::OpKind::del) next.reset();
            flip(i);
            if (op.result) --remaining_;
            bool ok = search(next);
            if (op.result) ++remaining_;
            flip(i);
            if (ok) return true;
        }
        return false;
    }

    std::vector<KeyOp> ops_;
    std::vector<std::uint64_t> done_;
    std::size_t remaining_ = 0;
    std::unordered_set<std::string> seen_;
    std::size_t& nodes_;
    std::size_t budget_;
};

}  // namespace

LinearizabilityReport check_kv_history(const std::map<CommandId, HistoryEntry>& history,
                                       std::size_t budget) {
    LinearizabilityReport report;
    std::map<std::string, std::vector<KeyOp>> per_key;
    for (const auto& [id, entry] : history) {
        auto op = kv::decode_op(entry.op);
        if (!op) continue;
        KeyOp k{id, *op, entry.invoked, kNever, std::nullopt};
        if (entry.completed) {
            k.completed = *entry.completed;
            k.result = kv::decode_result(entry.result);
            if (!k.result) {
                report.verdict = Verdict::violation;
                report.detail = "undecodable result for key " + op->key;
                return report;
            }
        }
        per_key[op->key].push_back(std::move(k));
        ++report.operations;
    }
    report.keys = per_key.size();

    bool inconclusive = false;
    for (auto& [key, ops] : per_key) {
        std::size_t nodes = 0;
        try {
            KeySearch search(std::move(ops), nodes, budget);
            if (!search.run()) {
                report.verdict = Verdict::violation;
                report.detail = key;
                return report;
            }
        } catch (const BudgetExceeded&) {
            inconclusive = true;
            report.detail = "search budget exhausted on key " + key;
        }
    }
    if (inconclusive) report.verdict = Verdict::inconclusive;
    return report;
}

}  // namespace tara
