#include "tara/recorder.hpp"

#include <charconv>
#include <ostream>
#include <sstream>

namespace tara {

namespace {

std::optional<std::string_view> field(std::string_view detail, std::string_view key) {
    std::size_t pos = 0;
    while (pos < detail.size()) {
        auto end = detail.find(' ', pos);
        if (end == std::string_view::npos) end = detail.size();
        auto token = detail.substr(pos, end - pos);
        if (token.size() > key.size() && token.substr(0, key.size()) == key &&
            token[key.size()] == '=')
            return token.substr(key.size() + 1);
        pos = end + 1;
    }
    return std::nullopt;
}

template <typename T>
T parse_number(std::string_view text, int base = 10) {
    T value{};
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw std::invalid_argument("bad number in trace: " + std::string(text));
    return value;
}

template <typename T>
T number_field(std::string_view detail, std::string_view key) {
    auto value = field(detail, key);
    if (!value) throw std::invalid_argument("missing trace field " + std::string(key));
    return parse_number<T>(*value);
}

std::string encode_applied(const std::vector<AppliedCommand>& applied) {
    std::string out;
    for (const auto& a : applied) {
        if (!out.empty()) out += ',';
        out += std::to_string(a.id.client) + '.' + std::to_string(a.id.timestamp) + '.' +
               to_hex(a.result);
    }
    return out.empty() ? "-" : out;
}

std::vector<AppliedCommand> decode_applied(std::string_view text) {
    std::vector<AppliedCommand> out;
    if (text == "-") return out;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto end = text.find(',', pos);
        if (end == std::string_view::npos) end = text.size();
        auto item = text.substr(pos, end - pos);
        auto d1 = item.find('.');
        auto d2 = item.find('.', d1 + 1);
        if (d1 == std::string_view::npos || d2 == std::string_view::npos)
            throw std::invalid_argument("bad applied entry in trace");
        AppliedCommand a;
        a.id.client = parse_number<ClientId>(item.substr(0, d1));
        a.id.timestamp = parse_number<std::uint64_t>(item.substr(d1 + 1, d2 - d1 - 1));
        a.result = from_hex(item.substr(d2 + 1));
        out.push_back(std::move(a));
        pos = end + 1;
    }
    return out;
}

}  // namespace

std::string format_trace_record(const TraceRecord& record) {
    std::string out = std::to_string(record.tick);
    out += '\t';
    out += record.kind;
    out += '\t';
    out += record.node;
    out += '\t';
    out += hex64(record.digest);
    out += '\t';
    out += record.detail;
    return out;
}

std::optional<TraceRecord> parse_trace_record(std::string_view line) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    for (int i = 0; i < 4; ++i) {
        auto tab = line.find('\t', pos);
        if (tab == std::string_view::npos) return std::nullopt;
        parts.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
    parts.push_back(line.substr(pos));
    try {
        TraceRecord r;
        r.tick = parse_number<Tick>(parts[0]);
        r.kind = parts[1];
        r.node = parts[2];
        r.digest = parse_number<std::uint64_t>(parts[3], 16);
        r.detail = parts[4];
        return r;
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

void Recorder::trace(Tick tick, std::string_view kind, const NodeId& node, std::uint64_t digest,
                     std::string detail) {
    if (!keep_trace_) return;
    records_.push_back(TraceRecord{tick, std::string(kind), to_string(node), digest,
                                   std::move(detail)});
}

void Recorder::proposed(Tick tick, const NodeId& node, int partition, SeqNo s, ViewNo v,
                        std::uint64_t request_digest) {
    proposals_[{partition, s}][v].insert(request_digest);
    if (keep_trace_)
        trace(tick, "propose", node, request_digest,
              "p=" + std::to_string(partition) + " s=" + std::to_string(s) +
                  " v=" + std::to_string(v));
}

void Recorder::committed(Tick tick, const NodeId& node, int partition, SeqNo s, ViewNo v,
                         std::uint64_t request_digest) {
    commit_votes_[{partition, s}][{v, request_digest}].insert(node.index);
    if (keep_trace_)
        trace(tick, "commit", node, request_digest,
              "p=" + std::to_string(partition) + " s=" + std::to_string(s) +
                  " v=" + std::to_string(v));
}

void Recorder::executed(Tick tick, const NodeId& node, SeqNo position,
                        std::uint64_t request_digest, std::vector<AppliedCommand> applied) {
    for (const auto& a : applied) {
        if (first_results_.emplace(a.id, a.result).second) first_exec_ticks_.push_back(tick);
    }
    if (keep_trace_)
        trace(tick, "execute", node, request_digest,
              "pos=" + std::to_string(position) + " applied=" + encode_applied(applied));
    auto& log = exec_logs_[node.index];
    auto [it, inserted] = log.try_emplace(position, ExecutionEntry{request_digest, applied});
    if (!inserted && (it->second.request_digest != request_digest || it->second.applied != applied)) {
        violation(tick, node,
                  "executor re-executed position " + std::to_string(position) +
                      " with a different outcome");
    }
}

void Recorder::checkpoint_written(Tick tick, const NodeId& node, SeqNo s) {
    ++checkpoints_written_;
    trace(tick, "cpwrite", node, 0, "s=" + std::to_string(s));
}

void Recorder::checkpoint_loaded(Tick tick, const NodeId& node, SeqNo s) {
    loads_.emplace_back(node.index, s);
    trace(tick, "cpload", node, 0, "s=" + std::to_string(s));
}

void Recorder::view_announced(Tick tick, const NodeId& node, int partition, ViewNo v) {
    max_view_ = std::max(max_view_, v);
    if (view_announcements_.emplace(partition, v).second)
        trace(tick, "view", node, 0, "p=" + std::to_string(partition) + " v=" + std::to_string(v));
}

void Recorder::window_sample(const NodeId& node, std::size_t slots) {
    auto& max = window_max_[node];
    max = std::max(max, slots);
}

void Recorder::client_invoked(Tick tick, const CommandId& id, const Bytes& op) {
    auto [it, inserted] = history_.try_emplace(id, HistoryEntry{id, op, tick, std::nullopt, {}});
    if (inserted && keep_trace_)
        trace(tick, "invoke", NodeId{Role::client, 0, static_cast<std::uint16_t>(id.client)}, 0,
              "t=" + std::to_string(id.timestamp) + " op=" + to_hex(op));
}

void Recorder::client_completed(Tick tick, const CommandId& id, const Bytes& result) {
    auto it = history_.find(id);
    if (it == history_.end() || it->second.completed) return;
    it->second.completed = tick;
    it->second.result = result;
    if (keep_trace_)
        trace(tick, "response", NodeId{Role::client, 0, static_cast<std::uint16_t>(id.client)}, 0,
              "t=" + std::to_string(id.timestamp) + " result=" + to_hex(result));
}

void Recorder::violation(Tick tick, const NodeId& node, std::string what) {
    violations_.push_back(to_string(node) + " @" + std::to_string(tick) + ": " + what);
    trace(tick, "violation", node, 0, std::move(what));
}

void Recorder::flush_window_records(Tick tick) {
    for (const auto& [node, max] : window_max_)
        trace(tick, "window", node, 0, "max=" + std::to_string(max));
}

Recorder Recorder::replay(const std::vector<TraceRecord>& records) {
    Recorder r(false);
    for (const auto& rec : records) {
        auto node = parse_node_id(rec.node);
        if (!node) continue;
        const auto& d = rec.detail;
        if (rec.kind == "propose") {
            r.proposed(rec.tick, *node, number_field<int>(d, "p"), number_field<SeqNo>(d, "s"),
                       number_field<ViewNo>(d, "v"), rec.digest);
        } else if (rec.kind == "commit") {
            r.committed(rec.tick, *node, number_field<int>(d, "p"), number_field<SeqNo>(d, "s"),
                        number_field<ViewNo>(d, "v"), rec.digest);
        } else if (rec.kind == "execute") {
            auto applied = field(d, "applied");
            r.executed(rec.tick, *node, number_field<SeqNo>(d, "pos"), rec.digest,
                       decode_applied(applied ? *applied : "-"));
        } else if (rec.kind == "cpwrite") {
            r.checkpoint_written(rec.tick, *node, number_field<SeqNo>(d, "s"));
        } else if (rec.kind == "cpload") {
            r.checkpoint_loaded(rec.tick, *node, number_field<SeqNo>(d, "s"));
        } else if (rec.kind == "view") {
            r.view_announced(rec.tick, *node, number_field<int>(d, "p"),
                             number_field<ViewNo>(d, "v"));
        } else if (rec.kind == "window") {
            r.window_sample(*node, number_field<std::size_t>(d, "max"));
        } else if (rec.kind == "invoke") {
            auto op = field(d, "op");
            r.client_invoked(rec.tick, CommandId{node->index, number_field<std::uint64_t>(d, "t")},
                             from_hex(op ? *op : ""));
        } else if (rec.kind == "response") {
            auto result = field(d, "result");
            r.client_completed(rec.tick,
                               CommandId{node->index, number_field<std::uint64_t>(d, "t")},
                               from_hex(result ? *result : ""));
        } else if (rec.kind == "violation") {
            r.violation(rec.tick, *node, rec.detail);
        }
    }
    return r;
}

SafetyAudit run_audits(const Recorder& recorder, const ProtocolParams& params) {
    SafetyAudit audit;
    auto fail = [](AuditCheck& check, std::string detail) {
        if (check.passed) check.detail = std::move(detail);
        check.passed = false;
    };

    // Position-wise agreement across executors.
    std::map<SeqNo, std::pair<int, const ExecutionEntry*>> canonical;
    for (const auto& [executor, log] : recorder.exec_logs()) {
        for (const auto& [position, entry] : log) {
            auto [it, inserted] = canonical.try_emplace(position, executor, &entry);
            if (inserted) continue;
            const auto& other = *it->second.second;
            if (other.request_digest != entry.request_digest || other.applied != entry.applied) {
                fail(audit.agreement, "executors " + std::to_string(it->second.first) + " and " +
                                          std::to_string(executor) + " disagree at position " +
                                          std::to_string(position));
            }
        }
    }

    // Proposal uniqueness per (s, v) and durability of committed requests.
    const std::size_t quorum = static_cast<std::size_t>(params.quorum());
    for (const auto& [slot, by_view] : recorder.proposals()) {
        for (const auto& [view, digests] : by_view) {
            if (digests.size() > 1)
                fail(audit.durability, "two requests proposed for p" + std::to_string(slot.first) +
                                           " s=" + std::to_string(slot.second) +
                                           " v=" + std::to_string(view));
        }
    }
    for (const auto& [slot, votes] : recorder.commit_votes()) {
        for (const auto& [vote, committers] : votes) {
            if (committers.size() < quorum) continue;
            auto proposals = recorder.proposals().find(slot);
            if (proposals == recorder.proposals().end()) continue;
            for (auto it = proposals->second.upper_bound(vote.first);
                 it != proposals->second.end(); ++it) {
                for (auto d : it->second) {
                    if (d != vote.second)
                        fail(audit.durability,
                             "request committed at p" + std::to_string(slot.first) +
                                 " s=" + std::to_string(slot.second) + " in view " +
                                 std::to_string(vote.first) + " replaced in view " +
                                 std::to_string(it->first));
                }
            }
        }
    }

    // Each command applied at one position only; replies carry the result of
    // that application.
    std::map<CommandId, SeqNo> applied_at;
    for (const auto& [position, entry] : canonical) {
        for (const auto& a : entry.second->applied) {
            auto [it, inserted] = applied_at.try_emplace(a.id, position);
            if (!inserted)
                fail(audit.exactly_once,
                     "command " + std::to_string(a.id.client) + "." +
                         std::to_string(a.id.timestamp) + " applied at positions " +
                         std::to_string(it->second) + " and " + std::to_string(position));
        }
    }
    for (const auto& [id, entry] : recorder.history()) {
        if (!entry.completed) continue;
        auto result = recorder.first_results().find(id);
        if (result == recorder.first_results().end()) {
            fail(audit.exactly_once, "client received a reply for an unexecuted command");
        } else if (result->second != entry.result) {
            fail(audit.exactly_once, "client reply differs from the executed result");
        }
    }

    for (const auto& [node, max] : recorder.window_max()) {
        if (static_cast<SeqNo>(max) > params.window)
            fail(audit.window_bound, to_string(node) + " held " + std::to_string(max) +
                                         " slots (W=" + std::to_string(params.window) + ")");
    }

    if (!recorder.violations().empty()) fail(audit.protocol, recorder.violations().front());
    return audit;
}

void print_audit(std::ostream& out, const SafetyAudit& audit) {
    auto line = [&](std::string_view name, const AuditCheck& check) {
        out << name << ": " << (check.passed ? "pass" : "FAIL");
        if (!check.passed) out << " (" << check.detail << ")";
        out << '\n';
    };
    line("agreement", audit.agreement);
    line("durability", audit.durability);
    line("exactly_once", audit.exactly_once);
    line("window_bound", audit.window_bound);
    line("protocol", audit.protocol);
}

}  // namespace tara
