#include "tara/messages.hpp"

#include <array>

namespace tara {

namespace {

constexpr std::array<std::string_view, 11> kTupleNames = {
    "Command", "Request", "Propose", "Commit", "Checkpoint", "Stable",
    "Target",  "Actual",  "View",    "Record", "Reply",
};

// Smallest possible encodings, used to bound element counts.
constexpr std::size_t kMinCommand = 4 + 8 + 4;
constexpr std::size_t kMinRequest = 4 + 8 + 4;
constexpr std::size_t kMinSlotRecord = 8 + 8 + kMinRequest;
constexpr std::size_t kMinReplyItem = 4 + 8 + 4;

void write_body(WireWriter& w, const Command& t) { w.command(t); }

void write_body(WireWriter& w, const Request& t) { w.request(t); }

void write_body(WireWriter& w, const Propose& t) {
    w.u16(t.partition);
    w.u16(t.proposer);
    w.i64(t.sequence);
    w.i64(t.view);
    w.request(t.request);
}

void write_body(WireWriter& w, const Commit& t) {
    w.u16(t.partition);
    w.u16(t.committer);
    w.i64(t.sequence);
    w.i64(t.view);
    w.request(t.request);
}

void write_body(WireWriter& w, const Checkpoint& t) {
    w.u16(t.executor);
    w.i64(t.sequence);
}

void write_body(WireWriter& w, const Stable& t) {
    w.u16(t.gc_source);
    w.i64(t.threshold);
}

void write_body(WireWriter& w, const Target& t) {
    w.u16(t.partition);
    w.u32(t.source);
    w.u64(t.number);
}

void write_body(WireWriter& w, const Actual& t) {
    w.u16(t.partition);
    w.u16(t.executor);
    w.count(t.agreed.size());
    for (const auto& [source, number] : t.agreed) {
        w.u32(source);
        w.u64(number);
    }
}

void write_body(WireWriter& w, const View& t) {
    w.u16(t.partition);
    w.u16(t.controller);
    w.i64(t.view);
}

void write_body(WireWriter& w, const RecordTuple& t) {
    w.u16(t.partition);
    w.u16(t.committer);
    w.i64(t.view_target);
    w.i64(t.window_floor);
    w.count(t.records.size());
    for (const auto& d : t.records) {
        w.i64(d.sequence);
        w.i64(d.view);
        w.request(d.request);
    }
}

void write_body(WireWriter& w, const Reply& t) {
    w.u16(t.partition);
    w.u16(t.executor);
    w.u32(t.source);
    w.u64(t.number);
    w.count(t.items.size());
    for (const auto& item : t.items) {
        w.u32(item.id.client);
        w.u64(item.id.timestamp);
        w.bytes(item.result);
    }
}

Tuple read_body(TupleTag tag, WireReader& r) {
    switch (tag) {
        case TupleTag::command:
            return r.command();
        case TupleTag::request:
            return r.request();
        case TupleTag::propose: {
            Propose t;
            t.partition = r.u16();
            t.proposer = r.u16();
            t.sequence = r.i64();
            t.view = r.i64();
            t.request = r.request();
            return t;
        }
        case TupleTag::commit: {
            Commit t;
            t.partition = r.u16();
            t.committer = r.u16();
            t.sequence = r.i64();
            t.view = r.i64();
            t.request = r.request();
            return t;
        }
        case TupleTag::checkpoint: {
            Checkpoint t;
            t.executor = r.u16();
            t.sequence = r.i64();
            return t;
        }
        case TupleTag::stable: {
            Stable t;
            t.gc_source = r.u16();
            t.threshold = r.i64();
            return t;
        }
        case TupleTag::target: {
            Target t;
            t.partition = r.u16();
            t.source = r.u32();
            t.number = r.u64();
            return t;
        }
        case TupleTag::actual: {
            Actual t;
            t.partition = r.u16();
            t.executor = r.u16();
            auto n = r.count(12);
            for (std::size_t i = 0; i < n; ++i) {
                auto source = r.u32();
                auto number = r.u64();
                if (!t.agreed.empty() && t.agreed.rbegin()->first >= source)
                    throw decode_error("Actual map keys not strictly ascending");
                t.agreed.emplace(source, number);
            }
            return t;
        }
        case TupleTag::view: {
            View t;
            t.partition = r.u16();
            t.controller = r.u16();
            t.view = r.i64();
            return t;
        }
        case TupleTag::record: {
            RecordTuple t;
            t.partition = r.u16();
            t.committer = r.u16();
            t.view_target = r.i64();
            t.window_floor = r.i64();
            auto n = r.count(kMinSlotRecord);
            t.records.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                SlotRecord d;
                d.sequence = r.i64();
                d.view = r.i64();
                d.request = r.request();
                t.records.push_back(std::move(d));
            }
            return t;
        }
        case TupleTag::reply: {
            Reply t;
            t.partition = r.u16();
            t.executor = r.u16();
            t.source = r.u32();
            t.number = r.u64();
            auto n = r.count(kMinReplyItem);
            t.items.reserve(n);
            for (std::size_t i = 0; i < n; ++i) {
                ReplyItem item;
                item.id.client = r.u32();
                item.id.timestamp = r.u64();
                item.result = r.bytes();
                t.items.push_back(std::move(item));
            }
            return t;
        }
    }
    throw decode_error("unknown tuple tag");
}

}  // namespace

void WireWriter::fixed(std::uint64_t v, int width) {
    for (int i = 0; i < width; ++i) {
        out_.push_back(static_cast<char>(v & 0xff));
        v >>= 8;
    }
}

void WireWriter::bytes(std::string_view v) {
    count(v.size());
    out_.append(v);
}

void WireWriter::count(std::size_t n) {
    if (n > 0xffffffffu) throw std::length_error("field too large for wire encoding");
    u32(static_cast<std::uint32_t>(n));
}

void WireWriter::command(const Command& c) {
    u32(c.id.client);
    u64(c.id.timestamp);
    bytes(c.op);
}

void WireWriter::request(const Request& r) {
    u32(r.source);
    u64(r.number);
    count(r.commands.size());
    for (const auto& c : r.commands) command(c);
}

std::uint64_t WireReader::fixed(int width) {
    if (remaining() < static_cast<std::size_t>(width)) throw decode_error("truncated input");
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
    }
    pos_ += width;
    return v;
}

Bytes WireReader::bytes() {
    auto n = count(1);
    Bytes out(in_.substr(pos_, n));
    pos_ += n;
    return out;
}

std::size_t WireReader::count(std::size_t min_element_size) {
    auto n = u32();
    if (min_element_size == 0) min_element_size = 1;
    if (n > remaining() / min_element_size) throw decode_error("element count exceeds input");
    return n;
}

Command WireReader::command() {
    Command c;
    c.id.client = u32();
    c.id.timestamp = u64();
    c.op = bytes();
    return c;
}

Request WireReader::request() {
    Request r;
    r.source = u32();
    r.number = u64();
    auto n = count(kMinCommand);
    r.commands.reserve(n);
    for (std::size_t i = 0; i < n; ++i) r.commands.push_back(command());
    return r;
}

std::string_view tuple_name(const Tuple& tuple) { return kTupleNames.at(tuple.index()); }

Bytes encode(const Tuple& tuple) {
    WireWriter body;
    std::visit([&](const auto& t) { write_body(body, t); }, tuple);
    WireWriter out;
    out.u8(static_cast<std::uint8_t>(tuple.index() + 1));
    out.bytes(body.view());
    return out.take();
}

Tuple decode(std::string_view bytes) {
    if (bytes.empty()) throw decode_error("empty input");
    WireReader outer(bytes);
    auto tag = outer.u8();
    if (tag < 1 || tag > kTupleNames.size()) throw decode_error("unknown tuple tag");
    auto body = outer.bytes();
    if (!outer.done()) throw decode_error("trailing bytes after tuple");
    WireReader inner(body);
    auto tuple = read_body(static_cast<TupleTag>(tag), inner);
    if (!inner.done()) throw decode_error("trailing bytes inside tuple body");
    return tuple;
}

std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::uint64_t digest(const Tuple& tuple) { return fnv1a(encode(tuple)); }

std::uint64_t digest(const Request& request) {
    WireWriter w;
    w.request(request);
    return fnv1a(w.view());
}

std::string to_hex(std::string_view bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(bytes.size() * 2);
    for (unsigned char c : bytes) {
        out.push_back(kDigits[c >> 4]);
        out.push_back(kDigits[c & 0xf]);
    }
    return out;
}

Bytes from_hex(std::string_view hex) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw decode_error("invalid hex digit");
    };
    if (hex.size() % 2 != 0) throw decode_error("odd-length hex string");
    Bytes out;
    out.reserve(hex.size() / 2);
    for (std::size_t i = 0; i < hex.size(); i += 2) {
        out.push_back(static_cast<char>(nibble(hex[i]) * 16 + nibble(hex[i + 1])));
    }
    return out;
}

std::string hex64(std::uint64_t value) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[i] = kDigits[value & 0xf];
        value >>= 4;
    }
    return out;
}

}  // namespace tara
