#pragma once

// Protocol tuples and their canonical wire encoding.
//
// Wire layout of every tuple:
//
//   u8  tag          (1..11, see TupleTag)
//   u32 body length  (little endian)
//   ... body         (fields in declaration order)
//
// Field encodings inside the body:
//   u16/u32/u64/i64  fixed width, little endian
//   bytes            u32 length, then raw bytes
//   list             u32 count, then elements
//   map              u32 count, then (key, value) pairs in ascending key order
//
// The encoding is canonical: structurally equal tuples produce identical
// bytes, and decode rejects any input that encode could not have produced.

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string_view>
#include <variant>
#include <vector>

#include "tara/types.hpp"

namespace tara {

struct CommandId {
    ClientId client = 0;
    std::uint64_t timestamp = 0;

    auto operator<=>(const CommandId&) const = default;
};

struct Command {
    CommandId id;
    Bytes op;

    bool operator==(const Command&) const = default;
};

inline constexpr SourceId kNoopSource = 0xffffffffu;

struct Request {
    SourceId source = 0;
    std::uint64_t number = 0;
    std::vector<Command> commands;

    bool operator==(const Request&) const = default;

    bool is_noop() const { return source == kNoopSource; }
    static Request noop() { return Request{kNoopSource, 0, {}}; }
};

struct Propose {
    std::uint16_t partition = 0;
    std::uint16_t proposer = 0;
    SeqNo sequence = 0;
    ViewNo view = 0;
    Request request;

    bool operator==(const Propose&) const = default;
};

struct Commit {
    std::uint16_t partition = 0;
    std::uint16_t committer = 0;
    SeqNo sequence = 0;
    ViewNo view = 0;
    Request request;

    bool operator==(const Commit&) const = default;
};

struct Checkpoint {
    std::uint16_t executor = 0;
    SeqNo sequence = 0;

    bool operator==(const Checkpoint&) const = default;
};

struct Stable {
    std::uint16_t gc_source = 0;
    SeqNo threshold = 0;

    bool operator==(const Stable&) const = default;
};

struct Target {
    std::uint16_t partition = 0;
    SourceId source = 0;
    std::uint64_t number = 0;

    bool operator==(const Target&) const = default;
};

struct Actual {
    std::uint16_t partition = 0;
    std::uint16_t executor = 0;
    std::map<SourceId, std::uint64_t> agreed;

    bool operator==(const Actual&) const = default;
};

struct View {
    std::uint16_t partition = 0;
    std::uint16_t controller = 0;
    ViewNo view = 0;

    bool operator==(const View&) const = default;
};

// d = (s, v, req): the latest view in which a committer accepted a proposal for s.
struct SlotRecord {
    SeqNo sequence = 0;
    ViewNo view = 0;
    Request request;

    bool operator==(const SlotRecord&) const = default;
};

struct RecordTuple {
    std::uint16_t partition = 0;
    std::uint16_t committer = 0;
    ViewNo view_target = 0;
    SeqNo window_floor = 0;  // lowest sequence still held by the committer
    std::vector<SlotRecord> records;

    bool operator==(const RecordTuple&) const = default;
};

struct ReplyItem {
    CommandId id;
    Bytes result;

    bool operator==(const ReplyItem&) const = default;
};

// Emitted once per executed (non no-op) request. Items hold the results that
// are returned to clients; an empty item list still acknowledges completion
// of request (source, number) to the originating request source.
struct Reply {
    std::uint16_t partition = 0;
    std::uint16_t executor = 0;
    SourceId source = 0;
    std::uint64_t number = 0;
    std::vector<ReplyItem> items;

    bool operator==(const Reply&) const = default;
};

using Tuple = std::variant<Command, Request, Propose, Commit, Checkpoint, Stable, Target,
                           Actual, View, RecordTuple, Reply>;

enum class TupleTag : std::uint8_t {
    command = 1,
    request,
    propose,
    commit,
    checkpoint,
    stable,
    target,
    actual,
    view,
    record,
    reply,
};

std::string_view tuple_name(const Tuple& tuple);

class decode_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

Bytes encode(const Tuple& tuple);
Tuple decode(std::string_view bytes);

std::uint64_t fnv1a(std::string_view bytes);
std::uint64_t digest(const Tuple& tuple);
std::uint64_t digest(const Request& request);

std::string to_hex(std::string_view bytes);
Bytes from_hex(std::string_view hex);
std::string hex64(std::uint64_t value);

// Low level field codec, shared with the checkpoint blob format.
class WireWriter {
public:
    void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
    void u16(std::uint16_t v) { fixed(v, 2); }
    void u32(std::uint32_t v) { fixed(v, 4); }
    void u64(std::uint64_t v) { fixed(v, 8); }
    void i64(std::int64_t v) { fixed(static_cast<std::uint64_t>(v), 8); }
    void bytes(std::string_view v);
    void count(std::size_t n);

    void command(const Command& c);
    void request(const Request& r);

    Bytes take() { return std::move(out_); }
    const Bytes& view() const { return out_; }

private:
    void fixed(std::uint64_t v, int width);
    Bytes out_;
};

class WireReader {
public:
    explicit WireReader(std::string_view in) : in_(in) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(fixed(1)); }
    std::uint16_t u16() { return static_cast<std::uint16_t>(fixed(2)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(fixed(4)); }
    std::uint64_t u64() { return fixed(8); }
    std::int64_t i64() { return static_cast<std::int64_t>(fixed(8)); }
    Bytes bytes();
    // Element count, bounded by the remaining input so garbage cannot force
    // large allocations.
    std::size_t count(std::size_t min_element_size = 1);

    Command command();
    Request request();

    bool done() const { return pos_ == in_.size(); }
    std::size_t remaining() const { return in_.size() - pos_; }

private:
    std::uint64_t fixed(int width);
    std::string_view in_;
    std::size_t pos_ = 0;
};

}  // namespace tara
