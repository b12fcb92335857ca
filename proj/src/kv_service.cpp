#include "tara/kv_service.hpp"

namespace tara {

namespace kv {

namespace {

Bytes encode(OpKind kind, std::string_view key, std::string_view value) {
    WireWriter w;
    w.u8(static_cast<std::uint8_t>(kind));
    w.bytes(key);
    if (kind == OpKind::put) w.bytes(value);
    return w.take();
}

}  // namespace

Bytes put(std::string_view key, std::string_view value) { return encode(OpKind::put, key, value); }
Bytes get(std::string_view key) { return encode(OpKind::get, key, {}); }
Bytes del(std::string_view key) { return encode(OpKind::del, key, {}); }

std::optional<Op> decode_op(std::string_view bytes) {
    try {
        WireReader r(bytes);
        Op op;
        auto kind = r.u8();
        if (kind != 'P' && kind != 'G' && kind != 'D') return std::nullopt;
        op.kind = static_cast<OpKind>(kind);
        op.key = r.bytes();
        if (op.kind == OpKind::put) op.value = r.bytes();
        if (!r.done()) return std::nullopt;
        return op;
    } catch (const decode_error&) {
        return std::nullopt;
    }
}

Bytes encode_result(const Result& result) {
    WireWriter w;
    w.u8(result.found ? 1 : 0);
    w.bytes(result.value);
    return w.take();
}

std::optional<Result> decode_result(std::string_view bytes) {
    try {
        WireReader r(bytes);
        Result result;
        auto found = r.u8();
        if (found > 1) return std::nullopt;
        result.found = found == 1;
        result.value = r.bytes();
        if (!r.done()) return std::nullopt;
        return result;
    } catch (const decode_error&) {
        return std::nullopt;
    }
}

Result apply(std::map<std::string, std::string>& data, const Op& op) {
    Result before;
    auto it = data.find(op.key);
    if (it != data.end()) before = {true, it->second};
    switch (op.kind) {
        case OpKind::put:
            data[op.key] = op.value;
            break;
        case OpKind::del:
            if (it != data.end()) data.erase(it);
            break;
        case OpKind::get:
            break;
    }
    return before;
}

}  // namespace kv

Bytes KvService::apply(std::string_view op) {
    auto decoded = kv::decode_op(op);
    // Malformed operations are answered, deterministically, with a marker
    // that is not a valid result encoding.
    if (!decoded) return "E";
    return kv::encode_result(kv::apply(data_, *decoded));
}

Bytes KvService::snapshot() const {
    WireWriter w;
    w.count(data_.size());
    for (const auto& [k, v] : data_) {
        w.bytes(k);
        w.bytes(v);
    }
    return w.take();
}

void KvService::restore(std::string_view snapshot) {
    WireReader r(snapshot);
    std::map<std::string, std::string> data;
    for (auto n = r.count(8); n > 0; --n) {
        auto k = r.bytes();
        data[k] = r.bytes();
    }
    if (!r.done()) throw decode_error("trailing bytes in kv snapshot");
    data_ = std::move(data);
}

}  // namespace tara
