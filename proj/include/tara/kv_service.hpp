#pragma once

// Replicated key-value store. Every operation returns the value the key held
// before it ran, so reads and writes both expose enough state for the
// linearizability checker.

#include <map>
#include <optional>
#include <string>

#include "tara/execution.hpp"

namespace tara {

namespace kv {

enum class OpKind : std::uint8_t { put = 'P', get = 'G', del = 'D' };

struct Op {
    OpKind kind = OpKind::get;
    std::string key;
    std::string value;  // put only

    bool operator==(const Op&) const = default;
};

struct Result {
    bool found = false;
    std::string value;

    bool operator==(const Result&) const = default;
};

Bytes put(std::string_view key, std::string_view value);
Bytes get(std::string_view key);
Bytes del(std::string_view key);

std::optional<Op> decode_op(std::string_view op);
Bytes encode_result(const Result& result);
std::optional<Result> decode_result(std::string_view result);

// Applies op to a plain map; the reference semantics shared by the service
// and the checker.
Result apply(std::map<std::string, std::string>& data, const Op& op);

}  // namespace kv

class KvService final : public ServiceApplication {
public:
    Bytes apply(std::string_view op) override;
    Bytes snapshot() const override;
    void restore(std::string_view snapshot) override;

    const std::map<std::string, std::string>& data() const { return data_; }

private:
    std::map<std::string, std::string> data_;
};

}  // namespace tara
