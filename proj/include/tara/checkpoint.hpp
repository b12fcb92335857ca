#pragma once

#include <map>
#include <optional>
#include <utility>

#include "tara/messages.hpp"

namespace tara {

// Everything needed to recreate an executor at `sequence`: the state reflects
// every execution position below `sequence`.
struct CheckpointBlob {
    std::uint16_t executor = 0;
    SeqNo sequence = 0;
    Bytes app_snapshot;
    std::map<ClientId, std::uint64_t> executed;                      // T_exec
    std::map<ClientId, std::pair<std::uint64_t, Bytes>> result_cache;
    // Highest executed request number per (partition, source).
    std::map<std::pair<std::uint16_t, SourceId>, std::uint64_t> agreed;

    bool operator==(const CheckpointBlob&) const = default;
};

Bytes encode_blob(const CheckpointBlob& blob);
CheckpointBlob decode_blob(std::string_view bytes);

// Durable blob storage shared by all executors; survives node crashes.
// Blobs are stored encoded and never modified once written.
class CheckpointStore {
public:
    // Returns false if (sequence, executor) was already stored.
    bool put(const CheckpointBlob& blob);
    std::optional<CheckpointBlob> get(SeqNo sequence, std::uint16_t executor) const;
    // Any copy stored for `sequence`, preferring the lowest executor id.
    std::optional<CheckpointBlob> any_at(SeqNo sequence) const;
    std::size_t copies_at(SeqNo sequence) const;
    std::size_t size() const { return blobs_.size(); }

private:
    std::map<std::pair<SeqNo, std::uint16_t>, Bytes> blobs_;
};

}  // namespace tara
