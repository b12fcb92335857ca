#pragma once

#include <cstdint>
#include <map>
#include <utility>
#include <vector>

#include "tara/types.hpp"

namespace tara {

struct PartitionSlot {
    int partition = 0;
    SeqNo local = 0;

    bool operator==(const PartitionSlot&) const = default;
};

// s_exec = s_i * P + i. Throws std::invalid_argument for i outside [0, P).
SeqNo exec_sequence(SeqNo local, int partition, int partitions);
PartitionSlot split_exec_sequence(SeqNo exec, int partitions);

// Request-to-partition routing: request number q goes to partition q mod P.
int assign_partition(std::uint64_t request_number, int partitions);

// Lowest local sequence of partition i that is not below the merged
// threshold, i.e. the partition's window floor once `merged` is stable.
SeqNo local_floor(SeqNo merged, int partition, int partitions);

// Round-robin position of an executor across partitions.
class MergeCursor {
public:
    explicit MergeCursor(int partitions, SeqNo next = 0) : partitions_(partitions), next_(next) {}

    SeqNo next() const { return next_; }
    PartitionSlot current() const { return split_exec_sequence(next_, partitions_); }
    void advance() { ++next_; }
    void reset(SeqNo next) { next_ = next; }
    int partitions() const { return partitions_; }

private:
    int partitions_;
    SeqNo next_;
};

// Buffers per-partition decisions that may arrive in any order and releases
// them in merged execution order.
template <typename T>
class RoundRobinMerger {
public:
    explicit RoundRobinMerger(int partitions) : cursor_(partitions) {}

    void offer(int partition, SeqNo local, T value) {
        pending_.insert_or_assign(exec_sequence(local, partition, cursor_.partitions()),
                                  std::move(value));
    }

    // Everything that became contiguous with the cursor, in merged order.
    std::vector<std::pair<SeqNo, T>> drain() {
        std::vector<std::pair<SeqNo, T>> out;
        for (auto it = pending_.find(cursor_.next()); it != pending_.end();
             it = pending_.find(cursor_.next())) {
            out.emplace_back(it->first, std::move(it->second));
            pending_.erase(it);
            cursor_.advance();
        }
        return out;
    }

    SeqNo next() const { return cursor_.next(); }
    std::size_t buffered() const { return pending_.size(); }

private:
    MergeCursor cursor_;
    std::map<SeqNo, T> pending_;
};

}  // namespace tara
