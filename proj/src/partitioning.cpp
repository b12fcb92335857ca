#include "tara/partitioning.hpp"

#include <stdexcept>

namespace tara {

SeqNo exec_sequence(SeqNo local, int partition, int partitions) {
    if (partitions < 1) throw std::invalid_argument("partition count must be >= 1");
    if (partition < 0 || partition >= partitions)
        throw std::invalid_argument("partition index out of range");
    if (local < 0) throw std::invalid_argument("local sequence must be >= 0");
    return local * partitions + partition;
}

PartitionSlot split_exec_sequence(SeqNo exec, int partitions) {
    if (partitions < 1) throw std::invalid_argument("partition count must be >= 1");
    if (exec < 0) throw std::invalid_argument("execution sequence must be >= 0");
    return {static_cast<int>(exec % partitions), exec / partitions};
}

int assign_partition(std::uint64_t request_number, int partitions) {
    if (partitions < 1) throw std::invalid_argument("partition count must be >= 1");
    return static_cast<int>(request_number % static_cast<std::uint64_t>(partitions));
}

SeqNo local_floor(SeqNo merged, int partition, int partitions) {
    if (merged <= partition) return 0;
    return (merged - partition + partitions - 1) / partitions;
}

}  // namespace tara
