#pragma once

// Brute-force linearizability check of a key-value history. The history is
// split per key (linearizability is compositional) and each key is searched
// exhaustively with memoization, up to a node budget.

#include <map>
#include <string>
#include <vector>

#include "tara/recorder.hpp"

namespace tara {

enum class Verdict { linearizable, violation, inconclusive };

std::string_view verdict_name(Verdict verdict);

struct LinearizabilityReport {
    Verdict verdict = Verdict::linearizable;
    std::size_t keys = 0;
    std::size_t operations = 0;
    std::string detail;  // offending key or reason
};

// Commands without a completion may or may not have taken effect. Real-time
// order is strict on ticks; commands of one client are additionally ordered
// by timestamp.
LinearizabilityReport check_kv_history(const std::map<CommandId, HistoryEntry>& history,
                                       std::size_t budget = 2'000'000);

}  // namespace tara
