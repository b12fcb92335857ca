#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <vector>

namespace tara {

// k-th highest element (k is 1-based) of a value set, if at least k exist.
template <typename T>
std::optional<T> kth_highest(std::vector<T> values, std::size_t k) {
    if (k == 0 || values.size() < k) return std::nullopt;
    std::nth_element(values.begin(), values.begin() + (k - 1), values.end(), std::greater<T>{});
    return values[k - 1];
}

// Adopts the (f+1)-highest value reported by distinct sources. Used for the
// stability threshold and for views; the adopted value never decreases even
// if a restarted source reports a lower value than before.
template <typename Key, typename T>
class QuorumTracker {
public:
    QuorumTracker(std::size_t quorum, T initial) : quorum_(quorum), adopted_(initial) {}

    // Returns true when the adopted value increased.
    bool report(const Key& source, T value) {
        latest_[source] = value;
        std::vector<T> values;
        values.reserve(latest_.size());
        for (const auto& [_, v] : latest_) values.push_back(v);
        auto candidate = kth_highest(std::move(values), quorum_);
        if (candidate && *candidate > adopted_) {
            adopted_ = *candidate;
            return true;
        }
        return false;
    }

    T adopted() const { return adopted_; }
    bool has_quorum() const { return latest_.size() >= quorum_; }
    std::size_t reporters() const { return latest_.size(); }

private:
    std::size_t quorum_;
    T adopted_;
    std::map<Key, T> latest_;
};

}  // namespace tara
