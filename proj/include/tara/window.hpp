#pragma once

#include <map>

#include "tara/types.hpp"

namespace tara {

// Fixed-size window of consensus slots. Holds sequence numbers in
// [floor, floor + size); the floor only moves forward.
template <typename Slot>
class ConsensusWindow {
public:
    explicit ConsensusWindow(SeqNo size, SeqNo floor = 0) : size_(size), floor_(floor) {}

    SeqNo floor() const { return floor_; }
    SeqNo size() const { return size_; }
    SeqNo end() const { return floor_ + size_; }
    bool contains(SeqNo s) const { return s >= floor_ && s < end(); }

    // Drops every slot below new_floor. Returns false if the floor did not move.
    bool advance(SeqNo new_floor) {
        if (new_floor <= floor_) return false;
        floor_ = new_floor;
        slots_.erase(slots_.begin(), slots_.lower_bound(new_floor));
        return true;
    }

    // Slots outside the window are rejected.
    bool put(SeqNo s, Slot slot) {
        if (!contains(s)) return false;
        slots_.insert_or_assign(s, std::move(slot));
        return true;
    }

    Slot* find(SeqNo s) {
        auto it = slots_.find(s);
        return it == slots_.end() ? nullptr : &it->second;
    }
    const Slot* find(SeqNo s) const {
        auto it = slots_.find(s);
        return it == slots_.end() ? nullptr : &it->second;
    }

    void erase(SeqNo s) { slots_.erase(s); }
    void clear() { slots_.clear(); }
    std::size_t occupied() const { return slots_.size(); }
    const std::map<SeqNo, Slot>& slots() const { return slots_; }
    std::map<SeqNo, Slot>& slots() { return slots_; }

private:
    SeqNo size_;
    SeqNo floor_;
    std::map<SeqNo, Slot> slots_;
};

}  // namespace tara
