#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "posg/types.hpp"

namespace posg {

// Interning pool for one player's private action-observation histories.
// A history is identified by a small integer id; id 0 is the empty history.
// Children are keyed by (parent, control, observation), so equal paths
// always intern to the same id and ids are stable across a run.
class HistoryPool {
public:
    static constexpr int kEmpty = 0;

    HistoryPool() { nodes_.push_back(Node{-1, -1, -1, 0}); }

    // Returns the id of parent extended by (control u, observation z),
    // creating it on first use.
    int child(int parent, int u, int z);

    // Lookup without insertion; returns -1 when the child was never interned.
    int find_child(int parent, int u, int z) const;

    int parent(int h) const { return nodes_[h].parent; }
    int control(int h) const { return nodes_[h].control; }
    int observation(int h) const { return nodes_[h].observation; }
    int stage(int h) const { return nodes_[h].stage; }
    int size() const { return static_cast<int>(nodes_.size()); }

    // Path rendering, e.g. "" for the root and "u1z0.u0z2" for a
    // two-step history.  Used by serializers and diagnostics.
    std::string render(int h) const;

    // Inverse of render; throws std::invalid_argument on malformed paths.
    int intern_path(const std::string& path);

private:
    struct Node {
        int parent;
        int control;
        int observation;
        int stage;
    };
    std::vector<Node> nodes_;
    std::unordered_map<std::uint64_t, int> index_;

    static std::uint64_t key(int parent, int u, int z) {
        return (static_cast<std::uint64_t>(parent) << 24) |
               (static_cast<std::uint64_t>(u & 0xfff) << 12) |
               static_cast<std::uint64_t>(z & 0xfff);
    }
};

// One pool per player; every occupancy, rule and value object in a
// planning run shares this store so history ids are comparable.
struct HistoryStore {
    HistoryPool pool[2];

    HistoryPool& of(Player p) { return pool[idx(p)]; }
    const HistoryPool& of(Player p) const { return pool[idx(p)]; }
};

} // namespace posg
