#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "posg/game.hpp"
#include "posg/history.hpp"
#include "posg/lp.hpp"

namespace posg {

// Shared mutable state for one planning run: the game, the interning
// pools for both players' histories, and resource budgets that
// long-running operations check as they allocate.
struct PlanningContext {
    const ZsPosg* game = nullptr;
    HistoryStore hist;

    std::chrono::steady_clock::time_point deadline =
        std::chrono::steady_clock::time_point::max();
    std::size_t memory_budget = std::numeric_limits<std::size_t>::max();
    std::size_t memory_used = 0;
    std::size_t memory_peak = 0;

    explicit PlanningContext(const ZsPosg& g) : game(&g) {}

    void charge(std::size_t bytes) {
        memory_used += bytes;
        if (memory_used > memory_peak) memory_peak = memory_used;
        if (memory_used > memory_budget)
            throw BudgetExceeded(BudgetExceeded::Kind::memory);
    }
    void release(std::size_t bytes) {
        memory_used = bytes > memory_used ? 0 : memory_used - bytes;
    }
    void check_time() const {
        if (std::chrono::steady_clock::now() > deadline)
            throw BudgetExceeded(BudgetExceeded::Kind::time);
    }
    LpLimits lp_limits() const {
        LpLimits lim;
        lim.deadline = deadline;
        lim.max_tableau_bytes =
            memory_budget == std::numeric_limits<std::size_t>::max()
                ? memory_budget
                : (memory_budget > memory_used ? memory_budget - memory_used
                                               : 0);
        return lim;
    }
};

// Occupancy state: a distribution over (state, max-history, min-history)
// triples at a fixed stage.  Entries are kept sorted by (h_max, h_min,
// state) and strictly positive; anything below 1e-12 is truncated away
// at construction and the rest renormalized.
struct OccEntry {
    int x;
    int h_max;
    int h_min;
    double w;
};

struct OccupancyState {
    int stage = 0;
    std::vector<OccEntry> entries;

    double mass() const {
        double m = 0.0;
        for (const auto& e : entries) m += e.w;
        return m;
    }
    bool operator==(const OccupancyState& o) const;
};

inline constexpr double kOccTruncation = 1e-12;

// Stage-0 occupancy: the initial belief paired with empty histories.
OccupancyState initial_occupancy(const ZsPosg& game);

// One player's stage decision rule: a distribution over own controls for
// each own history.  Histories without an entry act uniformly; rules
// produced by the solver only store support histories.
struct DecisionRule {
    Player owner = Player::maximizer;
    int stage = 0;
    int n_controls = 0;
    std::map<int, std::vector<double>> probs;

    std::vector<double> dist(int h) const {
        auto it = probs.find(h);
        if (it != probs.end()) return it->second;
        return std::vector<double>(n_controls, 1.0 / n_controls);
    }
    static DecisionRule uniform(Player p, int stage, int n_controls) {
        return DecisionRule{p, stage, n_controls, {}};
    }
};

// Expected stage reward under the pair of rules.
double expected_reward(const PlanningContext& ctx, const OccupancyState& s,
                       const DecisionRule& a_max, const DecisionRule& a_min);

// Pushes the occupancy through one stage of play.  Truncates entries
// below 1e-12 and renormalizes; charges the context for the result.
OccupancyState transition(PlanningContext& ctx, const OccupancyState& s,
                          const DecisionRule& a_max,
                          const DecisionRule& a_min);

// Marginal over one player's histories, sorted by history id.
std::vector<std::pair<int, double>> marginal(const OccupancyState& s,
                                             Player p);

// Conditional over (state, other-history) given one history of `given`.
struct Conditional {
    int given_h = 0;
    double mass = 0.0; // marginal weight of given_h
    // (state, other player's history, normalized weight)
    std::vector<std::tuple<int, int, double>> entries;
};

// All conditionals of s given each support history of `given`, sorted by
// the conditioning history id.
std::vector<Conditional> conditionals(const OccupancyState& s, Player given);

// Recomposition: marginal (x) conditionals -> occupancy.  Inverse of the
// marginal/conditional decomposition on its support.
OccupancyState recompose(int stage, Player given,
                         const std::vector<Conditional>& parts);

// Value of a fixed pair of policies (one rule per stage per player) by
// backward recursion over reachable (state, histories) triples.
double evaluate_joint_policy(PlanningContext& ctx,
                             const std::vector<DecisionRule>& policy_max,
                             const std::vector<DecisionRule>& policy_min,
                             int horizon);

// Debug rendering, one "x,h_max,h_min,w" row per entry.
std::string occupancy_csv(const PlanningContext& ctx,
                          const OccupancyState& s);

} // namespace posg
