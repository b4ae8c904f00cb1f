#pragma once

#include <array>

#include "posg/occupancy.hpp"

namespace posg {

// Extensive-form expansion of the game with simultaneous moves
// serialized (maximizer first by default; the order is value-irrelevant
// because the second mover's information sets hide the first move).
// Storage collapses each joint action-observation path into one node
// carrying the unnormalized state distribution; the serialized-form node
// counts are kept as statistics and drive the pre-allocation memory
// estimate that gates construction.
struct ExtensiveTree {
    struct Node {
        int stage = 0;
        int i_max = 0, i_min = 0;    // infoset ids (history pool ids)
        std::vector<double> w;       // unnormalized P(state, path)
        std::vector<double> imm;     // E[r | path] per joint control, unnorm.
        std::vector<int> child;      // (u_max,u_min,z_max,z_min) -> node, -1
    };

    const ZsPosg* game = nullptr;
    int horizon = 0;
    bool min_player_first = false;
    std::vector<Node> nodes; // node 0 is the root
    HistoryStore infosets;   // per-player information set interning

    // Serialized-form statistics (the classic game tree this collapsed
    // form represents).
    long long chance_nodes = 0;
    long long max_infosets = 0;
    long long min_infosets = 0;
    long long terminal_nodes = 0;

    int n_controls(Player p) const { return game->n_controls(p); }
    int n_infosets(Player p) const { return infosets.of(p).size(); }
};

// Estimated serialized tree bytes: sum over depths 0..horizon of the
// joint branching factor to that power, 48 bytes per node.
double estimate_tree_bytes(const ZsPosg& game, int horizon);

// Throws BudgetExceeded(memory) when the estimate exceeds the budget.
ExtensiveTree build_extensive_form(const ZsPosg& game, int horizon,
                                   std::size_t memory_budget,
                                   bool min_player_first = false);

// Behavioral strategy: per infoset id, a distribution over own controls.
using Strategy = std::vector<std::vector<double>>;

Strategy uniform_strategy(const ExtensiveTree& tree, Player p);

// Expected payoff to the maximizer under a full strategy pair.
double tree_game_value(const ExtensiveTree& tree, const Strategy& s_max,
                       const Strategy& s_min);

// Exact best response by backward induction over the responder's
// information-set tree; `fixed` is the opponent's strategy and must
// cover every opponent infoset (missing entries throw).
double best_response_value(const ExtensiveTree& tree, const Strategy& fixed,
                           Player responder);

struct CfrConfig {
    long iterations = 1000;
    double time_budget = 7200.0;         // seconds
    double target_exploitability = 0.0;  // 0 = run the full budget
};

struct CfrTraceRow {
    long iteration;
    double value;          // average-strategy pair value
    double exploitability;
    double elapsed;        // seconds
};

struct CfrResult {
    double value = 0.0;
    double exploitability = kInf;
    RunStatus status = RunStatus::iteration_cap;
    std::vector<CfrTraceRow> trace;
    std::array<Strategy, 2> avg; // indexed by Player
    // Final clipped cumulative regrets per infoset and control, exposed
    // so the nonnegativity invariant can be audited from outside.
    std::array<std::vector<std::vector<double>>, 2> regrets;
};

// CFR+ with alternating updates, clipped cumulative regrets
// (R <- max(R + regret, 0)) and linearly weighted average strategies.
CfrResult cfr_plus_solve(const ExtensiveTree& tree, const CfrConfig& config);

// Brute force: enumerates reduced pure policies for both players
// (counts pre-checked against the 1e4-per-player cap), evaluates the
// payoff matrix with evaluate_joint_policy, and solves the matrix game.
// Throws std::runtime_error("instance too large") over the cap.
double exact_value_oracle(const ZsPosg& game, int horizon);

} // namespace posg
