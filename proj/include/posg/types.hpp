#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace posg {

// Role indices. Player 0 maximizes the payoff, player 1 minimizes it.
enum class Player : int { maximizer = 0, minimizer = 1 };

inline constexpr Player other(Player p) {
    return p == Player::maximizer ? Player::minimizer : Player::maximizer;
}

inline constexpr int idx(Player p) { return static_cast<int>(p); }

inline const char* player_name(Player p) {
    return p == Player::maximizer ? "max" : "min";
}

// Raised by long-running operations when a budget given in SolverConfig
// (or on a planning context) is exhausted mid-computation.  Callers that
// own a solve loop catch this and convert it into a terminal status.
struct BudgetExceeded : std::runtime_error {
    enum class Kind { time, memory };
    Kind kind;
    explicit BudgetExceeded(Kind k)
        : std::runtime_error(k == Kind::time ? "time budget exhausted"
                                             : "memory budget exhausted"),
          kind(k) {}
};

// Terminal condition of a long-running solve.
enum class RunStatus { converged, oot, oom, iteration_cap };

inline const char* status_name(RunStatus s) {
    switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::oot: return "oot";
    case RunStatus::oom: return "oom";
    default: return "iteration_cap";
    }
}

struct ParseError : std::runtime_error {
    int line;
    ParseError(int line_, const std::string& msg)
        : std::runtime_error("line " + std::to_string(line_) + ": " + msg),
          line(line_) {}
};

} // namespace posg
