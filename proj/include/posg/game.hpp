#pragma once

#include <string>
#include <vector>

#include "posg/types.hpp"

namespace posg {

// Two-player zero-sum partially observable stochastic game with a joint
// dynamics kernel.  Observation emission is folded into the kernel at
// construction time, so a single tensor
//
//   p(y, z_max, z_min | x, u_max, u_min)
//
// drives both state transitions and observations.  Rewards are payoffs
// to the maximizing player; the minimizing player receives the negation.
class ZsPosg {
public:
    std::string name;
    std::vector<std::string> states;
    std::vector<std::string> controls_max, controls_min;
    std::vector<std::string> obs_max, obs_min;
    std::vector<double> initial_belief; // over states, sums to 1
    double discount = 1.0;
    int horizon = 0; // 0 = unspecified; solvers take an explicit horizon

    int n_states() const { return static_cast<int>(states.size()); }
    int n_controls(Player p) const {
        return static_cast<int>(p == Player::maximizer ? controls_max.size()
                                                       : controls_min.size());
    }
    int n_obs(Player p) const {
        return static_cast<int>(p == Player::maximizer ? obs_max.size()
                                                       : obs_min.size());
    }

    // Kernel accessors.  Storage is dense; index order is
    // [x][u_max][u_min][y][z_max][z_min].
    double p(int x, int u1, int u2, int y, int z1, int z2) const {
        return kernel_[kernel_index(x, u1, u2, y, z1, z2)];
    }
    double& p(int x, int u1, int u2, int y, int z1, int z2) {
        return kernel_[kernel_index(x, u1, u2, y, z1, z2)];
    }

    double r(int x, int u1, int u2) const {
        return reward_[(static_cast<std::size_t>(x) * controls_max.size() + u1) *
                           controls_min.size() +
                       u2];
    }
    double& r(int x, int u1, int u2) {
        return reward_[(static_cast<std::size_t>(x) * controls_max.size() + u1) *
                           controls_min.size() +
                       u2];
    }

    // Allocates kernel and reward tensors once all space sizes are set.
    void allocate();

    std::size_t kernel_size() const { return kernel_.size(); }

private:
    std::vector<double> kernel_;
    std::vector<double> reward_;

    std::size_t kernel_index(int x, int u1, int u2, int y, int z1,
                             int z2) const {
        std::size_t i = x;
        i = i * controls_max.size() + u1;
        i = i * controls_min.size() + u2;
        i = i * states.size() + y;
        i = i * obs_max.size() + z1;
        i = i * obs_min.size() + z2;
        return i;
    }
};

// Outcome of structural validation.  Problems are reported, not thrown,
// so a caller can surface all of them at once.
struct ValidationReport {
    std::vector<std::string> problems;
    bool ok() const { return problems.empty(); }
};

// Checks stochasticity of the kernel rows and the initial belief, index
// bounds and space non-emptiness.  Tolerance for row sums is 1e-9.
ValidationReport validate(const ZsPosg& game);

// Parses the .dpomdp dialect documented in the README: colon-delimited
// T/O/R entries with '*' wildcards and 'uniform'/'identity' keywords,
// preceded by the agents/discount/values/states/actions/observations/start
// preamble.  Throws ParseError (with a 1-based line number) on syntax
// errors; completeness errors name the offending (state, joint control).
ZsPosg parse_dpomdp(const std::string& text);
ZsPosg parse_dpomdp_file(const std::string& path);

// Canonical re-serialization.  Requires the kernel to factorize as
// T(y|x,u) * O(z|u,y); games built by parse_dpomdp always do.  Throws
// std::domain_error otherwise.
std::string serialize_dpomdp(const ZsPosg& game);

// Wraps a payoff matrix (row player maximizes) as a one-stage game with a
// single state and blind observations.
ZsPosg embed_matrix_game(const std::vector<std::vector<double>>& payoff);

// Reinterprets a game already stored in payoff-to-maximizer form as a
// strictly competitive game.  The representation is shared, so this is
// the identity and is idempotent; it exists as the named seam where a
// general-sum import would be projected.
ZsPosg competitive_adaptation(const ZsPosg& game);

} // namespace posg
