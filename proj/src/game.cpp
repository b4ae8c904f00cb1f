#include "posg/game.hpp"

#include <cmath>
#include <cstdio>

namespace posg {

void ZsPosg::allocate() {
    std::size_t n = states.size();
    std::size_t k = n * controls_max.size() * controls_min.size() * n *
                    obs_max.size() * obs_min.size();
    kernel_.assign(k, 0.0);
    reward_.assign(n * controls_max.size() * controls_min.size(), 0.0);
    if (initial_belief.empty()) initial_belief.assign(n, 0.0);
}

ValidationReport validate(const ZsPosg& game) {
    ValidationReport rep;
    auto note = [&](const std::string& s) { rep.problems.push_back(s); };

    if (game.states.empty()) note("state space is empty");
    if (game.controls_max.empty() || game.controls_min.empty())
        note("a control space is empty");
    if (game.obs_max.empty() || game.obs_min.empty())
        note("an observation space is empty");
    if (!rep.ok()) return rep;

    if (static_cast<int>(game.initial_belief.size()) != game.n_states()) {
        note("initial belief has wrong dimension");
        return rep;
    }
    double mass = 0.0;
    for (double b : game.initial_belief) {
        if (b < -1e-12) note("initial belief has a negative entry");
        mass += b;
    }
    if (std::abs(mass - 1.0) > 1e-9)
        note("initial belief sums to " + std::to_string(mass));

    int n = game.n_states();
    int u1n = game.n_controls(Player::maximizer);
    int u2n = game.n_controls(Player::minimizer);
    int z1n = game.n_obs(Player::maximizer);
    int z2n = game.n_obs(Player::minimizer);
    for (int x = 0; x < n; ++x)
        for (int u1 = 0; u1 < u1n; ++u1)
            for (int u2 = 0; u2 < u2n; ++u2) {
                double row = 0.0;
                bool neg = false;
                for (int y = 0; y < n; ++y)
                    for (int z1 = 0; z1 < z1n; ++z1)
                        for (int z2 = 0; z2 < z2n; ++z2) {
                            double v = game.p(x, u1, u2, y, z1, z2);
                            row += v;
                            if (v < -1e-12) neg = true;
                        }
                char buf[128];
                if (neg) {
                    std::snprintf(buf, sizeof buf,
                                  "kernel row (x=%d,u=(%d,%d)) has a negative "
                                  "entry",
                                  x, u1, u2);
                    note(buf);
                }
                if (std::abs(row - 1.0) > 1e-9) {
                    std::snprintf(buf, sizeof buf,
                                  "kernel row (x=%d,u=(%d,%d)) sums to %.12f",
                                  x, u1, u2, row);
                    note(buf);
                }
            }
    if (game.discount < 0.0 || game.discount > 1.0)
        note("discount outside [0,1]");
    return rep;
}

ZsPosg embed_matrix_game(const std::vector<std::vector<double>>& payoff) {
    if (payoff.empty() || payoff[0].empty())
        throw std::invalid_argument("payoff matrix is empty");
    ZsPosg g;
    g.name = "matrix-embed";
    g.states = {"s"};
    for (std::size_t i = 0; i < payoff.size(); ++i)
        g.controls_max.push_back("r" + std::to_string(i));
    for (std::size_t j = 0; j < payoff[0].size(); ++j)
        g.controls_min.push_back("c" + std::to_string(j));
    g.obs_max = {"none"};
    g.obs_min = {"none"};
    g.discount = 1.0;
    g.horizon = 1;
    g.allocate();
    g.initial_belief = {1.0};
    for (std::size_t i = 0; i < payoff.size(); ++i) {
        if (payoff[i].size() != payoff[0].size())
            throw std::invalid_argument("payoff matrix is ragged");
        for (std::size_t j = 0; j < payoff[i].size(); ++j) {
            g.r(0, static_cast<int>(i), static_cast<int>(j)) = payoff[i][j];
            g.p(0, static_cast<int>(i), static_cast<int>(j), 0, 0, 0) = 1.0;
        }
    }
    return g;
}

ZsPosg competitive_adaptation(const ZsPosg& game) { return game; }

} // namespace posg
