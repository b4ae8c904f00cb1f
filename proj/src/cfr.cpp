#include "posg/cfr.hpp"

#include <algorithm>
#include <cmath>

namespace posg {

double estimate_tree_bytes(const ZsPosg& game, int horizon) {
    double branch = static_cast<double>(game.n_controls(Player::maximizer)) *
                    game.n_controls(Player::minimizer) *
                    game.n_obs(Player::maximizer) *
                    game.n_obs(Player::minimizer);
    double nodes = 0.0, layer = 1.0;
    for (int t = 0; t <= horizon; ++t) {
        nodes += layer;
        if (nodes > 1e18) return 1e18; // saturate, already astronomically big
        layer *= branch;
    }
    return nodes * 48.0;
}

ExtensiveTree build_extensive_form(const ZsPosg& game, int horizon,
                                   std::size_t memory_budget,
                                   bool min_player_first) {
    if (estimate_tree_bytes(game, horizon) >
        static_cast<double>(memory_budget))
        throw BudgetExceeded(BudgetExceeded::Kind::memory);

    ExtensiveTree tree;
    tree.game = &game;
    tree.horizon = horizon;
    tree.min_player_first = min_player_first;

    int n = game.n_states();
    int u1n = game.n_controls(Player::maximizer);
    int u2n = game.n_controls(Player::minimizer);
    int z1n = game.n_obs(Player::maximizer);
    int z2n = game.n_obs(Player::minimizer);
    int branch = u1n * u2n * z1n * z2n;

    ExtensiveTree::Node root;
    root.stage = 0;
    root.w = game.initial_belief;
    tree.nodes.push_back(std::move(root));
    tree.chance_nodes = 1;

    for (std::size_t ni = 0; ni < tree.nodes.size(); ++ni) {
        // Note: tree.nodes may reallocate while we append; index access
        // is re-resolved after each push_back.
        int stage = tree.nodes[ni].stage;
        {
            auto& node = tree.nodes[ni];
            node.imm.assign(static_cast<std::size_t>(u1n) * u2n, 0.0);
            for (int u1 = 0; u1 < u1n; ++u1)
                for (int u2 = 0; u2 < u2n; ++u2) {
                    double acc = 0.0;
                    for (int x = 0; x < n; ++x)
                        if (node.w[x] != 0.0)
                            acc += node.w[x] * game.r(x, u1, u2);
                    node.imm[u1 * u2n + u2] = acc;
                }
        }
        if (stage + 1 >= horizon) {
            // Children would be terminals; count serialized outcomes.
            const auto& node = tree.nodes[ni];
            for (int u1 = 0; u1 < u1n; ++u1)
                for (int u2 = 0; u2 < u2n; ++u2) {
                    long long outcomes = 0;
                    for (int y = 0; y < n; ++y)
                        for (int z1 = 0; z1 < z1n; ++z1)
                            for (int z2 = 0; z2 < z2n; ++z2) {
                                double pr = 0.0;
                                for (int x = 0; x < n; ++x)
                                    if (node.w[x] != 0.0)
                                        pr += node.w[x] *
                                              game.p(x, u1, u2, y, z1, z2);
                                if (pr > 0.0) ++outcomes;
                            }
                    // Distinct joint observations are distinct leaves in
                    // the serialized tree; a fully deterministic outcome
                    // still yields one leaf per joint control.
                    tree.terminal_nodes += std::max(outcomes, 1LL);
                }
            continue;
        }
        tree.nodes[ni].child.assign(branch, -1);
        for (int u1 = 0; u1 < u1n; ++u1)
            for (int u2 = 0; u2 < u2n; ++u2) {
                bool any_child = false;
                for (int z1 = 0; z1 < z1n; ++z1)
                    for (int z2 = 0; z2 < z2n; ++z2) {
                        std::vector<double> w2(n, 0.0);
                        double mass = 0.0;
                        for (int y = 0; y < n; ++y) {
                            double acc = 0.0;
                            const auto& node = tree.nodes[ni];
                            for (int x = 0; x < n; ++x)
                                if (node.w[x] != 0.0)
                                    acc += node.w[x] *
                                           game.p(x, u1, u2, y, z1, z2);
                            w2[y] = acc;
                            mass += acc;
                        }
                        if (mass <= 0.0) continue;
                        any_child = true;
                        ExtensiveTree::Node kid;
                        kid.stage = stage + 1;
                        kid.w = std::move(w2);
                        kid.i_max = tree.infosets.of(Player::maximizer)
                                        .child(tree.nodes[ni].i_max, u1, z1);
                        kid.i_min = tree.infosets.of(Player::minimizer)
                                        .child(tree.nodes[ni].i_min, u2, z2);
                        int id = static_cast<int>(tree.nodes.size());
                        tree.nodes[ni]
                            .child[((u1 * u2n + u2) * z1n + z1) * z2n + z2] =
                            id;
                        tree.nodes.push_back(std::move(kid));
                    }
                if (any_child) ++tree.chance_nodes;
            }
    }
    tree.max_infosets = tree.infosets.of(Player::maximizer).size();
    tree.min_infosets = tree.infosets.of(Player::minimizer).size();
    return tree;
}

Strategy uniform_strategy(const ExtensiveTree& tree, Player p) {
    return Strategy(tree.n_infosets(p),
                    std::vector<double>(tree.n_controls(p),
                                        1.0 / tree.n_controls(p)));
}

namespace {

const std::vector<double>& strat_at(const Strategy& s, int infoset) {
    if (infoset >= static_cast<int>(s.size()))
        throw std::out_of_range("strategy missing an information set");
    return s[infoset];
}

double value_walk(const ExtensiveTree& tree, int ni, const Strategy& s1,
                  const Strategy& s2) {
    const auto& node = tree.nodes[ni];
    const ZsPosg& g = *tree.game;
    int u1n = g.n_controls(Player::maximizer);
    int u2n = g.n_controls(Player::minimizer);
    int z1n = g.n_obs(Player::maximizer);
    int z2n = g.n_obs(Player::minimizer);
    const auto& d1 = strat_at(s1, node.i_max);
    const auto& d2 = strat_at(s2, node.i_min);
    double v = 0.0;
    for (int u1 = 0; u1 < u1n; ++u1) {
        if (d1[u1] == 0.0) continue;
        for (int u2 = 0; u2 < u2n; ++u2) {
            if (d2[u2] == 0.0) continue;
            double q = node.imm[u1 * u2n + u2];
            if (!node.child.empty()) {
                double gamma = g.discount;
                for (int z1 = 0; z1 < z1n; ++z1)
                    for (int z2 = 0; z2 < z2n; ++z2) {
                        int c = node.child[((u1 * u2n + u2) * z1n + z1) *
                                               z2n +
                                           z2];
                        if (c >= 0)
                            q += gamma * value_walk(tree, c, s1, s2);
                    }
            }
            v += d1[u1] * d2[u2] * q;
        }
    }
    return v;
}

} // namespace

double tree_game_value(const ExtensiveTree& tree, const Strategy& s_max,
                       const Strategy& s_min) {
    if (tree.nodes.empty() || tree.horizon == 0) return 0.0;
    return value_walk(tree, 0, s_max, s_min);
}

double best_response_value(const ExtensiveTree& tree, const Strategy& fixed,
                           Player responder) {
    const ZsPosg& g = *tree.game;
    int uo_n = g.n_controls(responder);
    int zo_n = g.n_obs(responder);
    int u1n = g.n_controls(Player::maximizer);
    int u2n = g.n_controls(Player::minimizer);
    const HistoryPool& pool = tree.infosets.of(responder);

    // Opponent-and-chance weighted immediate payoffs per own infoset.
    std::vector<std::vector<double>> qimm(
        pool.size(), std::vector<double>(uo_n, 0.0));
    // Opponent reach per node, forward pass (nodes are in BFS order).
    std::vector<double> reach(tree.nodes.size(), 0.0);
    reach[0] = 1.0;
    for (std::size_t ni = 0; ni < tree.nodes.size(); ++ni) {
        const auto& node = tree.nodes[ni];
        double pi = reach[ni];
        if (pi == 0.0) continue;
        int own_i = responder == Player::maximizer ? node.i_max : node.i_min;
        int opp_i = responder == Player::maximizer ? node.i_min : node.i_max;
        const auto& dopp = strat_at(fixed, opp_i);
        for (int u1 = 0; u1 < u1n; ++u1)
            for (int u2 = 0; u2 < u2n; ++u2) {
                int uo = responder == Player::maximizer ? u1 : u2;
                int up = responder == Player::maximizer ? u2 : u1;
                qimm[own_i][uo] += pi * dopp[up] * node.imm[u1 * u2n + u2];
                if (node.child.empty()) continue;
                int z1n = g.n_obs(Player::maximizer);
                int z2n = g.n_obs(Player::minimizer);
                for (int z1 = 0; z1 < z1n; ++z1)
                    for (int z2 = 0; z2 < z2n; ++z2) {
                        int c = node.child[((u1 * u2n + u2) * z1n + z1) *
                                               z2n +
                                           z2];
                        if (c >= 0) reach[c] += pi * dopp[up];
                    }
            }
    }

    // Reverse-stage DP over the responder's own infoset tree.  Infoset
    // ids are interned in creation order, which is nondecreasing in
    // stage, so a reverse scan visits children before parents.
    std::vector<double> val(pool.size(), 0.0);
    bool maximize = responder == Player::maximizer;
    double gamma = g.discount;
    for (int i = pool.size(); i-- > 0;) {
        double best = 0.0;
        bool first = true;
        for (int uo = 0; uo < uo_n; ++uo) {
            double q = qimm[i][uo];
            for (int zo = 0; zo < zo_n; ++zo) {
                int c = pool.find_child(i, uo, zo);
                if (c >= 0) q += gamma * val[c];
            }
            if (first || (maximize ? q > best : q < best)) {
                best = q;
                first = false;
            }
        }
        val[i] = best;
    }
    return val[HistoryPool::kEmpty];
}

namespace {

struct RegretTable {
    // Per infoset: clipped cumulative regrets and weighted strategy sums.
    std::vector<std::vector<double>> regret, ssum;

    RegretTable(int n_infosets, int n_controls)
        : regret(n_infosets, std::vector<double>(n_controls, 0.0)),
          ssum(n_infosets, std::vector<double>(n_controls, 0.0)) {}

    std::vector<double> sigma(int i) const {
        const auto& r = regret[i];
        double sum = 0.0;
        for (double v : r) sum += v;
        std::vector<double> out(r.size());
        if (sum <= 0.0) {
            std::fill(out.begin(), out.end(), 1.0 / r.size());
        } else {
            for (std::size_t u = 0; u < r.size(); ++u) out[u] = r[u] / sum;
        }
        return out;
    }

    Strategy current() const {
        Strategy out(regret.size());
        for (std::size_t i = 0; i < regret.size(); ++i) out[i] = sigma(i);
        return out;
    }

    // End-of-sweep regret-matching+ update and linear strategy averaging.
    // Clipping happens here, once per infoset per sweep: an infoset spans
    // several public nodes, and flooring partial per-node sums at zero
    // would inflate regret wherever node contributions disagree in sign.
    void apply(const std::vector<std::vector<double>>& dreg,
               const std::vector<std::vector<double>>& dss, double weight) {
        for (std::size_t i = 0; i < regret.size(); ++i)
            for (std::size_t u = 0; u < regret[i].size(); ++u) {
                regret[i][u] = std::max(0.0, regret[i][u] + dreg[i][u]);
                ssum[i][u] += weight * dss[i][u];
            }
    }

    Strategy averaged() const {
        Strategy out(ssum.size());
        for (std::size_t i = 0; i < ssum.size(); ++i) {
            double sum = 0.0;
            for (double v : ssum[i]) sum += v;
            out[i].resize(ssum[i].size());
            if (sum <= 0.0)
                std::fill(out[i].begin(), out[i].end(),
                          1.0 / ssum[i].size());
            else
                for (std::size_t u = 0; u < ssum[i].size(); ++u)
                    out[i][u] = ssum[i][u] / sum;
        }
        return out;
    }
};

// One CFR+ sweep for `hero` under the frozen strategy pair (sh, so);
// pi_hero / pi_opp are path reach products of those strategies (chance
// lives in node.w / node.imm).  Regret and average increments accumulate
// per infoset into dreg / dss.  Returns the node value for the hero.
double cfr_walk(const ExtensiveTree& tree, int ni, Player hero,
                const Strategy& sh, const Strategy& so,
                std::vector<std::vector<double>>& dreg,
                std::vector<std::vector<double>>& dss, double pi_hero,
                double pi_opp) {
    const auto& node = tree.nodes[ni];
    const ZsPosg& g = *tree.game;
    int u1n = g.n_controls(Player::maximizer);
    int u2n = g.n_controls(Player::minimizer);
    int z1n = g.n_obs(Player::maximizer);
    int z2n = g.n_obs(Player::minimizer);
    bool hero_is_max = hero == Player::maximizer;
    int hero_i = hero_is_max ? node.i_max : node.i_min;
    int opp_i = hero_is_max ? node.i_min : node.i_max;
    int uh_n = hero_is_max ? u1n : u2n;

    const std::vector<double>& dh = strat_at(sh, hero_i);
    const std::vector<double>& dopp = strat_at(so, opp_i);

    std::vector<double> q(uh_n, 0.0); // counterfactual value per hero move
    double gamma = g.discount;
    for (int u1 = 0; u1 < u1n; ++u1)
        for (int u2 = 0; u2 < u2n; ++u2) {
            int uh = hero_is_max ? u1 : u2;
            int up = hero_is_max ? u2 : u1;
            if (dopp[up] == 0.0) continue;
            double imm = node.imm[u1 * u2n + u2];
            double sub = dopp[up] * imm;
            if (!node.child.empty()) {
                for (int z1 = 0; z1 < z1n; ++z1)
                    for (int z2 = 0; z2 < z2n; ++z2) {
                        int c = node.child[((u1 * u2n + u2) * z1n + z1) *
                                               z2n +
                                           z2];
                        if (c < 0) continue;
                        sub += gamma * dopp[up] *
                               cfr_walk(tree, c, hero, sh, so, dreg, dss,
                                        pi_hero * dh[uh],
                                        pi_opp * dopp[up]);
                    }
            }
            q[uh] += sub;
        }

    double v = 0.0;
    for (int uh = 0; uh < uh_n; ++uh) v += dh[uh] * q[uh];

    double sign = hero_is_max ? 1.0 : -1.0;
    for (int uh = 0; uh < uh_n; ++uh) {
        dreg[hero_i][uh] += sign * pi_opp * (q[uh] - v);
        dss[hero_i][uh] += pi_hero * dh[uh];
    }
    return v;
}

} // namespace

CfrResult cfr_plus_solve(const ExtensiveTree& tree, const CfrConfig& config) {
    CfrResult out;
    auto start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(
                   std::chrono::steady_clock::now() - start)
            .count();
    };

    if (tree.horizon == 0) {
        out.value = 0.0;
        out.exploitability = 0.0;
        out.status = RunStatus::converged;
        out.avg = {uniform_strategy(tree, Player::maximizer),
                   uniform_strategy(tree, Player::minimizer)};
        out.trace.push_back({0, 0.0, 0.0, elapsed()});
        return out;
    }

    RegretTable tab_max(tree.n_infosets(Player::maximizer),
                        tree.n_controls(Player::maximizer));
    RegretTable tab_min(tree.n_infosets(Player::minimizer),
                        tree.n_controls(Player::minimizer));

    auto zeroed = [](const RegretTable& tab) {
        std::vector<std::vector<double>> b(tab.regret.size());
        for (std::size_t i = 0; i < b.size(); ++i)
            b[i].assign(tab.regret[i].size(), 0.0);
        return b;
    };

    Player first = tree.min_player_first ? Player::minimizer
                                         : Player::maximizer;
    out.status = RunStatus::iteration_cap;
    for (long t = 1; t <= config.iterations; ++t) {
        if (elapsed() > config.time_budget) {
            out.status = RunStatus::oot;
            break;
        }
        double w = static_cast<double>(t);
        for (Player hero : {first, other(first)}) {
            RegretTable& tab = hero == Player::maximizer ? tab_max : tab_min;
            RegretTable& opp = hero == Player::maximizer ? tab_min : tab_max;
            Strategy sh = tab.current();
            Strategy so = opp.current();
            auto dreg = zeroed(tab);
            auto dss = zeroed(tab);
            cfr_walk(tree, 0, hero, sh, so, dreg, dss, 1.0, 1.0);
            tab.apply(dreg, dss, w);
        }
        out.avg = {tab_max.averaged(), tab_min.averaged()};
        double value = tree_game_value(tree, out.avg[0], out.avg[1]);
        double br_max = best_response_value(tree, out.avg[1],
                                            Player::maximizer);
        double br_min = best_response_value(tree, out.avg[0],
                                            Player::minimizer);
        out.value = value;
        out.exploitability = br_max - br_min;
        out.trace.push_back({t, value, out.exploitability, elapsed()});
        if (config.target_exploitability > 0.0 &&
            out.exploitability <= config.target_exploitability) {
            out.status = RunStatus::converged;
            break;
        }
    }
    if (out.trace.empty()) // time budget tripped before iteration 1
        out.trace.push_back({0, 0.0, kInf, elapsed()});
    out.regrets = {tab_max.regret, tab_min.regret};
    return out;
}

namespace {

// Reachable own-history tree (under any play) with per-history controls,
// used for pure-policy enumeration.
struct PolicySpace {
    // children[h][u*zn+z] = child id or -1 (unreachable)
    std::vector<std::vector<int>> children;
    int n_controls = 0, n_obs = 0;
};

PolicySpace reachable_space(PlanningContext& ctx, Player p, int horizon) {
    const ZsPosg& g = *ctx.game;
    PolicySpace ps;
    ps.n_controls = g.n_controls(p);
    ps.n_obs = g.n_obs(p);
    OccupancyState s = initial_occupancy(g);
    DecisionRule u1 = DecisionRule::uniform(Player::maximizer, 0,
                                            g.n_controls(Player::maximizer));
    DecisionRule u2 = DecisionRule::uniform(Player::minimizer, 0,
                                            g.n_controls(Player::minimizer));
    for (int t = 0; t + 1 < horizon; ++t) s = transition(ctx, s, u1, u2);
    // All interned histories of p up to stage horizon-1 are reachable
    // under uniform play exactly when reachable under any play.
    const HistoryPool& pool = ctx.hist.of(p);
    ps.children.assign(pool.size(), {});
    for (int h = 0; h < pool.size(); ++h) {
        if (pool.stage(h) + 1 >= horizon) continue;
        ps.children[h].assign(ps.n_controls * ps.n_obs, -1);
        for (int u = 0; u < ps.n_controls; ++u)
            for (int z = 0; z < ps.n_obs; ++z)
                ps.children[h][u * ps.n_obs + z] = pool.find_child(h, u, z);
    }
    return ps;
}

// Number of reduced pure policies rooted at h, saturating at `cap`.
long long count_policies(const PolicySpace& ps, int h, long long cap) {
    long long total = 0;
    for (int u = 0; u < ps.n_controls; ++u) {
        long long prod = 1;
        if (!ps.children[h].empty())
            for (int z = 0; z < ps.n_obs; ++z) {
                int c = ps.children[h][u * ps.n_obs + z];
                if (c >= 0) {
                    prod *= count_policies(ps, c, cap);
                    if (prod > cap) return cap + 1;
                }
            }
        total += prod;
        if (total > cap) return cap + 1;
    }
    return total;
}

void enumerate_policies(const PolicySpace& ps, int h,
                        std::map<int, int>& current,
                        std::vector<std::map<int, int>>& out,
                        std::size_t limit) {
    // Depth-first product over (control at h) x (policies of reachable
    // children); `current` maps history -> control.
    for (int u = 0; u < ps.n_controls && out.size() <= limit; ++u) {
        current[h] = u;
        std::vector<int> kids;
        if (!ps.children[h].empty())
            for (int z = 0; z < ps.n_obs; ++z) {
                int c = ps.children[h][u * ps.n_obs + z];
                if (c >= 0) kids.push_back(c);
            }
        // Recursive product over children via nested lambda.
        std::function<void(std::size_t)> rec = [&](std::size_t k) {
            if (out.size() > limit) return;
            if (k == kids.size()) {
                out.push_back(current);
                return;
            }
            // enumerate_policies for kids[k] inline: iterate its own
            // subtree choices, then continue with k+1.
            std::vector<std::map<int, int>> sub;
            enumerate_policies(ps, kids[k], current, sub, limit);
            for (auto& assignment : sub) {
                auto saved = current;
                current = assignment;
                rec(k + 1);
                current = saved;
            }
        };
        rec(0);
    }
    current.erase(h);
}

std::vector<DecisionRule> rules_from_pure(const PlanningContext& ctx,
                                          Player p, int horizon,
                                          const std::map<int, int>& pure) {
    const ZsPosg& g = *ctx.game;
    std::vector<DecisionRule> rules(
        horizon, DecisionRule::uniform(p, 0, g.n_controls(p)));
    for (int t = 0; t < horizon; ++t) rules[t].stage = t;
    const HistoryPool& pool = ctx.hist.of(p);
    for (const auto& [h, u] : pure) {
        std::vector<double> d(g.n_controls(p), 0.0);
        d[u] = 1.0;
        rules[pool.stage(h)].probs[h] = std::move(d);
    }
    return rules;
}

} // namespace

double exact_value_oracle(const ZsPosg& game, int horizon) {
    if (horizon == 0) return 0.0;
    PlanningContext ctx(game);
    PolicySpace ps1 = reachable_space(ctx, Player::maximizer, horizon);
    PolicySpace ps2 = reachable_space(ctx, Player::minimizer, horizon);
    constexpr long long kCap = 10000;
    long long c1 = count_policies(ps1, HistoryPool::kEmpty, kCap);
    long long c2 = count_policies(ps2, HistoryPool::kEmpty, kCap);
    if (c1 > kCap || c2 > kCap || c1 * c2 > 4000000)
        throw std::runtime_error("instance too large");

    std::vector<std::map<int, int>> pures1, pures2;
    std::map<int, int> scratch;
    enumerate_policies(ps1, HistoryPool::kEmpty, scratch, pures1, kCap);
    scratch.clear();
    enumerate_policies(ps2, HistoryPool::kEmpty, scratch, pures2, kCap);

    std::vector<std::vector<double>> payoff(
        pures1.size(), std::vector<double>(pures2.size(), 0.0));
    std::vector<std::vector<DecisionRule>> rules1, rules2;
    rules1.reserve(pures1.size());
    for (const auto& p : pures1)
        rules1.push_back(rules_from_pure(ctx, Player::maximizer, horizon, p));
    rules2.reserve(pures2.size());
    for (const auto& p : pures2)
        rules2.push_back(rules_from_pure(ctx, Player::minimizer, horizon, p));
    for (std::size_t i = 0; i < pures1.size(); ++i)
        for (std::size_t j = 0; j < pures2.size(); ++j)
            payoff[i][j] =
                evaluate_joint_policy(ctx, rules1[i], rules2[j], horizon);
    return solve_matrix_game(payoff).value;
}

} // namespace posg
