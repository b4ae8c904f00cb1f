#include "posg/occupancy.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

namespace posg {

namespace {

std::uint64_t pack(int x, int h1, int h2) {
    return (static_cast<std::uint64_t>(h1) << 38) |
           (static_cast<std::uint64_t>(h2) << 12) |
           static_cast<std::uint64_t>(x);
}

void sort_canonical(std::vector<OccEntry>& es) {
    std::sort(es.begin(), es.end(), [](const OccEntry& a, const OccEntry& b) {
        return pack(a.x, a.h_max, a.h_min) < pack(b.x, b.h_max, b.h_min);
    });
}

} // namespace

bool OccupancyState::operator==(const OccupancyState& o) const {
    if (stage != o.stage || entries.size() != o.entries.size()) return false;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& a = entries[i];
        const auto& b = o.entries[i];
        if (a.x != b.x || a.h_max != b.h_max || a.h_min != b.h_min ||
            a.w != b.w)
            return false;
    }
    return true;
}

OccupancyState initial_occupancy(const ZsPosg& game) {
    OccupancyState s;
    s.stage = 0;
    for (int x = 0; x < game.n_states(); ++x)
        if (game.initial_belief[x] > kOccTruncation)
            s.entries.push_back(
                {x, HistoryPool::kEmpty, HistoryPool::kEmpty,
                 game.initial_belief[x]});
    double m = s.mass();
    for (auto& e : s.entries) e.w /= m;
    sort_canonical(s.entries);
    return s;
}

double expected_reward(const PlanningContext& ctx, const OccupancyState& s,
                       const DecisionRule& a_max, const DecisionRule& a_min) {
    const ZsPosg& g = *ctx.game;
    double total = 0.0;
    int last_h1 = -1, last_h2 = -1;
    std::vector<double> d1, d2;
    for (const auto& e : s.entries) {
        if (e.h_max != last_h1) {
            d1 = a_max.dist(e.h_max);
            last_h1 = e.h_max;
        }
        if (e.h_min != last_h2) {
            d2 = a_min.dist(e.h_min);
            last_h2 = e.h_min;
        }
        double acc = 0.0;
        for (int u1 = 0; u1 < g.n_controls(Player::maximizer); ++u1) {
            if (d1[u1] == 0.0) continue;
            for (int u2 = 0; u2 < g.n_controls(Player::minimizer); ++u2) {
                if (d2[u2] == 0.0) continue;
                acc += d1[u1] * d2[u2] * g.r(e.x, u1, u2);
            }
        }
        total += e.w * acc;
    }
    return total;
}

OccupancyState transition(PlanningContext& ctx, const OccupancyState& s,
                          const DecisionRule& a_max,
                          const DecisionRule& a_min) {
    const ZsPosg& g = *ctx.game;
    ctx.check_time();
    std::unordered_map<std::uint64_t, double> acc;
    std::size_t charged = 0;
    constexpr std::size_t kBytesPerSlot = 48;
    std::size_t pool_before = ctx.hist.pool[0].size() + ctx.hist.pool[1].size();

    int n = g.n_states();
    int u1n = g.n_controls(Player::maximizer);
    int u2n = g.n_controls(Player::minimizer);
    int z1n = g.n_obs(Player::maximizer);
    int z2n = g.n_obs(Player::minimizer);

    int last_h1 = -1, last_h2 = -1;
    std::vector<double> d1, d2;
    for (const auto& e : s.entries) {
        if (e.h_max != last_h1) {
            d1 = a_max.dist(e.h_max);
            last_h1 = e.h_max;
        }
        if (e.h_min != last_h2) {
            d2 = a_min.dist(e.h_min);
            last_h2 = e.h_min;
        }
        for (int u1 = 0; u1 < u1n; ++u1) {
            if (d1[u1] == 0.0) continue;
            for (int u2 = 0; u2 < u2n; ++u2) {
                if (d2[u2] == 0.0) continue;
                double base = e.w * d1[u1] * d2[u2];
                for (int y = 0; y < n; ++y)
                    for (int z1 = 0; z1 < z1n; ++z1)
                        for (int z2 = 0; z2 < z2n; ++z2) {
                            double pr = g.p(e.x, u1, u2, y, z1, z2);
                            if (pr == 0.0) continue;
                            int h1 = ctx.hist.of(Player::maximizer)
                                         .child(e.h_max, u1, z1);
                            int h2 = ctx.hist.of(Player::minimizer)
                                         .child(e.h_min, u2, z2);
                            acc[pack(y, h1, h2)] += base * pr;
                            if (acc.size() * kBytesPerSlot >
                                charged + (1 << 16)) {
                                std::size_t now = acc.size() * kBytesPerSlot;
                                ctx.charge(now - charged);
                                charged = now;
                            }
                        }
            }
        }
    }

    OccupancyState out;
    out.stage = s.stage + 1;
    double mass = 0.0;
    for (const auto& [k, w] : acc)
        if (w > kOccTruncation) mass += w;
    out.entries.reserve(acc.size());
    for (const auto& [k, w] : acc) {
        if (w <= kOccTruncation) continue;
        out.entries.push_back({static_cast<int>(k & 0xfff),
                               static_cast<int>(k >> 38),
                               static_cast<int>((k >> 12) & 0x3ffffff),
                               w / mass});
    }
    sort_canonical(out.entries);
    // Keep the persistent entry storage and newly interned histories on
    // the books; the scratch accumulator is returned to the pool here.
    ctx.release(charged);
    std::size_t pool_after =
        ctx.hist.pool[0].size() + ctx.hist.pool[1].size();
    ctx.charge(out.entries.size() * sizeof(OccEntry) +
               (pool_after - pool_before) * 48);
    return out;
}

std::vector<std::pair<int, double>> marginal(const OccupancyState& s,
                                             Player p) {
    std::map<int, double> m;
    for (const auto& e : s.entries)
        m[p == Player::maximizer ? e.h_max : e.h_min] += e.w;
    return {m.begin(), m.end()};
}

std::vector<Conditional> conditionals(const OccupancyState& s, Player given) {
    std::map<int, Conditional> by_h;
    for (const auto& e : s.entries) {
        int h = given == Player::maximizer ? e.h_max : e.h_min;
        int o = given == Player::maximizer ? e.h_min : e.h_max;
        auto& c = by_h[h];
        c.given_h = h;
        c.mass += e.w;
        c.entries.emplace_back(e.x, o, e.w);
    }
    std::vector<Conditional> out;
    out.reserve(by_h.size());
    for (auto& [h, c] : by_h) {
        for (auto& [x, o, w] : c.entries) w /= c.mass;
        out.push_back(std::move(c));
    }
    return out;
}

OccupancyState recompose(int stage, Player given,
                         const std::vector<Conditional>& parts) {
    OccupancyState s;
    s.stage = stage;
    for (const auto& c : parts)
        for (const auto& [x, o, w] : c.entries) {
            double v = c.mass * w;
            if (v <= kOccTruncation) continue;
            if (given == Player::maximizer)
                s.entries.push_back({x, c.given_h, o, v});
            else
                s.entries.push_back({x, o, c.given_h, v});
        }
    sort_canonical(s.entries);
    return s;
}

namespace {

struct EvalKey {
    int tau, x, h1, h2;
    bool operator==(const EvalKey& o) const {
        return tau == o.tau && x == o.x && h1 == o.h1 && h2 == o.h2;
    }
};
struct EvalKeyHash {
    std::size_t operator()(const EvalKey& k) const {
        std::uint64_t v = (static_cast<std::uint64_t>(k.tau) << 56) ^
                          (static_cast<std::uint64_t>(k.x) << 44) ^
                          (static_cast<std::uint64_t>(k.h1) << 22) ^
                          static_cast<std::uint64_t>(k.h2);
        return std::hash<std::uint64_t>()(v * 0x9e3779b97f4a7c15ull);
    }
};

double eval_rec(PlanningContext& ctx,
                const std::vector<DecisionRule>& p1,
                const std::vector<DecisionRule>& p2, int horizon, int tau,
                int x, int h1, int h2,
                std::unordered_map<EvalKey, double, EvalKeyHash>& memo) {
    if (tau >= horizon) return 0.0;
    EvalKey key{tau, x, h1, h2};
    auto it = memo.find(key);
    if (it != memo.end()) return it->second;

    const ZsPosg& g = *ctx.game;
    const DecisionRule& a1 =
        tau < (int)p1.size() ? p1[tau]
                             : DecisionRule::uniform(Player::maximizer, tau,
                                                     g.n_controls(
                                                         Player::maximizer));
    std::vector<double> d1 = a1.dist(h1);
    std::vector<double> d2 =
        (tau < (int)p2.size() ? p2[tau]
                              : DecisionRule::uniform(
                                    Player::minimizer, tau,
                                    g.n_controls(Player::minimizer)))
            .dist(h2);

    double v = 0.0;
    for (int u1 = 0; u1 < g.n_controls(Player::maximizer); ++u1) {
        if (d1[u1] == 0.0) continue;
        for (int u2 = 0; u2 < g.n_controls(Player::minimizer); ++u2) {
            if (d2[u2] == 0.0) continue;
            double pe = d1[u1] * d2[u2];
            double term = g.r(x, u1, u2);
            if (tau + 1 < horizon) {
                for (int y = 0; y < g.n_states(); ++y)
                    for (int z1 = 0; z1 < g.n_obs(Player::maximizer); ++z1)
                        for (int z2 = 0; z2 < g.n_obs(Player::minimizer);
                             ++z2) {
                            double pr = g.p(x, u1, u2, y, z1, z2);
                            if (pr == 0.0) continue;
                            int c1 = ctx.hist.of(Player::maximizer)
                                         .child(h1, u1, z1);
                            int c2 = ctx.hist.of(Player::minimizer)
                                         .child(h2, u2, z2);
                            term += g.discount * pr *
                                    eval_rec(ctx, p1, p2, horizon, tau + 1, y,
                                             c1, c2, memo);
                        }
            }
            v += pe * term;
        }
    }
    memo.emplace(key, v);
    return v;
}

} // namespace

double evaluate_joint_policy(PlanningContext& ctx,
                             const std::vector<DecisionRule>& policy_max,
                             const std::vector<DecisionRule>& policy_min,
                             int horizon) {
    std::unordered_map<EvalKey, double, EvalKeyHash> memo;
    const ZsPosg& g = *ctx.game;
    double v = 0.0;
    for (int x = 0; x < g.n_states(); ++x)
        if (g.initial_belief[x] > 0.0)
            v += g.initial_belief[x] *
                 eval_rec(ctx, policy_max, policy_min, horizon, 0, x,
                          HistoryPool::kEmpty, HistoryPool::kEmpty, memo);
    return v;
}

std::string occupancy_csv(const PlanningContext& ctx,
                          const OccupancyState& s) {
    std::ostringstream out;
    out << "x,h_max,h_min,w\n";
    char buf[32];
    for (const auto& e : s.entries) {
        std::snprintf(buf, sizeof buf, "%.17g", e.w);
        out << ctx.game->states[e.x] << ','
            << ctx.hist.of(Player::maximizer).render(e.h_max) << ','
            << ctx.hist.of(Player::minimizer).render(e.h_min) << ',' << buf
            << "\n";
    }
    return out.str();
}

} // namespace posg
