#include "posg/operators.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

namespace posg {

namespace {

// Successor expansion of one occupancy entry under one joint control:
// every kernel-positive (y, z_own, z_opp) with the interned own child.
struct Succ {
    int y, z_own, z_opp, child_own;
    double pr;
};

// Per-call working view of s grouped for one role.
struct View {
    Player role;
    std::vector<int> own_hist;         // reachable own histories, sorted
    std::vector<int> opp_hist;         // reachable opponent histories
    std::vector<double> own_mass, opp_mass;
    std::map<int, int> own_index, opp_index;
    // joint support: (own group, opp group) -> belief over states
    struct Cell {
        int oi, pi;
        std::vector<double> bx; // unnormalized, indexed by state
    };
    std::vector<Cell> cells;
    // expansion cache: succ[cell][u_own][u_opp] -> list of Succ weighted
    // by the cell's belief is materialized lazily per (x) inside loops;
    // here we cache per (cell, u_own, u_opp) the aggregated successor
    // terms S(y, z_own, z_opp, child) = sum_x bx(x) p(...|x, u).
    // Stored flat: per cell, per joint control, a span into `succs`.
    std::vector<std::vector<std::vector<Succ>>> succ; // [cell][u_own*U2+u_opp]
};

View make_view(PlanningContext& ctx, Player role, const OccupancyState& s) {
    const ZsPosg& g = *ctx.game;
    View v;
    v.role = role;
    std::map<int, double> om, pm;
    std::map<std::pair<int, int>, std::vector<double>> cells;
    for (const auto& e : s.entries) {
        int ho = role == Player::maximizer ? e.h_max : e.h_min;
        int hp = role == Player::maximizer ? e.h_min : e.h_max;
        om[ho] += e.w;
        pm[hp] += e.w;
        auto& bx = cells[{ho, hp}];
        if (bx.empty()) bx.assign(g.n_states(), 0.0);
        bx[e.x] += e.w;
    }
    for (const auto& [h, m] : om) {
        v.own_index[h] = static_cast<int>(v.own_hist.size());
        v.own_hist.push_back(h);
        v.own_mass.push_back(m);
    }
    for (const auto& [h, m] : pm) {
        v.opp_index[h] = static_cast<int>(v.opp_hist.size());
        v.opp_hist.push_back(h);
        v.opp_mass.push_back(m);
    }
    int u_own_n = g.n_controls(role);
    int u_opp_n = g.n_controls(other(role));
    int z_own_n = g.n_obs(role);
    int z_opp_n = g.n_obs(other(role));
    HistoryPool& own_pool = ctx.hist.of(role);

    std::size_t charged = 0;
    for (auto& [key, bx] : cells) {
        View::Cell c;
        c.oi = v.own_index[key.first];
        c.pi = v.opp_index[key.second];
        c.bx = std::move(bx);
        v.cells.push_back(std::move(c));
    }
    v.succ.resize(v.cells.size());
    for (std::size_t ci = 0; ci < v.cells.size(); ++ci) {
        const auto& cell = v.cells[ci];
        int own_h = v.own_hist[cell.oi];
        v.succ[ci].resize(static_cast<std::size_t>(u_own_n) * u_opp_n);
        for (int uo = 0; uo < u_own_n; ++uo)
            for (int up = 0; up < u_opp_n; ++up) {
                auto& list = v.succ[ci][uo * u_opp_n + up];
                int u1 = role == Player::maximizer ? uo : up;
                int u2 = role == Player::maximizer ? up : uo;
                for (int y = 0; y < g.n_states(); ++y)
                    for (int zo = 0; zo < z_own_n; ++zo)
                        for (int zp = 0; zp < z_opp_n; ++zp) {
                            double pr = 0.0;
                            for (int x = 0; x < g.n_states(); ++x) {
                                if (cell.bx[x] == 0.0) continue;
                                int z1 = role == Player::maximizer ? zo : zp;
                                int z2 = role == Player::maximizer ? zp : zo;
                                pr += cell.bx[x] * g.p(x, u1, u2, y, z1, z2);
                            }
                            if (pr == 0.0) continue;
                            list.push_back(
                                {y, zo, zp, own_pool.child(own_h, uo, zo),
                                 pr});
                        }
                charged += list.size() * sizeof(Succ) + 24;
            }
    }
    ctx.charge(charged);
    ctx.release(charged); // transient: peak is recorded, then freed
    return v;
}

std::int64_t quantize(double v) {
    double q = v * 1e12;
    if (q > 9e17) q = 9e17;
    if (q < -9e17) q = -9e17;
    return std::llround(q);
}

struct SigHash {
    std::size_t operator()(const std::vector<std::int64_t>& v) const {
        std::size_t h = 1469598103934665603ull;
        for (auto x : v) {
            h ^= static_cast<std::size_t>(x);
            h *= 1099511628211ull;
        }
        return h;
    }
};

} // namespace

GreedyResult greedy_lp(PlanningContext& ctx, Player role,
                       const OccupancyState& s, const Collection& V_next) {
    const ZsPosg& g = *ctx.game;
    ctx.check_time();
    bool maxrole = role == Player::maximizer;
    int u_own_n = g.n_controls(role);
    int u_opp_n = g.n_controls(other(role));
    int z_opp_n = g.n_obs(other(role));
    int n_alpha = static_cast<int>(V_next.vectors.size());
    double gamma = g.discount;

    View view = make_view(ctx, role, s);
    int n_own = static_cast<int>(view.own_hist.size());
    int n_opp = static_cast<int>(view.opp_hist.size());

    // Raw coefficient blocks per co-occurring (own, opp) pair.
    //   reward[u_opp][u_own]
    //   cont(u_opp, z_opp, a)[u_own]
    struct Block {
        int oi, pi;
        std::vector<double> reward; // u_opp * u_own
        std::vector<double> cont;   // ((u_opp * z_opp) + z) * n_alpha ...
    };
    auto cont_at = [&](Block& b, int up, int zp, int a) -> double* {
        std::size_t i =
            ((static_cast<std::size_t>(up) * z_opp_n + zp) * n_alpha + a) *
            u_own_n;
        return b.cont.data() + i;
    };

    std::vector<Block> blocks(view.cells.size());
    std::size_t charged = 0;
    for (std::size_t ci = 0; ci < view.cells.size(); ++ci) {
        const auto& cell = view.cells[ci];
        Block& b = blocks[ci];
        b.oi = cell.oi;
        b.pi = cell.pi;
        b.reward.assign(static_cast<std::size_t>(u_opp_n) * u_own_n, 0.0);
        b.cont.assign(static_cast<std::size_t>(u_opp_n) * z_opp_n * n_alpha *
                          u_own_n,
                      0.0);
        charged += (b.reward.size() + b.cont.size()) * 8;
        for (int uo = 0; uo < u_own_n; ++uo)
            for (int up = 0; up < u_opp_n; ++up) {
                int u1 = maxrole ? uo : up;
                int u2 = maxrole ? up : uo;
                double acc = 0.0;
                for (int x = 0; x < g.n_states(); ++x)
                    if (cell.bx[x] != 0.0) acc += cell.bx[x] * g.r(x, u1, u2);
                b.reward[up * u_own_n + uo] = acc;
                for (const auto& sc : view.succ[ci][uo * u_opp_n + up])
                    for (int a = 0; a < n_alpha; ++a)
                        cont_at(b, up, sc.z_opp, a)[uo] +=
                            sc.pr * V_next.vectors[a].at(sc.y, sc.child_own);
            }
    }
    ctx.charge(charged);

    // ---- own-history column aggregation ----------------------------
    // Two own histories whose whole coefficient columns are proportional
    // to their masses can share one mixed rule.
    std::vector<std::vector<std::vector<std::int64_t>>> sig_own(
        n_own); // per own group: list of signature chunks (sorted later)
    for (std::size_t ci = 0; ci < blocks.size(); ++ci) {
        Block& b = blocks[ci];
        double m = view.own_mass[b.oi];
        std::vector<std::int64_t> chunk;
        chunk.push_back(b.pi); // row-group identity
        for (double c : b.reward) chunk.push_back(quantize(c / m));
        for (double c : b.cont) chunk.push_back(quantize(c / m));
        sig_own[b.oi].push_back(std::move(chunk));
    }
    std::unordered_map<std::vector<std::int64_t>, int, SigHash> own_class_of;
    std::vector<int> own_class(n_own);
    std::vector<std::vector<int>> own_members;
    for (int oi = 0; oi < n_own; ++oi) {
        auto& chunks = sig_own[oi];
        std::sort(chunks.begin(), chunks.end());
        std::vector<std::int64_t> flat;
        for (auto& c : chunks) {
            flat.insert(flat.end(), c.begin(), c.end());
            flat.push_back(std::numeric_limits<std::int64_t>::min());
        }
        auto [it, fresh] = own_class_of.try_emplace(
            std::move(flat), static_cast<int>(own_members.size()));
        if (fresh) own_members.push_back({});
        own_class[oi] = it->second;
        own_members[it->second].push_back(oi);
    }
    int n_oclass = static_cast<int>(own_members.size());

    // Accumulate class columns: per opp group, dense over class columns.
    struct OppRows {
        std::vector<double> reward; // u_opp * (n_oclass*u_own)
        std::vector<double> cont;   // (u_opp*z_opp*n_alpha) * (...)
    };
    int ncol = n_oclass * u_own_n;
    std::vector<OppRows> opp(n_opp);
    for (auto& orow : opp) {
        orow.reward.assign(static_cast<std::size_t>(u_opp_n) * ncol, 0.0);
        orow.cont.assign(static_cast<std::size_t>(u_opp_n) * z_opp_n *
                             n_alpha * ncol,
                         0.0);
    }
    std::size_t charged2 = 0;
    for (auto& orow : opp)
        charged2 += (orow.reward.size() + orow.cont.size()) * 8;
    ctx.charge(charged2);
    for (std::size_t ci = 0; ci < blocks.size(); ++ci) {
        Block& b = blocks[ci];
        int base = own_class[b.oi] * u_own_n;
        OppRows& orow = opp[b.pi];
        for (int up = 0; up < u_opp_n; ++up)
            for (int uo = 0; uo < u_own_n; ++uo)
                orow.reward[up * ncol + base + uo] +=
                    b.reward[up * u_own_n + uo];
        for (int up = 0; up < u_opp_n; ++up)
            for (int zp = 0; zp < z_opp_n; ++zp)
                for (int a = 0; a < n_alpha; ++a) {
                    const double* src = cont_at(b, up, zp, a);
                    double* dst =
                        orow.cont.data() +
                        (((static_cast<std::size_t>(up) * z_opp_n + zp) *
                              n_alpha +
                          a)) *
                            ncol +
                        base;
                    for (int uo = 0; uo < u_own_n; ++uo) dst[uo] += src[uo];
                }
    }
    ctx.release(charged); // raw blocks done
    blocks.clear();
    blocks.shrink_to_fit();

    // ---- opponent-history row-group aggregation ---------------------
    std::unordered_map<std::vector<std::int64_t>, int, SigHash> opp_class_of;
    std::vector<int> opp_class(n_opp);
    std::vector<std::vector<int>> opp_members;
    for (int pi = 0; pi < n_opp; ++pi) {
        double m = view.opp_mass[pi];
        std::vector<std::int64_t> flat;
        flat.reserve(opp[pi].reward.size() + opp[pi].cont.size());
        for (double c : opp[pi].reward) flat.push_back(quantize(c / m));
        for (double c : opp[pi].cont) flat.push_back(quantize(c / m));
        auto [it, fresh] = opp_class_of.try_emplace(
            std::move(flat), static_cast<int>(opp_members.size()));
        if (fresh) opp_members.push_back({});
        opp_class[pi] = it->second;
        opp_members[it->second].push_back(pi);
    }
    int n_pclass = static_cast<int>(opp_members.size());

    // ---- LP assembly over classes -----------------------------------
    LinearProgram lp;
    lp.maximize = maxrole;
    // x(u_own | own class)
    for (int k = 0; k < n_oclass; ++k)
        for (int uo = 0; uo < u_own_n; ++uo) lp.add_var(0.0);
    std::vector<int> wvar(n_pclass), gbase(n_pclass);
    for (int k = 0; k < n_pclass; ++k) {
        wvar[k] = lp.add_var(1.0, -kInf);
        gbase[k] = static_cast<int>(lp.objective.size());
        for (int i = 0; i < u_opp_n * z_opp_n; ++i) lp.add_var(0.0, -kInf);
    }
    std::size_t nv = lp.objective.size();

    for (int k = 0; k < n_oclass; ++k) {
        LinearProgram::Row row;
        row.coeffs.assign(nv, 0.0);
        for (int uo = 0; uo < u_own_n; ++uo)
            row.coeffs[k * u_own_n + uo] = 1.0;
        row.rel = LinearProgram::Rel::eq;
        row.rhs = 1.0;
        lp.rows.push_back(std::move(row));
    }

    auto rel_bound = maxrole ? LinearProgram::Rel::le : LinearProgram::Rel::ge;
    SigHash hasher;
    std::vector<int> wrow(static_cast<std::size_t>(n_pclass) * u_opp_n, -1);
    struct GRow {
        int row, k, up, zp, alpha;
    };
    std::vector<GRow> grows;
    for (int k = 0; k < n_pclass; ++k) {
        // Class coefficient rows = sum over members (already aggregated
        // columns; summing member rows keeps the program exact).
        std::vector<double> reward(static_cast<std::size_t>(u_opp_n) * ncol,
                                   0.0);
        std::vector<double> cont(static_cast<std::size_t>(u_opp_n) *
                                     z_opp_n * n_alpha * ncol,
                                 0.0);
        for (int pi : opp_members[k]) {
            for (std::size_t i = 0; i < reward.size(); ++i)
                reward[i] += opp[pi].reward[i];
            for (std::size_t i = 0; i < cont.size(); ++i)
                cont[i] += opp[pi].cont[i];
        }
        for (int up = 0; up < u_opp_n; ++up) {
            LinearProgram::Row row; // w - reward·x - γ Σ_z g ≤/≥ 0
            row.coeffs.assign(nv, 0.0);
            row.coeffs[wvar[k]] = 1.0;
            for (int c = 0; c < ncol; ++c)
                row.coeffs[c] = -reward[up * ncol + c];
            for (int zp = 0; zp < z_opp_n; ++zp)
                row.coeffs[gbase[k] + up * z_opp_n + zp] = -gamma;
            row.rel = rel_bound;
            row.rhs = 0.0;
            wrow[static_cast<std::size_t>(k) * u_opp_n + up] =
                static_cast<int>(lp.rows.size());
            lp.rows.push_back(std::move(row));
            for (int zp = 0; zp < z_opp_n; ++zp) {
                std::unordered_set<std::size_t> local;
                for (int a = 0; a < n_alpha; ++a) {
                    LinearProgram::Row grow; // g - cont·x ≤/≥ 0
                    grow.coeffs.assign(nv, 0.0);
                    grow.coeffs[gbase[k] + up * z_opp_n + zp] = 1.0;
                    const double* src =
                        cont.data() +
                        ((static_cast<std::size_t>(up) * z_opp_n + zp) *
                         n_alpha + a) *
                            ncol;
                    std::vector<std::int64_t> sig;
                    sig.reserve(ncol);
                    for (int c = 0; c < ncol; ++c) {
                        grow.coeffs[c] = -src[c];
                        sig.push_back(quantize(src[c]));
                    }
                    // identical alpha rows collapse
                    if (!local.insert(hasher(sig)).second) continue;
                    grow.rel = rel_bound;
                    grow.rhs = 0.0;
                    grows.push_back(
                        {static_cast<int>(lp.rows.size()), k, up, zp, a});
                    lp.rows.push_back(std::move(grow));
                }
            }
        }
    }
    ctx.release(charged2);

    LpLimits lim = ctx.lp_limits();
    LpSolution sol = solve_lp(lp, &lim);
    if (sol.status != LpStatus::optimal) {
        const char* st = sol.status == LpStatus::infeasible ? "infeasible"
                         : sol.status == LpStatus::unbounded ? "unbounded"
                                                             : "numerical";
        throw std::runtime_error(
            std::string("greedy LP did not reach optimality (") + st + ", " +
            std::to_string(lp.objective.size()) + " vars, " +
            std::to_string(lp.rows.size()) + " rows)");
    }

    GreedyResult out;
    out.value = sol.objective;
    out.rule.owner = role;
    out.rule.stage = s.stage;
    out.rule.n_controls = u_own_n;
    for (int oi = 0; oi < n_own; ++oi) {
        std::vector<double> mix(u_own_n);
        double mass = 0.0;
        for (int uo = 0; uo < u_own_n; ++uo) {
            double p = sol.primal[own_class[oi] * u_own_n + uo];
            mix[uo] = std::max(0.0, p);
            mass += mix[uo];
        }
        if (mass <= 0.0) {
            mix.assign(u_own_n, 1.0 / u_own_n);
        } else {
            for (double& p : mix) p /= mass;
        }
        out.rule.probs[view.own_hist[oi]] = std::move(mix);
    }
    // Opponent mix per class from the w-row duals: dual feasibility for
    // the free w variable makes each class's duals sum to one.
    out.opp_rule.owner = other(role);
    out.opp_rule.stage = s.stage;
    out.opp_rule.n_controls = u_opp_n;
    std::vector<std::vector<double>> class_mix(n_pclass);
    for (int k = 0; k < n_pclass; ++k) {
        std::vector<double> mix(u_opp_n);
        double mass = 0.0;
        for (int up = 0; up < u_opp_n; ++up) {
            int r = wrow[static_cast<std::size_t>(k) * u_opp_n + up];
            double d = r >= 0 && r < static_cast<int>(sol.duals.size())
                           ? std::abs(sol.duals[r])
                           : 0.0;
            mix[up] = d;
            mass += d;
        }
        if (mass <= 1e-12) {
            mix.assign(u_opp_n, 1.0 / u_opp_n);
        } else {
            for (double& p : mix) p /= mass;
        }
        class_mix[k] = std::move(mix);
    }
    for (int pi = 0; pi < n_opp; ++pi)
        out.opp_rule.probs[view.opp_hist[pi]] = class_mix[opp_class[pi]];
    // Opponent next-stage branch mixes from the g-row duals.  Dual
    // feasibility for the free g variable makes the mass on branch
    // (k, u, z) total discount * w-dual(k, u), so normalizing within the
    // branch gives the conditional mix over continuations; the vector
    // control tags project it to a stage s.stage+1 rule.  Skipped when
    // V_next carries no plan tags (the boundary).
    bool tags_ok = n_alpha > 0;
    for (int a = 0; a < n_alpha && tags_ok; ++a)
        tags_ok = V_next.vectors[a].plan_tag.opp_control >= 0;
    if (tags_ok) {
        out.opp_next_rule.owner = other(role);
        out.opp_next_rule.stage = s.stage + 1;
        out.opp_next_rule.n_controls = u_opp_n;
        std::vector<double> bm(static_cast<std::size_t>(n_pclass) * u_opp_n *
                                   z_opp_n * u_opp_n,
                               0.0);
        for (const auto& gr : grows) {
            if (gr.row >= static_cast<int>(sol.duals.size())) continue;
            double d = std::abs(sol.duals[gr.row]);
            if (d <= 0.0) continue;
            int un = V_next.vectors[gr.alpha].plan_tag.opp_control;
            bm[((static_cast<std::size_t>(gr.k) * u_opp_n + gr.up) *
                    z_opp_n +
                gr.zp) *
                   u_opp_n +
               un] += d;
        }
        HistoryPool& opp_pool = ctx.hist.of(other(role));
        for (int k = 0; k < n_pclass; ++k)
            for (int up = 0; up < u_opp_n; ++up)
                for (int zp = 0; zp < z_opp_n; ++zp) {
                    const double* slice =
                        bm.data() +
                        ((static_cast<std::size_t>(k) * u_opp_n + up) *
                             z_opp_n +
                         zp) *
                            u_opp_n;
                    double mass = 0.0;
                    for (int un = 0; un < u_opp_n; ++un) mass += slice[un];
                    if (mass <= 1e-12) continue;
                    std::vector<double> mix(u_opp_n);
                    for (int un = 0; un < u_opp_n; ++un)
                        mix[un] = slice[un] / mass;
                    for (int pi : opp_members[k])
                        out.opp_next_rule
                            .probs[opp_pool.child(view.opp_hist[pi], up, zp)] =
                            mix;
                }
        out.has_opp_next = !out.opp_next_rule.probs.empty();
    }
    return out;
}

Collection backup_collection(PlanningContext& ctx, Player role,
                             const OccupancyState& s,
                             const DecisionRule& own_rule,
                             const CollectionPtr& V_next) {
    const ZsPosg& g = *ctx.game;
    ctx.check_time();
    bool maxrole = role == Player::maximizer;
    int u_own_n = g.n_controls(role);
    int u_opp_n = g.n_controls(other(role));
    int z_opp_n = g.n_obs(other(role));
    int n_alpha = static_cast<int>(V_next->vectors.size());
    double gamma = g.discount;

    View view = make_view(ctx, role, s);
    int n_opp = static_cast<int>(view.opp_hist.size());

    // Per opponent history of s: sigma(u_opp, z_opp) = the V_next vector
    // best for the opponent at that branch under the unnormalized
    // successor evaluation; ties keep the lowest index.  These match the
    // binding continuation rows of the greedy LP, which carries one g
    // variable per opponent history class.  Collapsing them across
    // opponent histories would strip the opponent's history-dependent
    // replies from the emitted plans.
    std::vector<std::vector<double>> score(
        static_cast<std::size_t>(n_opp) * u_opp_n * z_opp_n,
        std::vector<double>(n_alpha, 0.0));
    for (std::size_t ci = 0; ci < view.cells.size(); ++ci) {
        int own_h = view.own_hist[view.cells[ci].oi];
        int pi = view.cells[ci].pi;
        std::vector<double> d = own_rule.dist(own_h);
        for (int uo = 0; uo < u_own_n; ++uo) {
            if (d[uo] == 0.0) continue;
            for (int up = 0; up < u_opp_n; ++up)
                for (const auto& sc : view.succ[ci][uo * u_opp_n + up])
                    for (int a = 0; a < n_alpha; ++a)
                        score[(static_cast<std::size_t>(pi) * u_opp_n + up) *
                                  z_opp_n +
                              sc.z_opp][a] +=
                            d[uo] * sc.pr *
                            V_next->vectors[a].at(sc.y, sc.child_own);
        }
    }

    Collection out;
    out.conditioner = other(role);
    out.stage = s.stage;
    out.supporting_rule = own_rule;
    out.built_against = V_next;

    HistoryPool& own_pool = ctx.hist.of(role);
    int z_own_n = g.n_obs(role);
    // Emitted plans per opponent control: the per-opponent-history
    // arg-best sigma tuples (these attain the LP optimum at the witness)
    // plus one constant sigma per V_next vector.  The constants matter
    // away from the witness: the greedy LP prices continuations per
    // (opponent history, control, observation) branch independently, so
    // covering every V_next vector on every branch lets later LPs
    // recombine them into the opponent's true best reply instead of
    // being locked to the witness's preferred continuations.
    std::set<std::pair<int, std::vector<int>>> emitted;
    for (int up = 0; up < u_opp_n; ++up) {
        for (int pi = 0; pi < std::max(n_opp, 1) + n_alpha; ++pi) {
            std::vector<int> sigma(z_opp_n, 0);
            if (pi < n_opp) {
                for (int zp = 0; zp < z_opp_n; ++zp) {
                    const auto& sc =
                        score[(static_cast<std::size_t>(pi) * u_opp_n + up) *
                                  z_opp_n +
                              zp];
                    int best = 0;
                    for (int a = 1; a < n_alpha; ++a)
                        if (maxrole ? sc[a] < sc[best] : sc[a] > sc[best])
                            best = a;
                    sigma[zp] = best;
                }
            } else if (pi >= std::max(n_opp, 1)) {
                sigma.assign(z_opp_n, pi - std::max(n_opp, 1));
            }
            if (!emitted.insert({up, sigma}).second) continue;

            AlphaVector v;
            v.conditioner = other(role);
            v.stage = s.stage;
            v.plan_tag.opp_control = up;
            v.plan_tag.continuation = sigma;
            // Defaults: uniform own play now, sigma continuations after.
            v.default_by_state.assign(g.n_states(), 0.0);
            for (int x = 0; x < g.n_states(); ++x) {
                double acc = 0.0;
                for (int uo = 0; uo < u_own_n; ++uo) {
                    int u1 = maxrole ? uo : up;
                    int u2 = maxrole ? up : uo;
                    double term = g.r(x, u1, u2);
                    for (int y = 0; y < g.n_states(); ++y)
                        for (int zo = 0; zo < z_own_n; ++zo)
                            for (int zp = 0; zp < z_opp_n; ++zp) {
                                int z1 = maxrole ? zo : zp;
                                int z2 = maxrole ? zp : zo;
                                double pr = g.p(x, u1, u2, y, z1, z2);
                                if (pr == 0.0) continue;
                                term += gamma * pr *
                                        V_next->vectors[sigma[zp]]
                                            .default_by_state[y];
                            }
                    acc += term / u_own_n;
                }
                v.default_by_state[x] = acc;
            }
            // Sparse values on every (state, own history) seen in s.
            for (int oi = 0; oi < static_cast<int>(view.own_hist.size());
                 ++oi) {
                int h = view.own_hist[oi];
                std::vector<double> d = own_rule.dist(h);
                for (int x = 0; x < g.n_states(); ++x) {
                    double acc = 0.0;
                    for (int uo = 0; uo < u_own_n; ++uo) {
                        if (d[uo] == 0.0) continue;
                        int u1 = maxrole ? uo : up;
                        int u2 = maxrole ? up : uo;
                        double term = g.r(x, u1, u2);
                        for (int y = 0; y < g.n_states(); ++y)
                            for (int zo = 0; zo < z_own_n; ++zo)
                                for (int zp = 0; zp < z_opp_n; ++zp) {
                                    int z1 = maxrole ? zo : zp;
                                    int z2 = maxrole ? zp : zo;
                                    double pr = g.p(x, u1, u2, y, z1, z2);
                                    if (pr == 0.0) continue;
                                    const AlphaVector& av =
                                        V_next->vectors[sigma[zp]];
                                    term +=
                                        gamma * pr *
                                        av.at(y, own_pool.child(h, uo, zo));
                                }
                        acc += d[uo] * term;
                    }
                    v.set(x, h, acc);
                }
            }
            out.vectors.push_back(std::move(v));
        }
    }
    return out;
}

CollectionPtr boundary_collection(const ZsPosg& game, int horizon,
                                  Player conditioner) {
    auto c = std::make_shared<Collection>();
    c->conditioner = conditioner;
    c->stage = horizon;
    c->supporting_rule = DecisionRule::uniform(
        other(conditioner), horizon, game.n_controls(other(conditioner)));
    AlphaVector zero;
    zero.conditioner = conditioner;
    zero.stage = horizon;
    zero.default_by_state.assign(game.n_states(), 0.0);
    c->vectors.push_back(std::move(zero));
    return c;
}

BackupResult point_backup(PlanningContext& ctx, const OccupancyState& s,
                          const Family& F_next_min_side,
                          const Family& F_next_max_side) {
    BackupResult out;
    int best_min = -1, best_max = -1;
    GreedyResult max_pass, min_pass; // winning LPs of either pass
    for (std::size_t i = 0; i < F_next_min_side.collections.size(); ++i) {
        GreedyResult r = greedy_lp(ctx, Player::maximizer, s,
                                   *F_next_min_side.collections[i]);
        if (best_min < 0 || r.value > max_pass.value + 1e-12) {
            max_pass = std::move(r);
            best_min = static_cast<int>(i);
        }
    }
    for (std::size_t i = 0; i < F_next_max_side.collections.size(); ++i) {
        GreedyResult r = greedy_lp(ctx, Player::minimizer, s,
                                   *F_next_max_side.collections[i]);
        if (best_max < 0 || r.value < min_pass.value - 1e-12) {
            min_pass = std::move(r);
            best_max = static_cast<int>(i);
        }
    }
    const CollectionPtr& win_min_side = F_next_min_side.collections[best_min];
    const CollectionPtr& win_max_side = F_next_max_side.collections[best_max];
    out.value = max_pass.value;
    out.greedy_rule_max = max_pass.rule;
    out.greedy_rule_min = min_pass.rule;
    out.new_collection_min_side = backup_collection(
        ctx, Player::maximizer, s, out.greedy_rule_max, win_min_side);
    out.new_collection_max_side = backup_collection(
        ctx, Player::minimizer, s, out.greedy_rule_min, win_max_side);
    auto differs = [](const DecisionRule& a, const DecisionRule& b) {
        for (const auto& [h, pa] : a.probs) {
            std::vector<double> pb = b.dist(h);
            for (std::size_t u = 0; u < pa.size(); ++u)
                if (std::abs(pa[u] - pb[u]) > 1e-9) return true;
        }
        return false;
    };
    // At a degenerate point the opposing pass's w-dual mix is a saddle
    // rule that no primal vertex exhibits; embed it as well.  Its eval
    // at s never exceeds the pass optimum (the LP maximizes over all
    // stage rules, the dual rule included), so the witness-exactness of
    // the primal collection is what the family eval reports.
    if (differs(min_pass.opp_rule, out.greedy_rule_max))
        out.extra_min_side.push_back(
            {backup_collection(ctx, Player::maximizer, s, min_pass.opp_rule,
                               win_min_side),
             s});
    if (differs(max_pass.opp_rule, out.greedy_rule_min))
        out.extra_max_side.push_back(
            {backup_collection(ctx, Player::minimizer, s, max_pass.opp_rule,
                               win_max_side),
             s});
    // The g-dual next-stage rules, embedded at the successor of s under
    // the dual joint play and chained to the continuation snapshot the
    // winning collection itself was built against.  When the successor
    // sits on an indifference facet of the next stage's local game these
    // mixes are interior and the next stage's own backups cannot produce
    // them (their LPs return vertices), yet they are exactly what makes
    // this stage's saddle hold - without them the family on the weaker
    // side freezes strictly short of the game value.
    if (min_pass.has_opp_next && win_min_side->built_against &&
        differs(min_pass.opp_next_rule, win_min_side->supporting_rule)) {
        OccupancyState succ =
            transition(ctx, s, min_pass.opp_rule, min_pass.rule);
        out.extra_min_side.push_back(
            {backup_collection(ctx, Player::maximizer, succ,
                               min_pass.opp_next_rule,
                               win_min_side->built_against),
             std::move(succ)});
    }
    if (max_pass.has_opp_next && win_max_side->built_against &&
        differs(max_pass.opp_next_rule, win_max_side->supporting_rule)) {
        OccupancyState succ =
            transition(ctx, s, max_pass.rule, max_pass.opp_rule);
        out.extra_max_side.push_back(
            {backup_collection(ctx, Player::minimizer, succ,
                               max_pass.opp_next_rule,
                               win_max_side->built_against),
             std::move(succ)});
    }
    return out;
}

} // namespace posg
