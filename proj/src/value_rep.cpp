#include "posg/value_rep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace posg {

double eval_alpha(const AlphaVector& v, const Conditional& c, int* misses) {
    double acc = 0.0;
    for (const auto& [x, h, w] : c.entries) {
        if (misses && !v.has(x, h)) ++*misses;
        acc += w * v.at(x, h);
    }
    return acc;
}

namespace {

// Index of the inner-aggregation winner for one conditional: the
// minimizing vector for min-conditioned collections, maximizing for the
// mirror.  Ties keep the earliest vector.
int inner_argbest(const Collection& V, const Conditional& c, double* out) {
    bool take_min = V.conditioner == Player::minimizer;
    int best = 0;
    double bv = eval_alpha(V.vectors[0], c);
    for (std::size_t i = 1; i < V.vectors.size(); ++i) {
        double v = eval_alpha(V.vectors[i], c);
        if (take_min ? v < bv : v > bv) {
            bv = v;
            best = static_cast<int>(i);
        }
    }
    if (out) *out = bv;
    return best;
}

// a <= b + eps at every (state, history) pair.  Off both supports the
// vectors evaluate to their per-state defaults, so the full surface is
// the union of the two sparse supports plus the defaults themselves.
bool pointwise_le(const AlphaVector& a, const AlphaVector& b, double eps) {
    for (std::size_t x = 0; x < a.default_by_state.size(); ++x)
        if (a.default_by_state[x] > b.default_by_state[x] + eps) return false;
    for (const auto& [k, va] : a.values) {
        int x = static_cast<int>(k & 0xfff);
        int h = static_cast<int>(k >> 12);
        if (va > b.at(x, h) + eps) return false;
    }
    for (const auto& [k, vb] : b.values) {
        int x = static_cast<int>(k & 0xfff);
        int h = static_cast<int>(k >> 12);
        if (a.at(x, h) > vb + eps) return false;
    }
    return true;
}

// Swapping collection `gone` for retained collection `keep` moves any
// priced response by at most eps when every vector of `keep` is covered
// pointwise (within eps) by some vector of `gone`: the responder can
// then never find an option in `keep` that undercuts (overshoots, for
// the max-conditioned mirror) what `gone` offered, at any occupancy.
bool covers_everywhere(const Collection& keep, const Collection& gone,
                       double eps) {
    bool min_cond = keep.conditioner == Player::minimizer;
    for (const auto& a : keep.vectors) {
        bool matched = false;
        for (const auto& b : gone.vectors) {
            if (min_cond ? pointwise_le(b, a, eps) : pointwise_le(a, b, eps)) {
                matched = true;
                break;
            }
        }
        if (!matched) return false;
    }
    return true;
}

} // namespace

double eval_collection(const Collection& V, const OccupancyState& s) {
    double total = 0.0;
    for (const auto& c : conditionals(s, V.conditioner)) {
        double inner;
        inner_argbest(V, c, &inner);
        total += c.mass * inner;
    }
    return total;
}

FamilyEval eval_family(const Family& F, const OccupancyState& s) {
    FamilyEval out;
    if (F.collections.empty()) return out;
    bool take_max = F.conditioner == Player::minimizer;
    for (std::size_t i = 0; i < F.collections.size(); ++i) {
        double v = eval_collection(*F.collections[i], s);
        if (out.index < 0 || (take_max ? v > out.value : v < out.value)) {
            out.value = v;
            out.index = static_cast<int>(i);
        }
    }
    return out;
}

LinearBasisFunctional to_linear_basis(const CollectionPtr& V,
                                      const OccupancyState& s) {
    LinearBasisFunctional f;
    f.stage = V->stage;
    f.conditioner = V->conditioner;
    f.source = V;
    for (const auto& c : conditionals(s, V->conditioner))
        f.assignment[c.given_h] = inner_argbest(*V, c, nullptr);
    return f;
}

double eval_linear_basis(const LinearBasisFunctional& f,
                         const OccupancyState& s) {
    double total = 0.0;
    for (const auto& c : conditionals(s, f.conditioner)) {
        auto it = f.assignment.find(c.given_h);
        int i = it == f.assignment.end() ? 0 : it->second;
        total += c.mass * eval_alpha(f.source->vectors[i], c);
    }
    return total;
}

Collection prune_alpha(const Collection& V,
                       const std::vector<Conditional>& witnesses,
                       double eps) {
    std::size_t n = V.vectors.size();
    if (n <= 1 || witnesses.empty()) return V;
    bool take_min = V.conditioner == Player::minimizer;

    // vals[i][w]: vector i at witness w.
    std::vector<std::vector<double>> vals(n);
    for (std::size_t i = 0; i < n; ++i) {
        vals[i].reserve(witnesses.size());
        for (const auto& c : witnesses)
            vals[i].push_back(eval_alpha(V.vectors[i], c));
    }
    std::vector<double> base(witnesses.size());
    for (std::size_t w = 0; w < witnesses.size(); ++w) {
        double b = vals[0][w];
        for (std::size_t i = 1; i < n; ++i)
            b = take_min ? std::min(b, vals[i][w]) : std::max(b, vals[i][w]);
        base[w] = b;
    }

    std::vector<bool> kept(n, true);
    std::size_t n_kept = n;
    // Try newest vectors first so earlier ones win ties.
    for (std::size_t ri = n; ri-- > 0 && n_kept > 1;) {
        bool removable = true;
        for (std::size_t w = 0; w < witnesses.size() && removable; ++w) {
            double best = take_min ? kInf : -kInf;
            for (std::size_t i = 0; i < n; ++i) {
                if (!kept[i] || i == ri) continue;
                best = take_min ? std::min(best, vals[i][w])
                                : std::max(best, vals[i][w]);
            }
            if (take_min ? best > base[w] + eps : best < base[w] - eps)
                removable = false;
        }
        // Witness ties are blind to conditionals the LP recombines later
        // (indifference facets evaluate identically at stored points), so
        // removal is additionally gated on one surviving vector covering
        // this one pointwise over the whole surface.
        if (removable) {
            removable = false;
            for (std::size_t i = 0; i < n && !removable; ++i) {
                if (!kept[i] || i == ri) continue;
                removable = take_min
                                ? pointwise_le(V.vectors[i], V.vectors[ri], eps)
                                : pointwise_le(V.vectors[ri], V.vectors[i], eps);
            }
        }
        if (removable) {
            kept[ri] = false;
            --n_kept;
        }
    }
    if (n_kept == n) return V;

    Collection out;
    out.conditioner = V.conditioner;
    out.stage = V.stage;
    out.supporting_rule = V.supporting_rule;
    out.built_against = V.built_against;
    out.witness_id = V.witness_id;
    for (std::size_t i = 0; i < n; ++i)
        if (kept[i]) out.vectors.push_back(V.vectors[i]);
    return out;
}

void prune_collections(Family& F, double eps) {
    std::size_t n = F.collections.size();
    if (n <= 1 || F.witnesses.empty()) return;
    bool take_max = F.conditioner == Player::minimizer;

    std::vector<std::vector<double>> vals(n);
    for (std::size_t i = 0; i < n; ++i) {
        vals[i].reserve(F.witnesses.size());
        for (const auto& w : F.witnesses)
            vals[i].push_back(eval_collection(*F.collections[i], w.point));
    }
    std::vector<double> base(F.witnesses.size());
    for (std::size_t w = 0; w < F.witnesses.size(); ++w) {
        double b = vals[0][w];
        for (std::size_t i = 1; i < n; ++i)
            b = take_max ? std::max(b, vals[i][w]) : std::min(b, vals[i][w]);
        base[w] = b;
    }

    std::vector<bool> kept(n, true);
    std::size_t n_kept = n;
    for (std::size_t ri = n; ri-- > 0 && n_kept > 1;) {
        bool removable = true;
        for (std::size_t w = 0; w < F.witnesses.size() && removable; ++w) {
            double best = take_max ? -kInf : kInf;
            for (std::size_t i = 0; i < n; ++i) {
                if (!kept[i] || i == ri) continue;
                best = take_max ? std::max(best, vals[i][w])
                                : std::min(best, vals[i][w]);
            }
            if (take_max ? best < base[w] - eps : best > base[w] + eps)
                removable = false;
        }
        // A collection that merely ties at every witness can still be the
        // unique seat of an off-witness optimum (stage boundaries sit on
        // indifference facets where everything ties).  Require a survivor
        // that covers it everywhere before letting it go.
        if (removable) {
            removable = false;
            for (std::size_t i = 0; i < n && !removable; ++i) {
                if (!kept[i] || i == ri) continue;
                removable = covers_everywhere(*F.collections[i],
                                              *F.collections[ri], eps);
            }
        }
        if (removable) {
            kept[ri] = false;
            --n_kept;
        }
    }
    if (n_kept == n) return;
    std::vector<CollectionPtr> survivors;
    survivors.reserve(n_kept);
    for (std::size_t i = 0; i < n; ++i)
        if (kept[i]) survivors.push_back(F.collections[i]);
    F.collections = std::move(survivors);
}

std::size_t approx_bytes(const Collection& V) {
    std::size_t b = 128;
    for (const auto& v : V.vectors)
        b += 64 + v.values.size() * 24 + v.default_by_state.size() * 8 +
             v.plan_tag.continuation.size() * 4;
    for (const auto& [h, d] : V.supporting_rule.probs)
        b += 40 + d.size() * 8;
    return b;
}

std::size_t approx_bytes(const OccupancyState& s) {
    return 64 + s.entries.size() * sizeof(OccEntry);
}

namespace {

const char* side_name(Player conditioner) {
    return conditioner == Player::minimizer ? "min" : "max";
}

std::string path_or_dash(const HistoryPool& pool, int h) {
    std::string p = pool.render(h);
    return p.empty() ? "-" : p;
}

int dash_path(HistoryPool& pool, const std::string& tok) {
    return tok == "-" ? HistoryPool::kEmpty : pool.intern_path(tok);
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void serialize_side(const PlanningContext& ctx,
                    const std::vector<Family>& fams, Player cond,
                    std::unordered_map<const Collection*, int>& gid,
                    int& next_gid, std::ostringstream& out) {
    const HistoryPool& own = ctx.hist.of(other(cond)); // vector histories
    const HistoryPool& hmax = ctx.hist.of(Player::maximizer);
    const HistoryPool& hmin = ctx.hist.of(Player::minimizer);
    for (std::size_t stage = fams.size(); stage-- > 0;) {
        const Family& F = fams[stage];
        out << "side " << side_name(cond) << " stage " << stage
            << " collections " << F.collections.size() << " witnesses "
            << F.witnesses.size() << "\n";
        for (const auto& cp : F.collections) {
            int g = next_gid++;
            gid[cp.get()] = g;
            int against = -1;
            if (cp->built_against) {
                auto it = gid.find(cp->built_against.get());
                if (it != gid.end()) against = it->second;
            }
            out << "collection gid " << g << " built_against " << against
                << " witness " << cp->witness_id << "\n";
            out << "rule n " << cp->supporting_rule.n_controls << " entries "
                << cp->supporting_rule.probs.size() << "\n";
            for (const auto& [h, dist] : cp->supporting_rule.probs) {
                out << "re " << path_or_dash(own, h);
                for (double p : dist) out << ' ' << fmt(p);
                out << "\n";
            }
            for (const auto& v : cp->vectors) {
                out << "vector u_opp " << v.plan_tag.opp_control << " sigma";
                out << ' ' << v.plan_tag.continuation.size();
                for (int s : v.plan_tag.continuation) out << ' ' << s;
                out << " defaults " << v.default_by_state.size();
                for (double d : v.default_by_state) out << ' ' << fmt(d);
                out << " entries " << v.values.size() << "\n";
                // Canonical order for byte-stable output.
                std::vector<std::uint64_t> keys;
                keys.reserve(v.values.size());
                for (const auto& [k, _] : v.values) keys.push_back(k);
                std::sort(keys.begin(), keys.end());
                for (std::uint64_t k : keys)
                    out << "ve " << path_or_dash(own, (int)(k >> 12)) << ' '
                        << (int)(k & 0xfff) << ' ' << fmt(v.values.at(k))
                        << "\n";
            }
        }
        for (const auto& w : F.witnesses) {
            out << "witness id " << w.id << " pinned " << (w.pinned ? 1 : 0)
                << " entries " << w.point.entries.size() << "\n";
            for (const auto& e : w.point.entries)
                out << "we " << e.x << ' ' << path_or_dash(hmax, e.h_max)
                    << ' ' << path_or_dash(hmin, e.h_min) << ' ' << fmt(e.w)
                    << "\n";
        }
    }
}

} // namespace

std::string serialize_families(const PlanningContext& ctx,
                               const std::vector<Family>& min_side,
                               const std::vector<Family>& max_side) {
    std::ostringstream out;
    out << "posg-families v1\n";
    out << "stages " << min_side.size() << "\n";
    std::unordered_map<const Collection*, int> gid;
    int next_gid = 0;
    serialize_side(ctx, min_side, Player::minimizer, gid, next_gid, out);
    serialize_side(ctx, max_side, Player::maximizer, gid, next_gid, out);
    return out.str();
}

void parse_families(PlanningContext& ctx, const std::string& text,
                    std::vector<Family>& min_side,
                    std::vector<Family>& max_side) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "posg-families v1")
        throw std::runtime_error("bad families header");
    std::string tok;
    std::size_t stages = 0;
    {
        std::getline(in, line);
        std::istringstream ls(line);
        ls >> tok >> stages;
        if (tok != "stages") throw std::runtime_error("bad families header");
    }
    min_side.assign(stages, Family{});
    max_side.assign(stages, Family{});
    for (std::size_t t = 0; t < stages; ++t) {
        min_side[t].conditioner = Player::minimizer;
        min_side[t].stage = static_cast<int>(t);
        max_side[t].conditioner = Player::maximizer;
        max_side[t].stage = static_cast<int>(t);
    }

    std::unordered_map<int, CollectionPtr> by_gid;
    Family* cur = nullptr;
    Player cond = Player::minimizer;
    std::shared_ptr<Collection> open; // collection being filled
    int open_gid = -1;
    auto flush = [&]() {
        if (open) {
            CollectionPtr done = open;
            by_gid[open_gid] = done;
            cur->collections.push_back(done);
            open = nullptr;
        }
    };

    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        ls >> tok;
        if (tok == "side") {
            flush();
            std::string side;
            std::size_t stage, nc, nw;
            ls >> side >> tok >> stage >> tok >> nc >> tok >> nw;
            cond = side == "min" ? Player::minimizer : Player::maximizer;
            cur = cond == Player::minimizer ? &min_side[stage]
                                            : &max_side[stage];
        } else if (tok == "collection") {
            flush();
            int g, against, wid;
            ls >> tok >> g >> tok >> against >> tok >> wid;
            open = std::make_shared<Collection>();
            open_gid = g;
            open->conditioner = cond;
            open->stage = cur->stage;
            open->witness_id = wid;
            if (against >= 0) open->built_against = by_gid.at(against);
        } else if (tok == "rule") {
            int nc;
            std::size_t entries;
            ls >> tok >> nc >> tok >> entries;
            open->supporting_rule.owner = other(cond);
            open->supporting_rule.stage = open->stage;
            open->supporting_rule.n_controls = nc;
        } else if (tok == "re") {
            std::string hpath;
            ls >> hpath;
            int h = dash_path(ctx.hist.of(other(cond)), hpath);
            std::vector<double> dist(open->supporting_rule.n_controls);
            for (double& p : dist) ls >> p;
            open->supporting_rule.probs[h] = dist;
        } else if (tok == "vector") {
            AlphaVector v;
            v.conditioner = cond;
            v.stage = open->stage;
            std::size_t nsig, ndef, nent;
            ls >> tok >> v.plan_tag.opp_control >> tok >> nsig;
            v.plan_tag.continuation.resize(nsig);
            for (int& s : v.plan_tag.continuation) ls >> s;
            ls >> tok >> ndef;
            v.default_by_state.resize(ndef);
            for (double& d : v.default_by_state) ls >> d;
            ls >> tok >> nent;
            open->vectors.push_back(std::move(v));
        } else if (tok == "ve") {
            std::string hpath;
            int x;
            double val;
            ls >> hpath >> x >> val;
            int h = dash_path(ctx.hist.of(other(cond)), hpath);
            open->vectors.back().set(x, h, val);
        } else if (tok == "witness") {
            flush();
            Family::Witness w;
            int pinned;
            std::size_t entries;
            ls >> tok >> w.id >> tok >> pinned >> tok >> entries;
            w.pinned = pinned != 0;
            w.point.stage = cur->stage;
            cur->witnesses.push_back(std::move(w));
        } else if (tok == "we") {
            OccEntry e;
            std::string p1, p2;
            ls >> e.x >> p1 >> p2 >> e.w;
            e.h_max = dash_path(ctx.hist.of(Player::maximizer), p1);
            e.h_min = dash_path(ctx.hist.of(Player::minimizer), p2);
            cur->witnesses.back().point.entries.push_back(e);
        } else {
            throw std::runtime_error("bad families line: " + line);
        }
    }
    flush();
}

} // namespace posg
