#include "posg/pbvi.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>

namespace posg {

namespace {

std::vector<int> own_support(const OccupancyState& s, Player p) {
    std::vector<int> hs;
    hs.reserve(s.entries.size());
    for (const auto& e : s.entries)
        hs.push_back(p == Player::maximizer ? e.h_max : e.h_min);
    std::sort(hs.begin(), hs.end());
    hs.erase(std::unique(hs.begin(), hs.end()), hs.end());
    return hs;
}

DecisionRule random_deterministic_rule(std::mt19937_64& rng, const ZsPosg& g,
                                       Player p, int stage,
                                       const OccupancyState& s) {
    const int nc = g.n_controls(p);
    DecisionRule r{p, stage, nc, {}};
    std::uniform_int_distribution<int> pick(0, nc - 1);
    for (int h : own_support(s, p)) {
        std::vector<double> d(nc, 0.0);
        d[pick(rng)] = 1.0;
        r.probs.emplace(h, std::move(d));
    }
    return r;
}

struct RulePair {
    DecisionRule a_max;
    DecisionRule a_min;
    bool have = false;
};

// Best greedy rules against the next-stage families; ties keep the
// earliest collection so reruns are reproducible.
RulePair greedy_joint(PbviState& st, const OccupancyState& s) {
    RulePair rp;
    const Family& fmin = st.fam_min[s.stage + 1];
    const Family& fmax = st.fam_max[s.stage + 1];
    if (fmin.collections.empty() || fmax.collections.empty()) return rp;
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& c : fmin.collections) {
        GreedyResult g = greedy_lp(st.ctx, Player::maximizer, s, *c);
        if (g.value > best + 1e-12) {
            best = g.value;
            rp.a_max = std::move(g.rule);
        }
    }
    best = std::numeric_limits<double>::infinity();
    for (const auto& c : fmax.collections) {
        GreedyResult g = greedy_lp(st.ctx, Player::minimizer, s, *c);
        if (g.value < best - 1e-12) {
            best = g.value;
            rp.a_min = std::move(g.rule);
        }
    }
    rp.have = true;
    return rp;
}

// Registers p as a witness of both stage-tau families (same id in each),
// deduplicating exact repeats and evicting the oldest unpinned witness
// once the cap is exceeded.  The stage-0 start point is pinned, as are
// points a caller marks structural (dual-embedded occupancies are part
// of the solution's support, not samples, so point pruning skips them).
int register_witness(PbviState& st, int tau, const OccupancyState& p,
                     bool pin = false) {
    Family& fmin = st.fam_min[tau];
    Family& fmax = st.fam_max[tau];
    for (std::size_t i = 0; i < fmin.witnesses.size(); ++i) {
        if (fmin.witnesses[i].point != p) continue;
        if (pin) {
            fmin.witnesses[i].pinned = true;
            fmax.witnesses[i].pinned = true;
        }
        return fmin.witnesses[i].id;
    }
    const bool pinned = pin || (tau == 0 && p == st.s0);
    const int id = pinned ? 0 : st.next_witness_id++;
    st.ctx.charge(2 * approx_bytes(p));
    fmin.witnesses.push_back(Family::Witness{id, p, pinned});
    fmax.witnesses.push_back(Family::Witness{id, p, pinned});
    if (static_cast<int>(fmin.witnesses.size()) > kWitnessCap) {
        for (std::size_t i = 0; i < fmin.witnesses.size(); ++i) {
            if (fmin.witnesses[i].pinned) continue;
            st.ctx.release(2 * approx_bytes(fmin.witnesses[i].point));
            fmin.witnesses.erase(fmin.witnesses.begin() + i);
            fmax.witnesses.erase(fmax.witnesses.begin() + i);
            break;
        }
    }
    return id;
}

std::size_t family_bytes(const Family& f) {
    std::size_t b = 0;
    for (const auto& c : f.collections) b += approx_bytes(*c);
    return b;
}

bool same_collection(const Collection& a, const Collection& b) {
    if (a.vectors.size() != b.vectors.size()) return false;
    for (std::size_t i = 0; i < a.vectors.size(); ++i) {
        const AlphaVector& va = a.vectors[i];
        const AlphaVector& vb = b.vectors[i];
        if (va.plan_tag.opp_control != vb.plan_tag.opp_control ||
            va.plan_tag.continuation != vb.plan_tag.continuation)
            return false;
        if (va.values.size() != vb.values.size()) return false;
        for (std::size_t x = 0; x < va.default_by_state.size(); ++x)
            if (std::abs(va.default_by_state[x] - vb.default_by_state[x]) >
                1e-9)
                return false;
        for (const auto& [key, val] : va.values) {
            auto it = vb.values.find(key);
            if (it == vb.values.end() || std::abs(val - it->second) > 1e-9)
                return false;
        }
    }
    return true;
}

// Appends unless an existing collection already carries the same plans
// and values; re-emission of a settled backup then leaves the family
// (and every LP pass over it) unchanged.
void insert_collection(PbviState& st, Family& f, Collection&& c) {
    for (const auto& existing : f.collections)
        if (same_collection(*existing, c)) return;
    auto cp = std::make_shared<const Collection>(std::move(c));
    st.ctx.charge(approx_bytes(*cp));
    f.collections.push_back(std::move(cp));
}

// pbvi2/pbvi3 in-sweep pruning of the newest collection plus a bounded
// sweep over whole collections, with the memory ledger kept in step.
void prune_stage(PbviState& st, int tau, double eps) {
    Family& fmin = st.fam_min[tau];
    Family& fmax = st.fam_max[tau];

    std::vector<Conditional> wits_min, wits_max;
    for (const auto& w : fmin.witnesses) {
        auto cs = conditionals(w.point, Player::minimizer);
        wits_min.insert(wits_min.end(), cs.begin(), cs.end());
        auto cs2 = conditionals(w.point, Player::maximizer);
        wits_max.insert(wits_max.end(), cs2.begin(), cs2.end());
    }

    // Each stage may prune twice (vectors of the newest collection, then
    // whole collections), so each pass gets half the budget: the composite
    // value drop at any witness stays within eps per sweep.
    const double half = 0.5 * eps;
    auto prune_last = [&](Family& f, const std::vector<Conditional>& wits) {
        if (f.collections.empty()) return;
        const CollectionPtr& last = f.collections.back();
        Collection pruned = prune_alpha(*last, wits, half);
        if (pruned.vectors.size() < last->vectors.size()) {
            st.ctx.release(approx_bytes(*last));
            f.collections.back() =
                std::make_shared<const Collection>(std::move(pruned));
            st.ctx.charge(approx_bytes(*f.collections.back()));
        }
    };
    prune_last(fmin, wits_min);
    prune_last(fmax, wits_max);

    const std::size_t before = family_bytes(fmin) + family_bytes(fmax);
    prune_collections(fmin, half);
    prune_collections(fmax, half);
    const std::size_t after = family_bytes(fmin) + family_bytes(fmax);
    if (after < before) st.ctx.release(before - after);
}

} // namespace

PbviState::PbviState(const ZsPosg& game, int horizon,
                     const SolverConfig& config)
    : ctx(game), horizon(horizon) {
    ctx.deadline = std::chrono::steady_clock::now() +
                   std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                       std::chrono::duration<double>(config.time_budget));
    ctx.memory_budget = config.memory_budget;
    fam_min.resize(horizon + 1);
    fam_max.resize(horizon + 1);
    for (int t = 0; t <= horizon; ++t) {
        fam_min[t].conditioner = Player::minimizer;
        fam_max[t].conditioner = Player::maximizer;
        fam_min[t].stage = fam_max[t].stage = t;
    }
    fam_min[horizon].collections.push_back(
        boundary_collection(game, horizon, Player::minimizer));
    fam_max[horizon].collections.push_back(
        boundary_collection(game, horizon, Player::maximizer));
    s0 = initial_occupancy(game);
    rng.seed(config.rng_seed);
}

std::vector<OccupancyState> explore(PbviState& st,
                                    const SolverConfig& config) {
    std::vector<OccupancyState> pts;
    pts.reserve(st.horizon);
    pts.push_back(st.s0);
    const double rate = std::clamp(config.exploration_rate, 0.0, 1.0);
    std::bernoulli_distribution coin(rate);
    for (int tau = 0; tau + 1 < st.horizon; ++tau) {
        st.ctx.check_time();
        const OccupancyState& s = pts.back();
        const ZsPosg& g = *st.ctx.game;
        DecisionRule a1 = DecisionRule::uniform(
            Player::maximizer, tau, g.n_controls(Player::maximizer));
        DecisionRule a2 = DecisionRule::uniform(
            Player::minimizer, tau, g.n_controls(Player::minimizer));
        if (coin(st.rng)) {
            a1 = random_deterministic_rule(st.rng, g, Player::maximizer, tau, s);
            a2 = random_deterministic_rule(st.rng, g, Player::minimizer, tau, s);
        } else {
            RulePair rp = greedy_joint(st, s);
            if (rp.have) {
                a1 = std::move(rp.a_max);
                a2 = std::move(rp.a_min);
            }
        }
        pts.push_back(transition(st.ctx, s, a1, a2));
    }
    return pts;
}

double backward_sweep(PbviState& st, const SolverConfig& config,
                      const std::vector<OccupancyState>& points) {
    for (int tau = st.horizon - 1; tau >= 0; --tau) {
        st.ctx.check_time();
        const OccupancyState& pt = points[tau];
        const int wid = register_witness(st, tau, pt);
        BackupResult res =
            point_backup(st.ctx, pt, st.fam_min[tau + 1], st.fam_max[tau + 1]);
        res.new_collection_min_side.witness_id = wid;
        res.new_collection_max_side.witness_id = wid;
        insert_collection(st, st.fam_min[tau],
                          std::move(res.new_collection_min_side));
        insert_collection(st, st.fam_max[tau],
                          std::move(res.new_collection_max_side));
        // Dual-rule collections land in the family of their own stage
        // (w-dual ones at tau, g-dual ones at tau + 1) and register the
        // occupancy they were generated at as a witness there.
        for (BackupResult::Extra& e : res.extra_min_side) {
            const int t = e.collection.stage;
            e.collection.witness_id = register_witness(st, t, e.witness, true);
            insert_collection(st, st.fam_min[t], std::move(e.collection));
        }
        for (BackupResult::Extra& e : res.extra_max_side) {
            const int t = e.collection.stage;
            e.collection.witness_id = register_witness(st, t, e.witness, true);
            insert_collection(st, st.fam_max[t], std::move(e.collection));
        }
        if (config.variant != SolverConfig::Variant::pbvi1)
            prune_stage(st, tau, config.prune_epsilon);
    }
    return eval_family(st.fam_min[0], st.s0).value;
}

void prune_points(PbviState& st, const SolverConfig& config) {
    double base = eval_family(st.fam_min[0], st.s0).value;
    for (int tau = 0; tau < st.horizon; ++tau) {
        Family& fmin = st.fam_min[tau];
        Family& fmax = st.fam_max[tau];
        std::vector<int> ids;
        for (const auto& w : fmin.witnesses)
            if (!w.pinned) ids.push_back(w.id);
        for (int id : ids) {
            auto tied = [id](const CollectionPtr& c) {
                return c->witness_id == id;
            };
            const auto n_min = std::count_if(fmin.collections.begin(),
                                             fmin.collections.end(), tied);
            const auto n_max = std::count_if(fmax.collections.begin(),
                                             fmax.collections.end(), tied);
            // Never empty a family that later backups still consume.
            if (n_min == static_cast<long>(fmin.collections.size()) ||
                n_max == static_cast<long>(fmax.collections.size()))
                continue;

            std::vector<CollectionPtr> keep_min, out_min, keep_max, out_max;
            for (auto& c : fmin.collections)
                (tied(c) ? out_min : keep_min).push_back(c);
            for (auto& c : fmax.collections)
                (tied(c) ? out_max : keep_max).push_back(c);
            std::swap(fmin.collections, keep_min);
            std::swap(fmax.collections, keep_max);
            const double after = eval_family(st.fam_min[0], st.s0).value;
            if (std::abs(after - base) <= config.prune_epsilon) {
                base = after;
                std::size_t freed = 0;
                for (const auto& c : out_min) freed += approx_bytes(*c);
                for (const auto& c : out_max) freed += approx_bytes(*c);
                for (std::size_t i = 0; i < fmin.witnesses.size(); ++i) {
                    if (fmin.witnesses[i].id != id) continue;
                    freed += 2 * approx_bytes(fmin.witnesses[i].point);
                    fmin.witnesses.erase(fmin.witnesses.begin() + i);
                    fmax.witnesses.erase(fmax.witnesses.begin() + i);
                    break;
                }
                st.ctx.release(freed);
            } else {
                std::swap(fmin.collections, keep_min); // restore
                std::swap(fmax.collections, keep_max);
            }
        }
    }
}

namespace {

PolicyBook current_book(const PbviState& st) {
    PolicyBook book;
    book.horizon = st.horizon;
    const FamilyEval fe_min = eval_family(st.fam_min[0], st.s0);
    const FamilyEval fe_max = eval_family(st.fam_max[0], st.s0);
    if (fe_min.index >= 0) {
        CollectionPtr c = st.fam_min[0].collections[fe_min.index];
        while (c && c->stage < st.horizon) {
            book.chain_min_side.push_back(c);
            c = c->built_against;
        }
    }
    if (fe_max.index >= 0) {
        CollectionPtr c = st.fam_max[0].collections[fe_max.index];
        while (c && c->stage < st.horizon) {
            book.chain_max_side.push_back(c);
            c = c->built_against;
        }
    }
    return book;
}

void write_checkpoint_file(const PbviState& st, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
    out << serialize_checkpoint(st);
}

} // namespace

SolveResult solve(const ZsPosg& game, int horizon,
                  const SolverConfig& config) {
    ValidationReport rep = validate(game);
    if (!rep.ok())
        throw std::invalid_argument("invalid game: " + rep.problems.front());
    if (horizon < 0) throw std::invalid_argument("negative horizon");

    const auto t_start = std::chrono::steady_clock::now();
    auto elapsed = [&] {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                             t_start)
            .count();
    };

    SolveResult out;
    PbviState st(game, horizon, config);

    if (!config.resume_path.empty()) {
        std::ifstream in(config.resume_path, std::ios::binary);
        if (in) {
            std::ostringstream buf;
            buf << in.rdbuf();
            load_checkpoint(st, buf.str());
        }
    }
    if (st.trace.empty())
        st.trace.push_back(SolveResult::TraceRow{0, 0.0, elapsed()});

    if (horizon == 0) {
        out.value = 0.0;
        out.status = RunStatus::converged;
        out.per_iteration_trace = st.trace;
        out.policy.horizon = 0;
        out.peak_memory = st.ctx.memory_peak;
        out.hist = st.ctx.hist;
        return out;
    }

    RunStatus status = RunStatus::iteration_cap;
    std::optional<double> prev;
    for (const auto& row : st.trace)
        if (row.iteration >= 1) prev = row.value;

    try {
        for (long t = st.iteration + 1; t <= config.max_iterations; ++t) {
            st.ctx.check_time();
            std::vector<OccupancyState> pts = explore(st, config);
            double v = backward_sweep(st, config, pts);
            if (config.variant == SolverConfig::Variant::pbvi3) {
                prune_points(st, config);
                v = eval_family(st.fam_min[0], st.s0).value;
            }
            st.iteration = t;
            st.trace.push_back(SolveResult::TraceRow{t, v, elapsed()});
            if (config.checkpoint_every > 0 && !config.checkpoint_path.empty() &&
                t % config.checkpoint_every == 0)
                write_checkpoint_file(st, config.checkpoint_path);
            if (prev && t >= config.min_iterations &&
                std::abs(v - *prev) <= config.epsilon) {
                status = RunStatus::converged;
                break;
            }
            prev = v;
        }
    } catch (const BudgetExceeded& e) {
        status = e.kind == BudgetExceeded::Kind::time ? RunStatus::oot
                                                      : RunStatus::oom;
    }

    out.status = status;
    out.iterations = st.iteration;
    out.per_iteration_trace = st.trace;
    out.value = eval_family(st.fam_min[0], st.s0).value;
    out.policy = current_book(st);
    out.peak_memory = st.ctx.memory_peak;
    out.hist = st.ctx.hist;
    return out;
}

std::pair<std::vector<DecisionRule>, std::vector<DecisionRule>>
extract_policy(const PolicyBook& book) {
    if (!book.complete())
        throw std::runtime_error("incomplete policy book");
    std::vector<DecisionRule> pmax, pmin;
    pmax.reserve(book.horizon);
    pmin.reserve(book.horizon);
    for (const auto& c : book.chain_min_side) pmax.push_back(c->supporting_rule);
    for (const auto& c : book.chain_max_side) pmin.push_back(c->supporting_rule);
    return {std::move(pmax), std::move(pmin)};
}

std::string serialize_checkpoint(const PbviState& st) {
    std::ostringstream out;
    out << "posg-checkpoint v1\n";
    out << "horizon " << st.horizon << " iteration " << st.iteration
        << " next-witness " << st.next_witness_id << "\n";
    out << "trace " << st.trace.size() << "\n";
    char buf[96];
    for (const auto& row : st.trace) {
        std::snprintf(buf, sizeof buf, "tr %ld %.17g %.17g\n", row.iteration,
                      row.value, row.elapsed);
        out << buf;
    }
    const PolicyBook book = current_book(st);
    auto chain_line = [&](const char* tag, const std::vector<CollectionPtr>& ch,
                          const std::vector<Family>& fams) {
        out << tag << " " << ch.size();
        for (std::size_t t = 0; t < ch.size(); ++t) {
            const auto& cs = fams[t].collections;
            std::size_t idx = 0;
            for (; idx < cs.size(); ++idx)
                if (cs[idx] == ch[t]) break;
            out << " " << (idx < cs.size() ? static_cast<long>(idx) : -1L);
        }
        out << "\n";
    };
    chain_line("book-min", book.chain_min_side, st.fam_min);
    chain_line("book-max", book.chain_max_side, st.fam_max);
    out << "rng " << st.rng << "\n";
    const std::string fams = serialize_families(st.ctx, st.fam_min, st.fam_max);
    out << "families " << fams.size() << "\n" << fams;
    return out.str();
}

void load_checkpoint(PbviState& st, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != "posg-checkpoint v1")
        throw std::runtime_error("unrecognized checkpoint header");

    std::string word;
    long horizon = -1;
    if (!std::getline(in, line))
        throw std::runtime_error("truncated checkpoint");
    {
        std::istringstream ls(line);
        std::string k1, k2, k3;
        long it = 0, nw = 1;
        ls >> k1 >> horizon >> k2 >> it >> k3 >> nw;
        if (k1 != "horizon" || k2 != "iteration" || k3 != "next-witness")
            throw std::runtime_error("malformed checkpoint header line");
        if (horizon != st.horizon)
            throw std::runtime_error("checkpoint horizon mismatch");
        st.iteration = it;
        st.next_witness_id = static_cast<int>(nw);
    }

    if (!std::getline(in, line))
        throw std::runtime_error("truncated checkpoint");
    std::istringstream ls(line);
    std::size_t n_trace = 0;
    ls >> word >> n_trace;
    if (word != "trace") throw std::runtime_error("expected trace count");
    st.trace.clear();
    for (std::size_t i = 0; i < n_trace; ++i) {
        if (!std::getline(in, line))
            throw std::runtime_error("truncated trace");
        std::istringstream rs(line);
        SolveResult::TraceRow row{};
        rs >> word >> row.iteration >> row.value >> row.elapsed;
        if (word != "tr") throw std::runtime_error("malformed trace row");
        st.trace.push_back(row);
    }

    // Book chains are re-derivable from the families; the stored indexes
    // are validated for integrity and then dropped.
    std::vector<std::vector<long>> chains(2);
    for (int side = 0; side < 2; ++side) {
        if (!std::getline(in, line))
            throw std::runtime_error("truncated checkpoint");
        std::istringstream bs(line);
        std::size_t n = 0;
        bs >> word >> n;
        if (word != (side == 0 ? "book-min" : "book-max"))
            throw std::runtime_error("expected book chain");
        chains[side].resize(n);
        for (auto& v : chains[side]) bs >> v;
    }

    if (!std::getline(in, line))
        throw std::runtime_error("truncated checkpoint");
    {
        std::istringstream rs(line);
        rs >> word;
        if (word != "rng") throw std::runtime_error("expected rng state");
        rs >> st.rng;
        if (!rs) throw std::runtime_error("malformed rng state");
    }

    if (!std::getline(in, line))
        throw std::runtime_error("truncated checkpoint");
    std::size_t n_bytes = 0;
    {
        std::istringstream fs(line);
        fs >> word >> n_bytes;
        if (word != "families")
            throw std::runtime_error("expected families blob");
    }
    std::string blob(n_bytes, '\0');
    in.read(blob.data(), static_cast<std::streamsize>(n_bytes));
    if (static_cast<std::size_t>(in.gcount()) != n_bytes)
        throw std::runtime_error("truncated families blob");

    parse_families(st.ctx, blob, st.fam_min, st.fam_max);
    std::size_t live = 0;
    for (const auto& f : st.fam_min) {
        live += family_bytes(f);
        for (const auto& w : f.witnesses) live += 2 * approx_bytes(w.point);
    }
    for (const auto& f : st.fam_max) live += family_bytes(f);
    st.ctx.memory_used = 0;
    st.ctx.charge(live);

    for (int side = 0; side < 2; ++side) {
        const auto& fams = side == 0 ? st.fam_min : st.fam_max;
        for (std::size_t t = 0; t < chains[side].size(); ++t) {
            const long idx = chains[side][t];
            if (idx < 0 ||
                idx >= static_cast<long>(fams[t].collections.size()))
                throw std::runtime_error("checkpoint book index out of range");
        }
    }
}

} // namespace posg
