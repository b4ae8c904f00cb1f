#pragma once

#include <random>

#include "posg/operators.hpp"

namespace posg {

struct SolverConfig {
    enum class Variant { pbvi1, pbvi2, pbvi3 };
    Variant variant = Variant::pbvi1;
    double epsilon = 1e-3;        // convergence threshold on |Δ value|
    long max_iterations = 10000;
    double time_budget = 7200.0;  // seconds (the benchmark-table limit)
    std::size_t memory_budget = 2ull << 30; // bytes
    double prune_epsilon = 1e-4;  // pbvi2/pbvi3 bounded-pruning slack
    double exploration_rate = 0.1;
    std::uint64_t rng_seed = 0;
    // Convergence is only declared after this many iterations, so a flat
    // start can't end a run before the box has been explored at all.
    long min_iterations = 10;
    long checkpoint_every = 0;    // iterations; 0 disables
    std::string checkpoint_path;  // used when checkpoint_every > 0
    std::string resume_path;      // load and continue when nonempty
};

// Both best stage-0..ℓ-1 collection chains, linked by built_against.
// The min-conditioned chain certifies the maximizer's rules, the
// max-conditioned chain the minimizer's.
struct PolicyBook {
    int horizon = 0;
    std::vector<CollectionPtr> chain_min_side;
    std::vector<CollectionPtr> chain_max_side;
    bool complete() const {
        return static_cast<int>(chain_min_side.size()) == horizon &&
               static_cast<int>(chain_max_side.size()) == horizon;
    }
};

struct SolveResult {
    struct TraceRow {
        long iteration;
        double value;
        double elapsed; // seconds
    };
    double value = 0.0;
    std::vector<TraceRow> per_iteration_trace;
    RunStatus status = RunStatus::iteration_cap;
    PolicyBook policy;
    long iterations = 0;
    std::size_t peak_memory = 0;
    // Snapshot of the solver's history pools.  The decision rules inside
    // `policy` key their entries by interned history id, so evaluating the
    // extracted policy requires the pools that minted those ids.
    HistoryStore hist;
};

// Mutable solver state shared by the stage operations; exposed so the
// operations can be driven (and tested) individually.
struct PbviState {
    PlanningContext ctx;
    int horizon = 0;
    std::vector<Family> fam_min; // stages 0..ℓ; [ℓ] is the zero boundary
    std::vector<Family> fam_max;
    OccupancyState s0;
    std::mt19937_64 rng;
    int next_witness_id = 1; // 0 is the pinned s0 witness
    long iteration = 0;
    std::vector<SolveResult::TraceRow> trace;

    PbviState(const ZsPosg& game, int horizon, const SolverConfig& config);
};

// Forward trajectory sampling: one occupancy per stage 0..ℓ-1.  Each
// stage plays the greedy joint rule with probability 1-exploration_rate
// and a uniformly random deterministic joint rule otherwise; stages
// whose next families are still empty fall back to the uniform rule.
std::vector<OccupancyState> explore(PbviState& st,
                                    const SolverConfig& config);

// Backup at every sampled point from the deepest stage upward, inserting
// the new collections and (for pbvi2/pbvi3) pruning.  Returns the
// post-sweep maximizer family value at s0.
double backward_sweep(PbviState& st, const SolverConfig& config,
                      const std::vector<OccupancyState>& points);

// pbvi3 point pruning: drops unpinned witnesses (and collections
// generated solely at them) when the s0 value moves at most
// prune_epsilon; the s0 witness is never dropped.
void prune_points(PbviState& st, const SolverConfig& config);

SolveResult solve(const ZsPosg& game, int horizon,
                  const SolverConfig& config);

// Stitches the stored chains into per-stage rule sequences
// (maximizer, minimizer).  Throws on an incomplete book.
std::pair<std::vector<DecisionRule>, std::vector<DecisionRule>>
extract_policy(const PolicyBook& book);

// Checkpoint plumbing: families, policy book, rng state and trace.
std::string serialize_checkpoint(const PbviState& st);
void load_checkpoint(PbviState& st, const std::string& text);

} // namespace posg
