#pragma once

#include <memory>
#include <optional>
#include <unordered_map>

#include "posg/occupancy.hpp"

namespace posg {

// How one alpha vector continues after the current stage: the opponent
// control it answers, and for each opponent observation the index of the
// chosen vector inside the next-stage collection it was built against.
struct PlanTag {
    int opp_control = -1;
    std::vector<int> continuation; // indexed by opponent observation
};

// Linear function over conditional occupancy states.  `conditioner` is
// the player whose histories condition the occupancy; the vector maps
// (state, other player's history) pairs to reals.  Pairs never seen at
// generation time fall back to default_by_state (the plan's value under a
// uniform extension of the own rule), so off-support evaluation is total.
struct AlphaVector {
    Player conditioner = Player::minimizer;
    int stage = 0;
    PlanTag plan_tag;
    std::vector<double> default_by_state;
    std::unordered_map<std::uint64_t, double> values;

    static std::uint64_t key(int x, int h) {
        return (static_cast<std::uint64_t>(h) << 12) |
               static_cast<std::uint64_t>(x);
    }
    double at(int x, int h) const {
        auto it = values.find(key(x, h));
        return it == values.end() ? default_by_state[x] : it->second;
    }
    bool has(int x, int h) const { return values.count(key(x, h)) != 0; }
    void set(int x, int h, double v) { values[key(x, h)] = v; }
};

// One piecewise-linear value piece: the vectors answering each opponent
// control against a fixed own-player stage rule.  Immutable once shared;
// pruning replaces the collection rather than editing it, so plan tags in
// earlier stages keep indexing the snapshot they were built against.
struct Collection {
    Player conditioner = Player::minimizer;
    int stage = 0;
    std::vector<AlphaVector> vectors; // insertion-ordered
    DecisionRule supporting_rule;     // the fixed own rule (other player)
    std::shared_ptr<const Collection> built_against; // next-stage snapshot
    int witness_id = -1; // generation point, for point pruning
};

using CollectionPtr = std::shared_ptr<const Collection>;

// Family of collections with the witness points they were generated at.
// A min-conditioned family is the maximizer's lower bound (max over
// collections of marginal-weighted vector minima); the max-conditioned
// family mirrors it with roles swapped.
struct Family {
    Player conditioner = Player::minimizer;
    int stage = 0;
    std::vector<CollectionPtr> collections;

    struct Witness {
        int id = 0;
        OccupancyState point;
        bool pinned = false; // the s0 witness is never evicted
    };
    std::vector<Witness> witnesses;
};

inline constexpr int kWitnessCap = 64;

// Sum of c(x,h) * v(x,h) over the conditional's support; pairs resolved
// through the vector's default are counted in *misses when provided.
double eval_alpha(const AlphaVector& v, const Conditional& c,
                  int* misses = nullptr);

// Marginal-weighted inner aggregation: min over vectors for a
// min-conditioned collection, max for the mirror.
double eval_collection(const Collection& V, const OccupancyState& s);

struct FamilyEval {
    double value = 0.0;
    int index = -1; // argmax (argmin for the mirror); -1 if family empty
};

// Outer aggregation over collections: max for min-conditioned families,
// min for the mirror.  Ties resolve to the lowest insertion index; an
// empty family evaluates to 0 (the zero-knowledge boundary convention).
FamilyEval eval_family(const Family& F, const OccupancyState& s);

// Theorem-4 view: the collection's inner min resolved at s into a fixed
// per-history vector choice, yielding a functional linear in occupancies.
struct LinearBasisFunctional {
    int stage = 0;
    Player conditioner = Player::minimizer;
    CollectionPtr source;
    std::map<int, int> assignment; // conditioning history -> vector index
};

LinearBasisFunctional to_linear_basis(const CollectionPtr& V,
                                      const OccupancyState& s);

// Exact at the defining point; elsewhere bounds eval_collection from the
// fixed-selection side (>= for min-conditioned collections).
double eval_linear_basis(const LinearBasisFunctional& f,
                         const OccupancyState& s);

// Bounded pruning of vectors: returns a subset V' with, at every witness
// conditional, min over V' within eps above min over V.  Never empties
// the collection; earlier vectors win ties.
Collection prune_alpha(const Collection& V,
                       const std::vector<Conditional>& witnesses, double eps);

// Bounded pruning of collections: at every stored witness point the
// family value drops at most eps.  Never empties the family.
void prune_collections(Family& F, double eps);

// Rough live-size accounting used against the memory budget.
std::size_t approx_bytes(const Collection& V);
std::size_t approx_bytes(const OccupancyState& s);

// Line-oriented, versioned serialization of paired families (indexed by
// stage; entry [ℓ] is the boundary).  Histories are stored as rendered
// paths and re-interned on load, so a fresh context round-trips.
std::string serialize_families(const PlanningContext& ctx,
                               const std::vector<Family>& min_side,
                               const std::vector<Family>& max_side);
void parse_families(PlanningContext& ctx, const std::string& text,
                    std::vector<Family>& min_side,
                    std::vector<Family>& max_side);

} // namespace posg
