#pragma once

#include "posg/value_rep.hpp"

namespace posg {

// Greedy-action selection: the decomposed LP over one next-stage
// collection.  For the maximizer: variables x(u|o_own) >= 0 summing to 1
// per reachable own history, a free w per reachable opponent history and
// a free g per (opponent history, opponent control, opponent
// observation); maximize the sum of w subject to
//
//   w_o <= sum_{x,o_own,u_own} s * x(u_own|o_own) * r
//          + discount * sum_{z_opp} g_{o,u_opp,z_opp}        (per u_opp)
//   g_{o,u_opp,z_opp} <= unnormalized continuation of alpha  (per alpha)
//
// with everything kept unnormalized so the program stays linear.  The
// minimizer's call is fully mirrored (min objective, >= rows).  Before
// solving, own-history column blocks and opponent-history row groups
// with exactly proportional coefficients are merged and the solution
// lifted back; this is value-preserving because a best response
// decomposes across opponent histories and the LP is positively
// homogeneous in each history's mass.
struct GreedyResult {
    DecisionRule rule;
    // The opponent's optimal mix in the same local game, recovered from
    // the duals of the w rows (one simplex of duals per opponent history
    // class).  At degenerate points this can differ from the rule the
    // opponent's own pass would pick.
    DecisionRule opp_rule;
    // The opponent's next-stage rule supporting the optimum, recovered
    // from the duals of the g rows: per (opponent history, control,
    // observation) branch, the dual mass distributes over the vectors
    // of V_next, and projecting it through their control tags gives the
    // mix the opponent must play at the child history.  This is the only
    // place an interior next-stage mix is pinned down - when the point
    // sits on an indifference facet, the next stage's own LP has a whole
    // face of optima and its vertex solutions miss the saddle mix, but
    // the mix still appears here because it is what prices this stage's
    // rows.  Branches with no dual mass are left unset.
    DecisionRule opp_next_rule;
    bool has_opp_next = false;
    double value = 0.0;
};

GreedyResult greedy_lp(PlanningContext& ctx, Player role,
                       const OccupancyState& s, const Collection& V_next);

// Point-based Bellman update: one new collection at stage s.stage.  Each
// vector is one opponent plan (control u_opp, continuation sigma): per
// opponent control it emits the arg-best sigma tuple of every opponent
// history of s (sigma picks, per opponent observation, the V_next vector
// best for the opponent - minimizing for role = maximizer - under the
// unnormalized successor evaluation at s) plus one constant sigma per
// V_next vector, deduplicated.  The arg-best tuples attain the LP
// optimum at the witness; the constants keep every V_next continuation
// available on every branch so LPs at other points can recombine them.
// Vector defaults extend the plan with uniform own play.
Collection backup_collection(PlanningContext& ctx, Player role,
                             const OccupancyState& s,
                             const DecisionRule& own_rule,
                             const CollectionPtr& V_next);

// The zero boundary collection at stage `horizon`.
CollectionPtr boundary_collection(const ZsPosg& game, int horizon,
                                  Player conditioner);

struct BackupResult {
    DecisionRule greedy_rule_max;
    DecisionRule greedy_rule_min;
    double value = 0.0; // the maximizer-side LP optimum
    Collection new_collection_min_side;
    Collection new_collection_max_side;
    // Dual-rule collections.  Each winning LP also certifies how the
    // opponent holds the optimum: the w duals give its mix at this
    // stage, the g duals give its next-stage branch mixes.  When those
    // rules differ from what the primal passes embed, each is backed up
    // into its own collection - the w mix at s itself (stage s.stage,
    // other side's family), the g mix at the successor of s under the
    // dual joint play (stage s.stage + 1, chained to the winning
    // collection's own continuation snapshot).  Without the g-dual
    // collections a saddle rule that is interior on an indifference
    // facet is never emitted, because every point LP at the next stage
    // then has a pure-vertex optimum; value convergence at such games
    // stalls strictly below the game value.  `witness` is the occupancy
    // the collection was generated at, for witness registration.
    struct Extra {
        Collection collection;
        OccupancyState witness;
    };
    std::vector<Extra> extra_min_side;
    std::vector<Extra> extra_max_side;
};

// Per-collection iteration over both next-stage families: best LP value
// and rule on each side (ties to the lowest insertion index), then both
// backups.  Families must be nonempty (the boundary guarantees this).
BackupResult point_backup(PlanningContext& ctx, const OccupancyState& s,
                          const Family& F_next_min_side,
                          const Family& F_next_max_side);

} // namespace posg
