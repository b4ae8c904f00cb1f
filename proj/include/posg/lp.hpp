#pragma once

#include <chrono>
#include <cstddef>
#include <iosfwd>
#include <limits>
#include <vector>

#include "posg/types.hpp"

namespace posg {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense linear program.  Variables default to lower bound 0 and upper
// bound +inf; a lower bound of -inf makes a variable free.
struct LinearProgram {
    enum class Rel : char { le = 'L', eq = 'E', ge = 'G' };
    struct Row {
        std::vector<double> coeffs; // dense over variables
        Rel rel = Rel::le;
        double rhs = 0.0;
    };

    bool maximize = true;
    std::vector<double> objective;
    std::vector<Row> rows;
    std::vector<double> lower, upper; // resized to objective on solve

    int add_var(double obj, double lo = 0.0, double hi = kInf) {
        objective.push_back(obj);
        lower.push_back(lo);
        upper.push_back(hi);
        return static_cast<int>(objective.size()) - 1;
    }
};

enum class LpStatus { optimal, infeasible, unbounded, numerical };

// Duals are Lagrange multipliers in sensitivity form: for the stated
// objective sense, d(objective)/d(rhs_i) = duals[i].  Only user rows get
// dual entries (bound rows synthesized internally are not exposed).
struct LpSolution {
    LpStatus status = LpStatus::numerical;
    double objective = 0.0;
    std::vector<double> primal;
    std::vector<double> duals;
};

// Optional resource ceilings threaded through long solves.
struct LpLimits {
    std::chrono::steady_clock::time_point deadline =
        std::chrono::steady_clock::time_point::max();
    std::size_t max_tableau_bytes = std::numeric_limits<std::size_t>::max();
};

// Two-phase primal simplex.  Dantzig pricing with an automatic switch to
// Bland's rule on stalling; a failed optimality/feasibility post-check
// triggers one clean re-solve under Bland before reporting
// LpStatus::numerical.  Throws BudgetExceeded against `limits`.
LpSolution solve_lp(const LinearProgram& lp, const LpLimits* limits = nullptr);

// Feasibility (tol_feas), bound and strong-duality (tol_dual) check used
// by the solver's post-verification and by invariant tests.
bool check_solution(const LinearProgram& lp, const LpSolution& sol,
                    double tol_feas = 1e-7, double tol_dual = 1e-6);

// Plain-text round-trip for LP instances, used for regression fixtures.
// Setting POSG_LP_DUMP_DIR makes solve_lp write any instance it cannot
// solve to that directory as lpdump-<n>.txt before reporting failure.
void write_lp(std::ostream& os, const LinearProgram& lp);
LinearProgram read_lp(std::istream& is);

struct MatrixGameSolution {
    double value = 0.0;
    std::vector<double> row_mix;
    std::vector<double> col_mix;
};

// Value and optimal mixed strategies of a zero-sum matrix game, payoff to
// the row player.  Column strategy comes from the duals, re-solving the
// transposed program if the dual certificate fails its safety margin.
MatrixGameSolution solve_matrix_game(
    const std::vector<std::vector<double>>& payoff);

} // namespace posg
