#include "posg/lp.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace posg {

namespace {

constexpr double kPivotEps = 1e-9;
constexpr double kFeasEps = 1e-7;

// Standard-form working copy: minimize over x >= 0 with b >= 0.
struct Standardized {
    // Per original variable: column index, plus how to undo the transform.
    struct VarMap {
        int col;        // first column
        int neg_col;    // second column of a free split, else -1
        double shift;   // x_orig = x_col * scale + shift
        double scale;   // +1 or -1
    };
    std::vector<VarMap> vmap;
    std::vector<std::vector<double>> rows; // user rows then bound rows
    std::vector<LinearProgram::Rel> rels;
    std::vector<double> rhs;
    std::vector<int> flip; // +1/-1 applied to reach b >= 0
    std::vector<double> cost;
    double cost_const = 0.0;
    int n_cols = 0;
    int n_user_rows = 0;
};

Standardized standardize(const LinearProgram& lp) {
    Standardized s;
    std::size_t nv = lp.objective.size();
    std::vector<double> lo(lp.lower), hi(lp.upper);
    lo.resize(nv, 0.0);
    hi.resize(nv, kInf);

    double sense = lp.maximize ? -1.0 : 1.0;
    s.vmap.resize(nv);
    struct BoundRow {
        int col;
        double rhs;
    };
    std::vector<BoundRow> bound_rows;
    for (std::size_t j = 0; j < nv; ++j) {
        auto& vm = s.vmap[j];
        vm.neg_col = -1;
        if (lo[j] == -kInf && hi[j] == kInf) {
            vm.col = s.n_cols++;
            vm.neg_col = s.n_cols++;
            vm.shift = 0.0;
            vm.scale = 1.0;
        } else if (lo[j] == -kInf) { // only an upper bound: x = hi - x'
            vm.col = s.n_cols++;
            vm.shift = hi[j];
            vm.scale = -1.0;
        } else { // finite lower bound: x = x' + lo
            vm.col = s.n_cols++;
            vm.shift = lo[j];
            vm.scale = 1.0;
            if (hi[j] != kInf)
                bound_rows.push_back({vm.col, hi[j] - lo[j]});
        }
    }

    s.cost.assign(s.n_cols, 0.0);
    for (std::size_t j = 0; j < nv; ++j) {
        double c = sense * lp.objective[j];
        s.cost[s.vmap[j].col] += c * s.vmap[j].scale;
        if (s.vmap[j].neg_col >= 0) s.cost[s.vmap[j].neg_col] -= c;
        s.cost_const += c * s.vmap[j].shift;
    }

    s.n_user_rows = static_cast<int>(lp.rows.size());
    for (const auto& row : lp.rows) {
        std::vector<double> coeffs(s.n_cols, 0.0);
        double rhs = row.rhs;
        for (std::size_t j = 0; j < nv && j < row.coeffs.size(); ++j) {
            double a = row.coeffs[j];
            if (a == 0.0) continue;
            coeffs[s.vmap[j].col] += a * s.vmap[j].scale;
            if (s.vmap[j].neg_col >= 0) coeffs[s.vmap[j].neg_col] -= a;
            rhs -= a * s.vmap[j].shift;
        }
        LinearProgram::Rel rel = row.rel;
        int flip = 1;
        if (rhs < 0.0) {
            flip = -1;
            rhs = -rhs;
            for (double& c : coeffs) c = -c;
            if (rel == LinearProgram::Rel::le)
                rel = LinearProgram::Rel::ge;
            else if (rel == LinearProgram::Rel::ge)
                rel = LinearProgram::Rel::le;
        }
        s.rows.push_back(std::move(coeffs));
        s.rels.push_back(rel);
        s.rhs.push_back(rhs);
        s.flip.push_back(flip);
    }
    for (const auto& br : bound_rows) {
        std::vector<double> coeffs(s.n_cols, 0.0);
        coeffs[br.col] = 1.0;
        s.rows.push_back(std::move(coeffs));
        s.rels.push_back(LinearProgram::Rel::le);
        s.rhs.push_back(br.rhs);
        s.flip.push_back(1);
    }
    return s;
}

struct Tableau {
    int m = 0, width = 0;   // rows, columns incl. rhs
    int n_struct = 0;       // structural columns
    int first_logical = 0;  // first slack/surplus column
    int first_artificial = 0;
    std::vector<double> a;  // row-major, m x width
    std::vector<double> obj; // reduced costs, width entries (last = -value)
    std::vector<int> basis;
    std::vector<int> slack_col, art_col; // per row, -1 if absent

    double* row(int i) { return a.data() + static_cast<std::size_t>(i) * width; }
    const double* row(int i) const {
        return a.data() + static_cast<std::size_t>(i) * width;
    }
};

enum class PivotOut { optimal, unbounded, stalled };

class Simplex {
public:
    Simplex(const Standardized& s, const LpLimits* limits)
        : s_(s), limits_(limits) {}

    LpStatus run(bool force_bland) {
        build();
        bland_ = force_bland;
        // Phase 1: minimize the sum of artificials.
        std::vector<double> c1(t_.first_artificial, 0.0);
        c1.resize(t_.width - 1, 1.0);
        set_costs(c1, /*bar_artificials=*/false);
        PivotOut out = iterate();
        if (out != PivotOut::optimal || !basics_feasible())
            return LpStatus::numerical;
        if (current_value() > kFeasEps) return LpStatus::infeasible;
        evict_artificials();
        // Phase 2: the real costs; artificials stay barred at zero.
        std::vector<double> c2(t_.width - 1, 0.0);
        for (int j = 0; j < t_.n_struct; ++j) c2[j] = s_.cost[j];
        set_costs(c2, /*bar_artificials=*/true);
        out = iterate();
        if (out == PivotOut::unbounded) return LpStatus::unbounded;
        if (out != PivotOut::optimal || !basics_feasible())
            return LpStatus::numerical;
        return LpStatus::optimal;
    }

    std::vector<double> primal_struct() const {
        std::vector<double> x(t_.n_struct, 0.0);
        for (int i = 0; i < t_.m; ++i)
            if (t_.basis[i] < t_.n_struct)
                x[t_.basis[i]] = t_.row(i)[t_.width - 1];
        return x;
    }

    // Multipliers of the standardized rows, y_i = d(min value)/d(rhs_i).
    std::vector<double> duals() const {
        std::vector<double> y(t_.m, 0.0);
        for (int i = 0; i < t_.m; ++i) {
            if (t_.slack_col[i] >= 0) {
                double rc = t_.obj[t_.slack_col[i]];
                y[i] = s_.rels[i] == LinearProgram::Rel::ge ? rc : -rc;
            } else if (t_.art_col[i] >= 0) {
                y[i] = -t_.obj[t_.art_col[i]];
            }
        }
        return y;
    }

private:
    const Standardized& s_;
    const LpLimits* limits_;
    Tableau t_;
    bool bland_ = false;
    int degenerate_streak_ = 0;

    double current_value() const { return -t_.obj[t_.width - 1]; }

    bool basics_feasible() const {
        for (int i = 0; i < t_.m; ++i)
            if (t_.row(i)[t_.width - 1] < -kFeasEps) return false;
        return true;
    }

    void build() {
        int m = static_cast<int>(s_.rows.size());
        int n = s_.n_cols;
        int n_slack = 0, n_art = 0;
        for (auto rel : s_.rels) {
            if (rel != LinearProgram::Rel::eq) ++n_slack;
            if (rel != LinearProgram::Rel::le) ++n_art;
        }
        t_.m = m;
        t_.n_struct = n;
        t_.first_logical = n;
        t_.first_artificial = n + n_slack;
        t_.width = n + n_slack + n_art + 1;
        std::size_t bytes = (static_cast<std::size_t>(m) + 1) * t_.width * 8;
        if (limits_ && bytes > limits_->max_tableau_bytes)
            throw BudgetExceeded(BudgetExceeded::Kind::memory);
        t_.a.assign(static_cast<std::size_t>(m) * t_.width, 0.0);
        t_.basis.assign(m, -1);
        t_.slack_col.assign(m, -1);
        t_.art_col.assign(m, -1);
        int next_slack = t_.first_logical, next_art = t_.first_artificial;
        for (int i = 0; i < m; ++i) {
            double* row = t_.row(i);
            std::copy(s_.rows[i].begin(), s_.rows[i].end(), row);
            row[t_.width - 1] = s_.rhs[i];
            switch (s_.rels[i]) {
            case LinearProgram::Rel::le:
                t_.slack_col[i] = next_slack;
                row[next_slack++] = 1.0;
                t_.basis[i] = t_.slack_col[i];
                break;
            case LinearProgram::Rel::ge:
                t_.slack_col[i] = next_slack;
                row[next_slack++] = -1.0;
                t_.art_col[i] = next_art;
                row[next_art++] = 1.0;
                t_.basis[i] = t_.art_col[i];
                break;
            case LinearProgram::Rel::eq:
                t_.art_col[i] = next_art;
                row[next_art++] = 1.0;
                t_.basis[i] = t_.art_col[i];
                break;
            }
        }
    }

    void set_costs(const std::vector<double>& c, bool bar_artificials) {
        bar_artificials_ = bar_artificials;
        t_.obj.assign(t_.width, 0.0);
        for (int j = 0; j < t_.width - 1; ++j) t_.obj[j] = c[j];
        for (int i = 0; i < t_.m; ++i) {
            double cb = c[t_.basis[i]];
            if (cb == 0.0) continue;
            const double* row = t_.row(i);
            for (int j = 0; j < t_.width; ++j) t_.obj[j] -= cb * row[j];
        }
    }

    PivotOut iterate() {
        long max_pivots = 2000L * (t_.m + t_.width) + 10000;
        int since_check = 0;
        for (long it = 0; it < max_pivots; ++it) {
            if (limits_ && ++since_check >= 64) {
                since_check = 0;
                if (std::chrono::steady_clock::now() > limits_->deadline)
                    throw BudgetExceeded(BudgetExceeded::Kind::time);
            }
            int enter = choose_entering();
            if (enter < 0) return PivotOut::optimal;
            int leave = choose_leaving(enter);
            if (leave < 0) return PivotOut::unbounded;
            pivot(leave, enter);
        }
        return PivotOut::stalled;
    }

    int choose_entering() const {
        int best = -1;
        double best_rc = -kPivotEps;
        int limit = bar_artificials_ ? t_.first_artificial : t_.width - 1;
        for (int j = 0; j < limit; ++j) {
            double rc = t_.obj[j];
            if (rc < best_rc) {
                if (bland_) return j;
                best_rc = rc;
                best = j;
            }
        }
        return best;
    }

    int choose_leaving(int enter) const {
        const int last = t_.width - 1;
        // Entries that are roundoff noise relative to the column's
        // magnitude must never pivot: dividing a row by noise floods the
        // tableau with garbage.  The rhs is clamped at zero so a slightly
        // drifted basic value cannot produce a negative ratio.
        double amax = 0.0;
        for (int i = 0; i < t_.m; ++i)
            amax = std::max(amax, std::abs(t_.row(i)[enter]));
        double tol = std::max(kPivotEps, 1e-8 * amax);
        double theta = -1.0;
        for (int i = 0; i < t_.m; ++i) {
            double a = t_.row(i)[enter];
            if (a <= tol) continue;
            double r = std::max(t_.row(i)[last], 0.0) / a;
            if (theta < 0.0 || r < theta) theta = r;
        }
        if (theta < 0.0) return -1;
        // Second pass over near-minimal ratios: take the largest pivot
        // element for stability, or the smallest basis index under Bland.
        double band = theta + 1e-9 + 1e-7 * theta;
        int best = -1;
        double best_a = 0.0;
        for (int i = 0; i < t_.m; ++i) {
            double a = t_.row(i)[enter];
            if (a <= tol) continue;
            double r = std::max(t_.row(i)[last], 0.0) / a;
            if (r > band) continue;
            if (bland_) {
                if (best < 0 || t_.basis[i] < t_.basis[best]) best = i;
            } else if (a > best_a) {
                best = i;
                best_a = a;
            }
        }
        return best;
    }

    void pivot(int leave, int enter) {
        double* prow = t_.row(leave);
        double inv = 1.0 / prow[enter];
        if (prow[t_.width - 1] * inv < 1e-12) {
            if (++degenerate_streak_ > 50 + 4 * (t_.m + t_.width))
                bland_ = true;
        } else {
            degenerate_streak_ = 0;
        }
        for (int j = 0; j < t_.width; ++j) prow[j] *= inv;
        prow[enter] = 1.0;
        for (int i = 0; i < t_.m; ++i) {
            if (i == leave) continue;
            double f = t_.row(i)[enter];
            if (f == 0.0) continue;
            double* row = t_.row(i);
            for (int j = 0; j < t_.width; ++j) row[j] -= f * prow[j];
            row[enter] = 0.0;
        }
        double f = t_.obj[enter];
        if (f != 0.0) {
            for (int j = 0; j < t_.width; ++j) t_.obj[j] -= f * prow[j];
            t_.obj[enter] = 0.0;
        }
        t_.basis[leave] = enter;
    }

    // After phase 1, swap any artificial still in the basis for a real
    // column; rows that admit none are redundant and stay pinned at zero.
    void evict_artificials() {
        for (int i = 0; i < t_.m; ++i) {
            if (t_.basis[i] < t_.first_artificial) continue;
            const double* row = t_.row(i);
            int enter = -1;
            for (int j = 0; j < t_.first_artificial; ++j)
                if (std::abs(row[j]) > kFeasEps) {
                    enter = j;
                    break;
                }
            if (enter >= 0) pivot(i, enter);
        }
    }

    bool bar_artificials_ = false;
};

LpSolution extract(const LinearProgram& lp, const Standardized& s,
                   const Simplex& sx, LpStatus status) {
    LpSolution sol;
    sol.status = status;
    if (status != LpStatus::optimal) return sol;

    std::vector<double> xs = sx.primal_struct();
    sol.primal.resize(lp.objective.size());
    for (std::size_t j = 0; j < lp.objective.size(); ++j) {
        const auto& vm = s.vmap[j];
        double v = xs[vm.col] * vm.scale + vm.shift;
        if (vm.neg_col >= 0) v -= xs[vm.neg_col];
        sol.primal[j] = v;
    }
    sol.objective = 0.0;
    for (std::size_t j = 0; j < lp.objective.size(); ++j)
        sol.objective += lp.objective[j] * sol.primal[j];

    std::vector<double> y = sx.duals();
    double sense = lp.maximize ? -1.0 : 1.0;
    sol.duals.resize(s.n_user_rows);
    for (int i = 0; i < s.n_user_rows; ++i)
        sol.duals[i] = sense * s.flip[i] * y[i];
    return sol;
}

} // namespace

bool check_solution(const LinearProgram& lp, const LpSolution& sol,
                    double tol_feas, double tol_dual) {
    if (sol.status != LpStatus::optimal) return false;
    std::size_t nv = lp.objective.size();
    if (sol.primal.size() != nv) return false;
    for (std::size_t j = 0; j < nv; ++j) {
        double lo = j < lp.lower.size() ? lp.lower[j] : 0.0;
        double hi = j < lp.upper.size() ? lp.upper[j] : kInf;
        if (sol.primal[j] < lo - tol_feas || sol.primal[j] > hi + tol_feas)
            return false;
    }
    bool plain_bounds = true; // every bound is {0 or -inf, +inf}
    for (std::size_t j = 0; j < nv; ++j) {
        double lo = j < lp.lower.size() ? lp.lower[j] : 0.0;
        double hi = j < lp.upper.size() ? lp.upper[j] : kInf;
        if ((lo != 0.0 && lo != -kInf) || hi != kInf) plain_bounds = false;
    }
    for (std::size_t i = 0; i < lp.rows.size(); ++i) {
        const auto& row = lp.rows[i];
        double lhs = 0.0;
        for (std::size_t j = 0; j < row.coeffs.size() && j < nv; ++j)
            lhs += row.coeffs[j] * sol.primal[j];
        double scale = std::max(1.0, std::abs(row.rhs));
        double gap = lhs - row.rhs;
        switch (row.rel) {
        case LinearProgram::Rel::le:
            if (gap > tol_feas * scale) return false;
            break;
        case LinearProgram::Rel::ge:
            if (gap < -tol_feas * scale) return false;
            break;
        case LinearProgram::Rel::eq:
            if (std::abs(gap) > tol_feas * scale) return false;
            break;
        }
    }
    // Strong duality: only meaningful when no translated bounds hide part
    // of the dual objective.
    if (plain_bounds && sol.duals.size() == lp.rows.size()) {
        double dual_obj = 0.0;
        for (std::size_t i = 0; i < lp.rows.size(); ++i)
            dual_obj += sol.duals[i] * lp.rows[i].rhs;
        double scale = std::max(1.0, std::abs(sol.objective));
        if (std::abs(dual_obj - sol.objective) > tol_dual * scale)
            return false;
    }
    return true;
}

void write_lp(std::ostream& os, const LinearProgram& lp) {
    auto old = os.precision(17);
    os << "lp " << (lp.maximize ? "max" : "min") << ' '
       << lp.objective.size() << ' ' << lp.rows.size() << '\n';
    os << "obj";
    for (double c : lp.objective) os << ' ' << c;
    os << "\nlo";
    for (std::size_t j = 0; j < lp.objective.size(); ++j)
        os << ' ' << (j < lp.lower.size() ? lp.lower[j] : 0.0);
    os << "\nhi";
    for (std::size_t j = 0; j < lp.objective.size(); ++j)
        os << ' ' << (j < lp.upper.size() ? lp.upper[j] : kInf);
    os << '\n';
    for (const auto& row : lp.rows) {
        os << "row " << static_cast<char>(row.rel) << ' ' << row.rhs;
        for (std::size_t j = 0; j < lp.objective.size(); ++j)
            os << ' ' << (j < row.coeffs.size() ? row.coeffs[j] : 0.0);
        os << '\n';
    }
    os.precision(old);
}

LinearProgram read_lp(std::istream& is) {
    auto fail = [](const std::string& what) -> LinearProgram {
        throw std::runtime_error("malformed LP text: " + what);
    };
    std::string tok, sense;
    // Stream extraction of doubles rejects "inf"/"-inf", so numbers go
    // through strtod, which accepts them.
    auto read_num = [&](double& x, const char* what) {
        if (!(is >> tok)) fail(what);
        char* end = nullptr;
        x = std::strtod(tok.c_str(), &end);
        if (end == tok.c_str() || *end != '\0') fail(what);
    };
    std::size_t nv = 0, nr = 0;
    if (!(is >> tok >> sense >> nv >> nr) || tok != "lp")
        return fail("header");
    LinearProgram lp;
    lp.maximize = sense == "max";
    if (!lp.maximize && sense != "min") return fail("sense");
    lp.objective.resize(nv);
    lp.lower.resize(nv);
    lp.upper.resize(nv);
    auto read_vec = [&](const char* key, std::vector<double>& v) {
        if (!(is >> tok) || tok != key) fail(key);
        for (double& x : v) read_num(x, key);
    };
    read_vec("obj", lp.objective);
    read_vec("lo", lp.lower);
    read_vec("hi", lp.upper);
    lp.rows.resize(nr);
    for (auto& row : lp.rows) {
        char rel;
        if (!(is >> tok >> rel) || tok != "row") fail("row");
        if (rel != 'L' && rel != 'E' && rel != 'G') fail("row relation");
        row.rel = static_cast<LinearProgram::Rel>(rel);
        read_num(row.rhs, "row rhs");
        row.coeffs.resize(nv);
        for (double& x : row.coeffs) read_num(x, "row coeffs");
    }
    return lp;
}

namespace {

void maybe_dump_failure(const LinearProgram& lp) {
    const char* dir = std::getenv("POSG_LP_DUMP_DIR");
    if (!dir || !*dir) return;
    static std::atomic<int> counter{0};
    std::string path = std::string(dir) + "/lpdump-" +
                       std::to_string(counter++) + ".txt";
    std::ofstream os(path);
    if (os) write_lp(os, lp);
}

} // namespace

LpSolution solve_lp(const LinearProgram& lp, const LpLimits* limits) {
    Standardized s = standardize(lp);
    {
        Simplex sx(s, limits);
        LpStatus status = sx.run(/*force_bland=*/false);
        if (status != LpStatus::numerical) {
            LpSolution sol = extract(lp, s, sx, status);
            if (status != LpStatus::optimal || check_solution(lp, sol))
                return sol;
        }
    }
    // One clean retry under Bland's rule before giving up.
    Simplex sx(s, limits);
    LpStatus status = sx.run(/*force_bland=*/true);
    LpSolution sol = extract(lp, s, sx, status);
    if (status == LpStatus::optimal && !check_solution(lp, sol))
        sol.status = LpStatus::numerical;
    if (sol.status == LpStatus::numerical) maybe_dump_failure(lp);
    return sol;
}

namespace {

// Builds the row player's program: max v subject to the mixed row
// strategy guaranteeing at least v against every column.
LpSolution solve_row_side(const std::vector<std::vector<double>>& payoff,
                          std::size_t rows, std::size_t cols) {
    LinearProgram lp;
    lp.maximize = true;
    for (std::size_t i = 0; i < rows; ++i) lp.add_var(0.0);
    int v = lp.add_var(1.0, -kInf); // game value, free
    for (std::size_t j = 0; j < cols; ++j) {
        LinearProgram::Row row;
        row.coeffs.assign(lp.objective.size(), 0.0);
        for (std::size_t i = 0; i < rows; ++i)
            row.coeffs[i] = payoff[i][j];
        row.coeffs[v] = -1.0;
        row.rel = LinearProgram::Rel::ge;
        row.rhs = 0.0;
        lp.rows.push_back(std::move(row));
    }
    LinearProgram::Row sum;
    sum.coeffs.assign(lp.objective.size(), 0.0);
    for (std::size_t i = 0; i < rows; ++i) sum.coeffs[i] = 1.0;
    sum.rel = LinearProgram::Rel::eq;
    sum.rhs = 1.0;
    lp.rows.push_back(std::move(sum));
    return solve_lp(lp);
}

} // namespace

MatrixGameSolution solve_matrix_game(
    const std::vector<std::vector<double>>& payoff) {
    if (payoff.empty() || payoff[0].empty())
        throw std::invalid_argument("empty payoff matrix");
    std::size_t rows = payoff.size(), cols = payoff[0].size();
    for (const auto& r : payoff)
        if (r.size() != cols)
            throw std::invalid_argument("ragged payoff matrix");

    LpSolution sol = solve_row_side(payoff, rows, cols);
    if (sol.status != LpStatus::optimal)
        throw std::runtime_error("matrix game LP did not solve");

    MatrixGameSolution out;
    out.value = sol.objective;
    out.row_mix.assign(sol.primal.begin(), sol.primal.begin() + rows);
    for (double& p : out.row_mix) p = std::max(0.0, p);
    double mass = 0.0;
    for (double p : out.row_mix) mass += p;
    for (double& p : out.row_mix) p /= mass;

    // Column strategy from the duals of the column constraints.
    out.col_mix.assign(cols, 0.0);
    double dual_mass = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
        out.col_mix[j] = std::abs(sol.duals[j]);
        dual_mass += out.col_mix[j];
    }
    bool ok = dual_mass > 1e-9;
    if (ok) {
        for (double& q : out.col_mix) q /= dual_mass;
        // The certificate must hold the row player to at most the value.
        for (std::size_t i = 0; i < rows && ok; ++i) {
            double e = 0.0;
            for (std::size_t j = 0; j < cols; ++j)
                e += payoff[i][j] * out.col_mix[j];
            if (e > out.value + 1e-7) ok = false;
        }
    }
    if (!ok) {
        // Fall back to solving the column player's own program.
        std::vector<std::vector<double>> neg_t(cols,
                                               std::vector<double>(rows));
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t j = 0; j < cols; ++j)
                neg_t[j][i] = -payoff[i][j];
        LpSolution csol = solve_row_side(neg_t, cols, rows);
        if (csol.status != LpStatus::optimal)
            throw std::runtime_error("matrix game LP did not solve");
        out.col_mix.assign(csol.primal.begin(), csol.primal.begin() + cols);
        for (double& q : out.col_mix) q = std::max(0.0, q);
        double m2 = 0.0;
        for (double q : out.col_mix) m2 += q;
        for (double& q : out.col_mix) q /= m2;
    }
    return out;
}

} // namespace posg
