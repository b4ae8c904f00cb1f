#pragma once

#include <iosfwd>
#include <optional>

#include "posg/cfr.hpp"
#include "posg/pbvi.hpp"

namespace posg {

// One benchmark request: a game crossed with lists of horizons and
// algorithms under shared budgets.
struct RunSpec {
    std::string game;                // benchmark name or path to a .dpomdp
    std::vector<int> horizons;
    // Any of pbvi1 | pbvi2 | pbvi3 | cfr+ | oracle ("cfr" is accepted as
    // an alias for cfr+).  Deduplicated and run in lexicographic order so
    // summary.csv stays ordered by (game, horizon, algorithm).
    std::vector<std::string> algorithms = {"pbvi1"};
    double epsilon = 1e-3;
    double prune_epsilon = 1e-4;
    double time_limit = 7200.0;      // seconds per (game, horizon) run
    std::size_t memory_limit = 2ull << 30; // bytes
    std::uint64_t seed = 0;
    std::string out_dir = ".";
    long checkpoint_every = 0;       // pbvi checkpoint cadence, 0 = off
    std::string data_dir;            // empty = $POSG_DATA_DIR
};

// One summary line.  Exactly one of value/status is populated: value for
// completed runs (converged or iteration-capped), status ("OOT"/"OOM",
// uppercase) for budget-limited ones.
struct ResultRow {
    std::string game;
    int horizon = 0;
    std::string algorithm;
    double seconds = 0.0;
    std::optional<double> value;
    std::string status;
};

// Maps a benchmark name or path to a readable .dpomdp file: a path with
// the extension is taken as-is, otherwise `<data_dir>/<name>.dpomdp`.
// data_dir falls back to the POSG_DATA_DIR environment variable.
std::string resolve_game_path(const std::string& name,
                              const std::string& data_dir);

// Runs every (game, horizon) cell, writing one `<game>_<alg>_H<n>.csv`
// trace per cell (header `iter,value`; byte-identical across reruns with
// the same seed) and appending to `<out_dir>/summary.csv`.  Budget
// exhaustion is reported in the row, never thrown.
std::vector<ResultRow> run_benchmarks(const RunSpec& spec);

// Golden comparison.  The golden CSV has columns
// game,horizon,expected,tolerance where expected is either a number or
// an uppercase budget status (OOT/OOM).  Every summary row matching a
// golden (game, horizon) must agree; a golden row with no summary match
// fails.  Writes one verdict line per golden row to `log` and returns
// the number of failures.
int compare_to_golden(const std::string& summary_path,
                      const std::string& golden_path, std::ostream& log);

// Parses byte sizes with optional K/M/G suffix ("2G" -> 2^31).
std::size_t parse_bytes(const std::string& text);

} // namespace posg
