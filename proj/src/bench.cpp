#include "posg/bench.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace posg {

namespace {

std::string basename_no_ext(const std::string& path) {
    std::size_t slash = path.find_last_of("/\\");
    std::string base =
        slash == std::string::npos ? path : path.substr(slash + 1);
    std::size_t dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    return base;
}

bool file_exists(const std::string& path) {
    std::ifstream f(path);
    return f.good();
}

std::string fmt(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

void write_trace_csv(const std::string& path,
                     const std::vector<std::pair<long, double>>& rows) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "iter,value\n";
    for (const auto& [it, v] : rows)
        out << it << "," << fmt("%.12g", v) << "\n";
}

void append_summary(const std::string& dir, const ResultRow& row) {
    const std::string path = dir + "/summary.csv";
    const bool fresh = !file_exists(path);
    std::ofstream out(path, std::ios::binary | std::ios::app);
    if (!out) throw std::runtime_error("cannot write " + path);
    if (fresh) out << "game,horizon,algorithm,seconds,value,status\n";
    out << row.game << "," << row.horizon << "," << row.algorithm << ","
        << fmt("%.3f", row.seconds) << ",";
    if (row.value)
        out << fmt("%.12g", *row.value);
    out << "," << row.status << "\n";
}

ResultRow run_one(const ZsPosg& game, const std::string& game_name, int ell,
                  const std::string& alg, const RunSpec& spec) {
    ResultRow row;
    row.game = game_name;
    row.horizon = ell;
    row.algorithm = alg;

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<std::pair<long, double>> trace;
    RunStatus status = RunStatus::iteration_cap;
    double value = 0.0;

    if (alg == "cfr" || alg == "cfr+") {
        try {
            ExtensiveTree tree =
                build_extensive_form(game, ell, spec.memory_limit);
            CfrConfig cc;
            cc.iterations = 1000000;
            cc.time_budget = spec.time_limit;
            cc.target_exploitability = spec.epsilon;
            CfrResult res = cfr_plus_solve(tree, cc);
            status = res.status;
            value = res.value;
            for (const auto& r : res.trace) trace.emplace_back(r.iteration, r.value);
        } catch (const BudgetExceeded& e) {
            status = e.kind == BudgetExceeded::Kind::time ? RunStatus::oot
                                                          : RunStatus::oom;
        }
    } else if (alg == "oracle") {
        try {
            value = exact_value_oracle(game, ell);
            status = RunStatus::converged;
            trace.emplace_back(0, value);
        } catch (const std::runtime_error&) {
            // Enumeration refused the instance size; report it the way the
            // summary reports any capacity stop.
            status = RunStatus::oom;
        }
    } else {
        SolverConfig cfg;
        if (alg == "pbvi1")
            cfg.variant = SolverConfig::Variant::pbvi1;
        else if (alg == "pbvi2")
            cfg.variant = SolverConfig::Variant::pbvi2;
        else if (alg == "pbvi3")
            cfg.variant = SolverConfig::Variant::pbvi3;
        else
            throw std::runtime_error("unknown algorithm: " + alg);
        cfg.epsilon = spec.epsilon;
        cfg.prune_epsilon = spec.prune_epsilon;
        cfg.time_budget = spec.time_limit;
        cfg.memory_budget = spec.memory_limit;
        cfg.rng_seed = spec.seed;
        if (spec.checkpoint_every > 0) {
            cfg.checkpoint_every = spec.checkpoint_every;
            cfg.checkpoint_path = spec.out_dir + "/" + game_name + "_" +
                                  alg + "_H" + std::to_string(ell) +
                                  ".ckpt";
        }
        SolveResult res = solve(game, ell, cfg);
        status = res.status;
        value = res.value;
        for (const auto& r : res.per_iteration_trace)
            trace.emplace_back(r.iteration, r.value);
    }

    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
            .count();
    const std::string csv = spec.out_dir + "/" + game_name + "_" +
                            alg + "_H" + std::to_string(ell) +
                            ".csv";
    write_trace_csv(csv, trace);
    if (status == RunStatus::oot)
        row.status = "OOT";
    else if (status == RunStatus::oom)
        row.status = "OOM";
    else
        row.value = value;
    return row;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            cells.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    cells.push_back(cur);
    return cells;
}

} // namespace

std::string resolve_game_path(const std::string& name,
                              const std::string& data_dir) {
    if (name.size() > 7 &&
        name.compare(name.size() - 7, 7, ".dpomdp") == 0)
        return name;
    std::string dir = data_dir;
    if (dir.empty()) {
        const char* env = std::getenv("POSG_DATA_DIR");
        if (env) dir = env;
    }
    if (dir.empty()) dir = ".";
    return dir + "/" + name + ".dpomdp";
}

std::vector<ResultRow> run_benchmarks(const RunSpec& spec) {
    if (spec.horizons.empty())
        throw std::runtime_error("no horizons requested");
    if (spec.algorithms.empty())
        throw std::runtime_error("no algorithms requested");
    const std::string path = resolve_game_path(spec.game, spec.data_dir);
    const ZsPosg game = parse_dpomdp_file(path);
    const std::string game_name = basename_no_ext(path);

    std::vector<std::string> algs = spec.algorithms;
    std::sort(algs.begin(), algs.end());
    algs.erase(std::unique(algs.begin(), algs.end()), algs.end());

    std::vector<ResultRow> rows;
    for (int ell : spec.horizons) {
        if (ell < 0) throw std::runtime_error("negative horizon");
        for (const std::string& alg : algs) {
            ResultRow row = run_one(game, game_name, ell, alg, spec);
            append_summary(spec.out_dir, row);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

int compare_to_golden(const std::string& summary_path,
                      const std::string& golden_path, std::ostream& log) {
    std::ifstream gin(golden_path);
    if (!gin)
        throw std::runtime_error("cannot read golden file: " + golden_path);
    std::ifstream sin(summary_path);
    if (!sin)
        throw std::runtime_error("cannot read summary file: " + summary_path);

    struct SummaryRow {
        std::string game;
        int horizon;
        std::string value;  // textual, may be empty
        std::string status; // may be empty
    };
    std::vector<SummaryRow> summary;
    std::string line;
    bool first = true;
    while (std::getline(sin, line)) {
        if (line.empty()) continue;
        auto cells = split_csv_line(line);
        if (first && !cells.empty() && cells[0] == "game") {
            first = false;
            continue;
        }
        first = false;
        if (cells.size() != 6)
            throw std::runtime_error("malformed summary row: " + line);
        summary.push_back(
            SummaryRow{cells[0], std::stoi(cells[1]), cells[4], cells[5]});
    }

    int failures = 0;
    first = true;
    while (std::getline(gin, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto cells = split_csv_line(line);
        if (first && !cells.empty() && cells[0] == "game") {
            first = false;
            continue;
        }
        first = false;
        if (cells.size() != 4)
            throw std::runtime_error("malformed golden row: " + line);
        const std::string& game = cells[0];
        const int horizon = std::stoi(cells[1]);
        const std::string& expected = cells[2];
        const bool expect_status = expected == "OOT" || expected == "OOM";
        const double tol = expect_status ? 0.0 : std::stod(cells[3]);

        int matched = 0;
        bool ok = true;
        std::string detail;
        for (const auto& s : summary) {
            if (s.game != game || s.horizon != horizon) continue;
            ++matched;
            if (expect_status) {
                if (s.status != expected) {
                    ok = false;
                    detail = "got " +
                             (s.status.empty() ? ("value " + s.value)
                                               : ("status " + s.status));
                }
            } else if (!s.status.empty()) {
                ok = false;
                detail = "got status " + s.status;
            } else {
                const double got = std::stod(s.value);
                const double want = std::stod(expected);
                if (std::abs(got - want) > tol) {
                    ok = false;
                    detail = "got " + s.value + ", want " + expected +
                             " +/- " + cells[3];
                }
            }
        }
        if (matched == 0) {
            ok = false;
            detail = "no summary row";
        }
        if (!ok) ++failures;
        log << (ok ? "PASS" : "FAIL") << " " << game << " H" << horizon
            << " expected " << expected;
        if (!detail.empty()) log << " (" << detail << ")";
        log << "\n";
    }
    return failures;
}

std::size_t parse_bytes(const std::string& text) {
    if (text.empty()) throw std::runtime_error("empty byte size");
    std::size_t mult = 1;
    std::string num = text;
    switch (text.back()) {
        case 'k': case 'K': mult = 1ull << 10; break;
        case 'm': case 'M': mult = 1ull << 20; break;
        case 'g': case 'G': mult = 1ull << 30; break;
        default: break;
    }
    if (mult != 1) num = text.substr(0, text.size() - 1);
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(num, &pos);
    if (pos != num.size())
        throw std::runtime_error("malformed byte size: " + text);
    return static_cast<std::size_t>(v) * mult;
}

} // namespace posg
