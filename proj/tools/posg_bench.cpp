#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "posg/bench.hpp"

namespace {

int do_run(posg::RunSpec& spec, const std::string& golden) {
    std::vector<posg::ResultRow> rows = posg::run_benchmarks(spec);
    for (const auto& r : rows) {
        std::printf("%s H%d %s: ", r.game.c_str(), r.horizon,
                    r.algorithm.c_str());
        if (r.value)
            std::printf("value=%.6g", *r.value);
        else
            std::printf("status=%s", r.status.c_str());
        std::printf(" (%.1fs)\n", r.seconds);
    }
    if (!golden.empty()) {
        const int failures = posg::compare_to_golden(
            spec.out_dir + "/summary.csv", golden, std::cout);
        return failures == 0 ? 0 : 1;
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"offline benchmark runner for the occupancy-game planner"};
    app.set_config("--config", "", "key=value option file");

    posg::RunSpec spec;
    std::string memory = "2G";
    std::string golden;
    std::string summary;

    CLI::App* run = app.add_subcommand("run", "solve game/horizon cells");
    run->add_option("--game", spec.game,
                    "benchmark name or path to a .dpomdp file")
        ->required();
    run->add_option("--horizons", spec.horizons,
                    "comma-separated planning horizons")
        ->required()
        ->delimiter(',');
    run->add_option("--alg", spec.algorithms,
                    "comma-separated from pbvi1 | pbvi2 | pbvi3 | cfr+ | "
                    "oracle")
        ->delimiter(',')
        ->check(CLI::IsMember(
            {"pbvi1", "pbvi2", "pbvi3", "cfr+", "cfr", "oracle"}));
    run->add_option("--epsilon", spec.epsilon, "convergence threshold");
    run->add_option("--prune-epsilon", spec.prune_epsilon,
                    "bounded-pruning slack (pbvi2/pbvi3)");
    run->add_option("--time-limit", spec.time_limit,
                    "per-run wall budget, seconds");
    run->add_option("--memory-limit", memory,
                    "per-run memory budget, bytes with optional K/M/G");
    run->add_option("--seed", spec.seed, "rng seed");
    run->add_option("--out", spec.out_dir, "output directory for CSVs");
    run->add_option("--checkpoint-every", spec.checkpoint_every,
                    "checkpoint cadence in iterations (0 = off)");
    run->add_option("--golden", golden,
                    "after running, compare summary.csv to this golden CSV");
    run->add_option("--data-dir", spec.data_dir,
                    "game directory (default: $POSG_DATA_DIR)");

    CLI::App* cmp = app.add_subcommand("compare",
                                       "check a summary against a golden CSV");
    cmp->add_option("--golden", golden, "golden CSV path")->required();
    cmp->add_option("--summary", summary, "summary CSV path");
    cmp->add_option("--out", spec.out_dir,
                    "directory holding summary.csv (used when --summary "
                    "is not given)");

    app.require_subcommand(0, 1);

    // `run` is the default subcommand: inject it when the first token is
    // neither a subcommand nor a help/config flag for the top level.
    std::vector<std::string> args(argv + 1, argv + argc);
    if (!args.empty() && args[0] != "run" && args[0] != "compare" &&
        args[0] != "-h" && args[0] != "--help")
        args.insert(args.begin(), "run");
    std::vector<const char*> cargv;
    cargv.push_back(argv[0]);
    for (const auto& a : args) cargv.push_back(a.c_str());

    try {
        app.parse(static_cast<int>(cargv.size()), cargv.data());
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (cmp->parsed()) {
            const std::string path =
                summary.empty() ? spec.out_dir + "/summary.csv" : summary;
            const int failures =
                posg::compare_to_golden(path, golden, std::cout);
            return failures == 0 ? 0 : 1;
        }
        spec.memory_limit = posg::parse_bytes(memory);
        return do_run(spec, golden);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
}
