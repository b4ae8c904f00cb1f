#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "posg/bench.hpp"
#include "posg/cfr.hpp"
#include "posg/pbvi.hpp"

namespace py = pybind11;
using namespace posg;

namespace {

SolverConfig::Variant variant_from(const std::string& name) {
    if (name == "pbvi1") return SolverConfig::Variant::pbvi1;
    if (name == "pbvi2") return SolverConfig::Variant::pbvi2;
    if (name == "pbvi3") return SolverConfig::Variant::pbvi3;
    throw std::invalid_argument("unknown variant: " + name);
}

py::dict pbvi_solve(const ZsPosg& game, int horizon, const std::string& variant,
                    double epsilon, double prune_epsilon,
                    double exploration_rate, double time_budget,
                    std::size_t memory_budget, std::uint64_t seed,
                    long max_iterations) {
    SolverConfig cfg;
    cfg.variant = variant_from(variant);
    cfg.epsilon = epsilon;
    cfg.prune_epsilon = prune_epsilon;
    cfg.exploration_rate = exploration_rate;
    cfg.time_budget = time_budget;
    cfg.memory_budget = memory_budget;
    cfg.rng_seed = seed;
    cfg.max_iterations = max_iterations;
    SolveResult res = solve(game, horizon, cfg);
    py::list trace;
    for (const auto& r : res.per_iteration_trace)
        trace.append(py::make_tuple(r.iteration, r.value, r.elapsed));
    py::dict out;
    out["value"] = res.value;
    out["status"] = std::string(status_name(res.status));
    out["iterations"] = res.iterations;
    out["trace"] = trace;
    out["peak_memory"] = res.peak_memory;
    return out;
}

py::dict cfr_solve(const ZsPosg& game, int horizon, long iterations,
                   double time_budget, std::size_t memory_budget,
                   double target_exploitability) {
    py::dict out;
    try {
        ExtensiveTree tree =
            build_extensive_form(game, horizon, memory_budget);
        CfrConfig cfg;
        cfg.iterations = iterations;
        cfg.time_budget = time_budget;
        cfg.target_exploitability = target_exploitability;
        CfrResult res = cfr_plus_solve(tree, cfg);
        py::list trace;
        for (const auto& r : res.trace)
            trace.append(py::make_tuple(r.iteration, r.value,
                                        r.exploitability, r.elapsed));
        out["value"] = res.value;
        out["exploitability"] = res.exploitability;
        out["status"] = std::string(status_name(res.status));
        out["trace"] = trace;
    } catch (const BudgetExceeded& e) {
        out["status"] = std::string(
            e.kind == BudgetExceeded::Kind::time ? "oot" : "oom");
        out["trace"] = py::list();
    }
    return out;
}

} // namespace

PYBIND11_MODULE(posgplan, m) {
    m.doc() = "offline planner for finite-horizon zero-sum partially "
              "observable stochastic games";

    py::class_<ZsPosg>(m, "Game")
        .def_property_readonly("name",
                               [](const ZsPosg& g) { return g.name; })
        .def_property_readonly("n_states", &ZsPosg::n_states)
        .def_property_readonly("discount",
                               [](const ZsPosg& g) { return g.discount; })
        .def_property_readonly(
            "initial_belief",
            [](const ZsPosg& g) { return g.initial_belief; })
        .def("n_controls",
             [](const ZsPosg& g, int player) {
                 return g.n_controls(player == 0 ? Player::maximizer
                                                 : Player::minimizer);
             },
             py::arg("player"))
        .def("n_observations",
             [](const ZsPosg& g, int player) {
                 return g.n_obs(player == 0 ? Player::maximizer
                                            : Player::minimizer);
             },
             py::arg("player"))
        .def("reward", [](const ZsPosg& g, int x, int u1,
                          int u2) { return g.r(x, u1, u2); })
        .def("kernel",
             [](const ZsPosg& g, int x, int u1, int u2, int y, int z1,
                int z2) { return g.p(x, u1, u2, y, z1, z2); })
        .def("__repr__", [](const ZsPosg& g) {
            return "<Game '" + g.name + "' |X|=" +
                   std::to_string(g.n_states()) + ">";
        });

    m.def("parse_dpomdp", &parse_dpomdp, py::arg("text"));
    m.def("parse_dpomdp_file", &parse_dpomdp_file, py::arg("path"));
    m.def("serialize_dpomdp", &serialize_dpomdp, py::arg("game"));
    m.def("validate",
          [](const ZsPosg& g) { return validate(g).problems; },
          py::arg("game"));
    m.def("embed_matrix_game", &embed_matrix_game, py::arg("payoff"));
    m.def("competitive_adaptation", &competitive_adaptation, py::arg("game"));
    m.def(
        "solve_matrix_game",
        [](const std::vector<std::vector<double>>& payoff) {
            MatrixGameSolution s = solve_matrix_game(payoff);
            return py::make_tuple(s.value, s.row_mix, s.col_mix);
        },
        py::arg("payoff"),
        "value and optimal mixed strategies (payoff to the row player)");
    m.def("exact_value", &exact_value_oracle, py::arg("game"),
          py::arg("horizon"),
          "brute-force game value; only feasible for tiny instances");
    m.def("pbvi_solve", &pbvi_solve, py::arg("game"), py::arg("horizon"),
          py::arg("variant") = "pbvi1", py::arg("epsilon") = 1e-3,
          py::arg("prune_epsilon") = 1e-4, py::arg("exploration_rate") = 0.1,
          py::arg("time_budget") = 7200.0,
          py::arg("memory_budget") = std::size_t{2} << 30,
          py::arg("seed") = std::uint64_t{0},
          py::arg("max_iterations") = long{10000});
    m.def("cfr_solve", &cfr_solve, py::arg("game"), py::arg("horizon"),
          py::arg("iterations") = long{1000}, py::arg("time_budget") = 7200.0,
          py::arg("memory_budget") = std::size_t{2} << 30,
          py::arg("target_exploitability") = 0.0);
}
