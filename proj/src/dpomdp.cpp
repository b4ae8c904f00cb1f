#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "posg/game.hpp"

namespace posg {

namespace {

struct Tokens {
    std::vector<std::string> items;
};

std::vector<std::string> split_ws(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

double parse_number(const std::string& tok, int line) {
    try {
        std::size_t used = 0;
        double v = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(line, "expected a number, got '" + tok + "'");
    }
}

// Resolves a field token against a name list: '*' yields all indices, a
// decimal token is an index, anything else must be a declared name.
std::vector<int> resolve(const std::string& tok,
                         const std::vector<std::string>& names, int line,
                         const char* what) {
    if (tok == "*") {
        std::vector<int> all(names.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = (int)i;
        return all;
    }
    bool numeric = !tok.empty();
    for (char c : tok)
        if (!std::isdigit(static_cast<unsigned char>(c))) numeric = false;
    if (numeric) {
        int i = std::atoi(tok.c_str());
        if (i < 0 || i >= (int)names.size())
            throw ParseError(line, std::string(what) + " index " + tok +
                                       " out of range");
        return {i};
    }
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == tok) return {(int)i};
    throw ParseError(line, std::string("unknown ") + what + " '" + tok + "'");
}

std::vector<std::string> make_names(const std::vector<std::string>& toks,
                                    const char* prefix, int line) {
    if (toks.empty()) throw ParseError(line, "empty name list");
    if (toks.size() == 1) {
        bool numeric = true;
        for (char c : toks[0])
            if (!std::isdigit(static_cast<unsigned char>(c))) numeric = false;
        if (numeric) {
            int n = std::atoi(toks[0].c_str());
            if (n <= 0) throw ParseError(line, "count must be positive");
            std::vector<std::string> out;
            for (int i = 0; i < n; ++i)
                out.push_back(std::string(prefix) + std::to_string(i));
            return out;
        }
    }
    return toks;
}

} // namespace

ZsPosg parse_dpomdp(const std::string& text) {
    ZsPosg g;
    int agents = -1;
    std::string values_kind = "reward";
    std::vector<std::string> start_tokens;
    int start_line = 0;

    // Raw model tables, folded into the joint kernel once complete.
    std::vector<double> T, O, R; // [x][u1][u2][y], [u1][u2][y][z1][z2],
                                 // [x][u1][u2][y][z1][z2]
    std::vector<bool> R_set;
    bool o_seen = false, spaces_ready = false;

    auto require_spaces = [&](int line) {
        if (spaces_ready) return;
        if (g.states.empty() || g.controls_max.empty() ||
            g.controls_min.empty() || g.obs_max.empty() || g.obs_min.empty())
            throw ParseError(line,
                             "model entry before all spaces were declared");
        std::size_t n = g.states.size(), u1 = g.controls_max.size(),
                    u2 = g.controls_min.size(), z1 = g.obs_max.size(),
                    z2 = g.obs_min.size();
        T.assign(n * u1 * u2 * n, 0.0);
        O.assign(u1 * u2 * n * z1 * z2, 0.0);
        R.assign(n * u1 * u2 * n * z1 * z2, 0.0);
        R_set.assign(R.size(), false);
        spaces_ready = true;
    };
    auto t_at = [&](int x, int u1, int u2, int y) -> double& {
        std::size_t i = x;
        i = i * g.controls_max.size() + u1;
        i = i * g.controls_min.size() + u2;
        i = i * g.states.size() + y;
        return T[i];
    };
    auto o_at = [&](int u1, int u2, int y, int z1, int z2) -> double& {
        std::size_t i = u1;
        i = i * g.controls_min.size() + u2;
        i = i * g.states.size() + y;
        i = i * g.obs_max.size() + z1;
        i = i * g.obs_min.size() + z2;
        return O[i];
    };
    auto r_index = [&](int x, int u1, int u2, int y, int z1, int z2) {
        std::size_t i = x;
        i = i * g.controls_max.size() + u1;
        i = i * g.controls_min.size() + u2;
        i = i * g.states.size() + y;
        i = i * g.obs_max.size() + z1;
        i = i * g.obs_min.size() + z2;
        return i;
    };

    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    int pending_actions = 0, pending_obs = 0;

    while (std::getline(in, raw)) {
        ++line_no;
        std::size_t hash = raw.find('#');
        if (hash != std::string::npos) raw = raw.substr(0, hash);
        std::string line = trim(raw);
        if (line.empty()) continue;

        if (pending_actions > 0) {
            auto toks = split_ws(line);
            auto names = make_names(toks, "a", line_no);
            if (pending_actions == 2)
                g.controls_max = names;
            else
                g.controls_min = names;
            --pending_actions;
            continue;
        }
        if (pending_obs > 0) {
            auto toks = split_ws(line);
            auto names = make_names(toks, "o", line_no);
            if (pending_obs == 2)
                g.obs_max = names;
            else
                g.obs_min = names;
            --pending_obs;
            continue;
        }

        std::size_t colon = line.find(':');
        if (colon == std::string::npos)
            throw ParseError(line_no, "expected 'key: ...', got '" + line + "'");
        std::string key = trim(line.substr(0, colon));
        std::string rest = trim(line.substr(colon + 1));

        if (key == "agents") {
            agents = (int)parse_number(rest, line_no);
            if (agents != 2)
                throw ParseError(line_no,
                                 "this solver handles exactly two players, "
                                 "file declares " +
                                     std::to_string(agents));
        } else if (key == "discount") {
            g.discount = parse_number(rest, line_no);
        } else if (key == "values") {
            if (rest != "reward" && rest != "cost")
                throw ParseError(line_no, "values must be reward or cost");
            values_kind = rest;
        } else if (key == "states") {
            g.states = make_names(split_ws(rest), "s", line_no);
        } else if (key == "actions") {
            if (rest.empty())
                pending_actions = 2;
            else
                throw ParseError(line_no,
                                 "actions must be followed by one line per "
                                 "agent");
        } else if (key == "observations") {
            if (rest.empty())
                pending_obs = 2;
            else
                throw ParseError(line_no,
                                 "observations must be followed by one line "
                                 "per agent");
        } else if (key == "start") {
            start_tokens = split_ws(rest);
            start_line = line_no;
        } else if (key == "T" || key == "O" || key == "R") {
            require_spaces(line_no);
            // Remaining fields are colon-delimited.
            std::vector<std::string> fields;
            std::string body = rest;
            while (true) {
                std::size_t c = body.find(':');
                if (c == std::string::npos) {
                    fields.push_back(trim(body));
                    break;
                }
                fields.push_back(trim(body.substr(0, c)));
                body = body.substr(c + 1);
            }
            auto joint = split_ws(fields[0]);
            if (joint.size() == 1 && joint[0] == "*") joint = {"*", "*"};
            if (joint.size() != 2)
                throw ParseError(line_no,
                                 "expected a joint control '<u_max u_min>'");
            auto u1s = resolve(joint[0], g.controls_max, line_no, "control");
            auto u2s = resolve(joint[1], g.controls_min, line_no, "control");

            if (key == "T") {
                if (fields.size() == 2 &&
                    (fields[1] == "uniform" || fields[1] == "identity")) {
                    for (int u1 : u1s)
                        for (int u2 : u2s)
                            for (int x = 0; x < g.n_states(); ++x)
                                for (int y = 0; y < g.n_states(); ++y)
                                    t_at(x, u1, u2, y) =
                                        fields[1] == "uniform"
                                            ? 1.0 / g.n_states()
                                            : (x == y ? 1.0 : 0.0);
                } else if (fields.size() == 3 && (fields[2] == "uniform" ||
                                                  fields[2] == "identity")) {
                    auto xs = resolve(fields[1], g.states, line_no, "state");
                    for (int u1 : u1s)
                        for (int u2 : u2s)
                            for (int x : xs)
                                for (int y = 0; y < g.n_states(); ++y)
                                    t_at(x, u1, u2, y) =
                                        fields[2] == "uniform"
                                            ? 1.0 / g.n_states()
                                            : (x == y ? 1.0 : 0.0);
                } else if (fields.size() == 4) {
                    auto xs = resolve(fields[1], g.states, line_no, "state");
                    auto ys = resolve(fields[2], g.states, line_no, "state");
                    double v = parse_number(fields[3], line_no);
                    for (int u1 : u1s)
                        for (int u2 : u2s)
                            for (int x : xs)
                                for (int y : ys) t_at(x, u1, u2, y) = v;
                } else {
                    throw ParseError(line_no, "malformed T entry");
                }
            } else if (key == "O") {
                o_seen = true;
                if (fields.size() == 2 && fields[1] == "uniform") {
                    double v = 1.0 / (g.obs_max.size() * g.obs_min.size());
                    for (int u1 : u1s)
                        for (int u2 : u2s)
                            for (int y = 0; y < g.n_states(); ++y)
                                for (int z1 = 0; z1 < (int)g.obs_max.size();
                                     ++z1)
                                    for (int z2 = 0;
                                         z2 < (int)g.obs_min.size(); ++z2)
                                        o_at(u1, u2, y, z1, z2) = v;
                } else if (fields.size() == 3 && fields[2] == "uniform") {
                    auto ys = resolve(fields[1], g.states, line_no, "state");
                    double v = 1.0 / (g.obs_max.size() * g.obs_min.size());
                    for (int u1 : u1s)
                        for (int u2 : u2s)
                            for (int y : ys)
                                for (int z1 = 0; z1 < (int)g.obs_max.size();
                                     ++z1)
                                    for (int z2 = 0;
                                         z2 < (int)g.obs_min.size(); ++z2)
                                        o_at(u1, u2, y, z1, z2) = v;
                } else if (fields.size() == 4) {
                    auto ys = resolve(fields[1], g.states, line_no, "state");
                    auto zj = split_ws(fields[2]);
                    if (zj.size() == 1 && zj[0] == "*") zj = {"*", "*"};
                    if (zj.size() != 2)
                        throw ParseError(
                            line_no, "expected a joint observation "
                                     "'<z_max z_min>'");
                    auto z1s =
                        resolve(zj[0], g.obs_max, line_no, "observation");
                    auto z2s =
                        resolve(zj[1], g.obs_min, line_no, "observation");
                    double v = parse_number(fields[3], line_no);
                    for (int u1 : u1s)
                        for (int u2 : u2s)
                            for (int y : ys)
                                for (int z1 : z1s)
                                    for (int z2 : z2s)
                                        o_at(u1, u2, y, z1, z2) = v;
                } else {
                    throw ParseError(line_no, "malformed O entry");
                }
            } else { // R
                std::vector<int> xs, ys, z1s, z2s;
                double v;
                if (fields.size() == 5) {
                    xs = resolve(fields[1], g.states, line_no, "state");
                    ys = resolve(fields[2], g.states, line_no, "state");
                    auto zj = split_ws(fields[3]);
                    if (zj.size() == 1 && zj[0] == "*") zj = {"*", "*"};
                    if (zj.size() != 2)
                        throw ParseError(line_no,
                                         "expected a joint observation");
                    z1s = resolve(zj[0], g.obs_max, line_no, "observation");
                    z2s = resolve(zj[1], g.obs_min, line_no, "observation");
                    v = parse_number(fields[4], line_no);
                } else if (fields.size() == 3) {
                    xs = resolve(fields[1], g.states, line_no, "state");
                    ys.resize(g.states.size());
                    for (std::size_t i = 0; i < ys.size(); ++i) ys[i] = (int)i;
                    z1s.resize(g.obs_max.size());
                    for (std::size_t i = 0; i < z1s.size(); ++i)
                        z1s[i] = (int)i;
                    z2s.resize(g.obs_min.size());
                    for (std::size_t i = 0; i < z2s.size(); ++i)
                        z2s[i] = (int)i;
                    v = parse_number(fields[2], line_no);
                } else {
                    throw ParseError(line_no, "malformed R entry");
                }
                for (int u1 : u1s)
                    for (int u2 : u2s)
                        for (int x : xs)
                            for (int y : ys)
                                for (int z1 : z1s)
                                    for (int z2 : z2s) {
                                        std::size_t i =
                                            r_index(x, u1, u2, y, z1, z2);
                                        R[i] = v;
                                        R_set[i] = true;
                                    }
            }
        } else {
            throw ParseError(line_no, "unknown section '" + key + "'");
        }
    }

    if (agents != 2) throw std::runtime_error("file never declared agents: 2");
    require_spaces(line_no);

    // Observation model may be omitted only when observations are trivial.
    if (!o_seen) {
        if (g.obs_max.size() == 1 && g.obs_min.size() == 1) {
            for (int u1 = 0; u1 < (int)g.controls_max.size(); ++u1)
                for (int u2 = 0; u2 < (int)g.controls_min.size(); ++u2)
                    for (int y = 0; y < g.n_states(); ++y)
                        o_at(u1, u2, y, 0, 0) = 1.0;
        } else {
            throw std::runtime_error(
                "observation model undefined and observation spaces are "
                "non-trivial");
        }
    }

    // Initial belief.
    g.initial_belief.assign(g.n_states(), 0.0);
    if (start_tokens.empty()) {
        throw std::runtime_error("start distribution undefined");
    } else if (start_tokens.size() == 1 && start_tokens[0] == "uniform") {
        for (double& b : g.initial_belief) b = 1.0 / g.n_states();
    } else if (start_tokens.size() == 1 &&
               !std::isdigit(
                   static_cast<unsigned char>(start_tokens[0][0])) &&
               start_tokens[0][0] != '.') {
        auto xs = resolve(start_tokens[0], g.states, start_line, "state");
        g.initial_belief[xs[0]] = 1.0;
    } else {
        if ((int)start_tokens.size() != g.n_states())
            throw ParseError(start_line,
                             "start distribution has wrong dimension");
        double sum = 0.0;
        for (int i = 0; i < g.n_states(); ++i) {
            g.initial_belief[i] = parse_number(start_tokens[i], start_line);
            sum += g.initial_belief[i];
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw ParseError(start_line, "start distribution sums to " +
                                             std::to_string(sum));
    }

    // Completeness and stochasticity, then fold O (and R) into the kernel.
    g.allocate();
    char buf[160];
    for (int x = 0; x < g.n_states(); ++x)
        for (int u1 = 0; u1 < (int)g.controls_max.size(); ++u1)
            for (int u2 = 0; u2 < (int)g.controls_min.size(); ++u2) {
                double row = 0.0;
                for (int y = 0; y < g.n_states(); ++y)
                    row += t_at(x, u1, u2, y);
                if (row == 0.0) {
                    std::snprintf(buf, sizeof buf,
                                  "transition undefined for (x=%d, u=(%d,%d))",
                                  x, u1, u2);
                    throw std::runtime_error(buf);
                }
                if (std::abs(row - 1.0) > 1e-9) {
                    std::snprintf(
                        buf, sizeof buf,
                        "transition row (x=%d, u=(%d,%d)) sums to %.12f", x,
                        u1, u2, row);
                    throw std::runtime_error(buf);
                }
            }
    for (int u1 = 0; u1 < (int)g.controls_max.size(); ++u1)
        for (int u2 = 0; u2 < (int)g.controls_min.size(); ++u2)
            for (int y = 0; y < g.n_states(); ++y) {
                double row = 0.0;
                for (int z1 = 0; z1 < (int)g.obs_max.size(); ++z1)
                    for (int z2 = 0; z2 < (int)g.obs_min.size(); ++z2)
                        row += o_at(u1, u2, y, z1, z2);
                if (std::abs(row - 1.0) > 1e-9) {
                    std::snprintf(buf, sizeof buf,
                                  "observation row (u=(%d,%d), y=%d) sums to "
                                  "%.12f",
                                  u1, u2, y, row);
                    throw std::runtime_error(buf);
                }
            }

    double sign = values_kind == "cost" ? -1.0 : 1.0;
    for (int x = 0; x < g.n_states(); ++x)
        for (int u1 = 0; u1 < (int)g.controls_max.size(); ++u1)
            for (int u2 = 0; u2 < (int)g.controls_min.size(); ++u2) {
                double exp_r = 0.0;
                for (int y = 0; y < g.n_states(); ++y)
                    for (int z1 = 0; z1 < (int)g.obs_max.size(); ++z1)
                        for (int z2 = 0; z2 < (int)g.obs_min.size(); ++z2) {
                            double pr =
                                t_at(x, u1, u2, y) * o_at(u1, u2, y, z1, z2);
                            g.p(x, u1, u2, y, z1, z2) = pr;
                            exp_r +=
                                pr * R[r_index(x, u1, u2, y, z1, z2)];
                        }
                g.r(x, u1, u2) = sign * exp_r;
            }
    return g;
}

ZsPosg parse_dpomdp_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    ZsPosg g = parse_dpomdp(buf.str());
    std::size_t slash = path.find_last_of('/');
    std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
    std::size_t dot = base.find_last_of('.');
    g.name = dot == std::string::npos ? base : base.substr(0, dot);
    return g;
}

std::string serialize_dpomdp(const ZsPosg& g) {
    int n = g.n_states();
    int u1n = (int)g.controls_max.size(), u2n = (int)g.controls_min.size();
    int z1n = (int)g.obs_max.size(), z2n = (int)g.obs_min.size();

    // Recover T and O from the folded kernel; fail if O would have to
    // depend on the predecessor state.
    std::vector<double> T((std::size_t)n * u1n * u2n * n, 0.0);
    std::vector<double> O((std::size_t)u1n * u2n * n * z1n * z2n, 0.0);
    std::vector<bool> O_known((std::size_t)u1n * u2n * n, false);
    auto t_at = [&](int x, int u1, int u2, int y) -> double& {
        return T[((std::size_t)(x * u1n + u1) * u2n + u2) * n + y];
    };
    auto o_at = [&](int u1, int u2, int y, int z1, int z2) -> double& {
        return O[(((std::size_t)(u1 * u2n + u2) * n + y) * z1n + z1) * z2n +
                 z2];
    };
    for (int x = 0; x < n; ++x)
        for (int u1 = 0; u1 < u1n; ++u1)
            for (int u2 = 0; u2 < u2n; ++u2)
                for (int y = 0; y < n; ++y) {
                    double ty = 0.0;
                    for (int z1 = 0; z1 < z1n; ++z1)
                        for (int z2 = 0; z2 < z2n; ++z2)
                            ty += g.p(x, u1, u2, y, z1, z2);
                    t_at(x, u1, u2, y) = ty;
                    if (ty <= 0.0) continue;
                    std::size_t flat = (std::size_t)(u1 * u2n + u2) * n + y;
                    for (int z1 = 0; z1 < z1n; ++z1)
                        for (int z2 = 0; z2 < z2n; ++z2) {
                            double o = g.p(x, u1, u2, y, z1, z2) / ty;
                            if (!O_known[flat])
                                o_at(u1, u2, y, z1, z2) = o;
                            else if (std::abs(o_at(u1, u2, y, z1, z2) - o) >
                                     1e-12)
                                throw std::domain_error(
                                    "kernel does not factorize; cannot "
                                    "serialize");
                        }
                    O_known[flat] = true;
                }
    // Unreached (u,y) rows get a uniform observation row so the output
    // file is complete.
    for (int u1 = 0; u1 < u1n; ++u1)
        for (int u2 = 0; u2 < u2n; ++u2)
            for (int y = 0; y < n; ++y)
                if (!O_known[(std::size_t)(u1 * u2n + u2) * n + y])
                    for (int z1 = 0; z1 < z1n; ++z1)
                        for (int z2 = 0; z2 < z2n; ++z2)
                            o_at(u1, u2, y, z1, z2) = 1.0 / (z1n * z2n);

    std::ostringstream out;
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    out << "agents: 2\n";
    out << "discount: " << num(g.discount) << "\n";
    out << "values: reward\n";
    out << "states:";
    for (const auto& s : g.states) out << ' ' << s;
    out << "\nactions:\n";
    for (const auto& a : g.controls_max) out << a << ' ';
    out << "\n";
    for (const auto& a : g.controls_min) out << a << ' ';
    out << "\nobservations:\n";
    for (const auto& o : g.obs_max) out << o << ' ';
    out << "\n";
    for (const auto& o : g.obs_min) out << o << ' ';
    out << "\nstart:";
    for (double b : g.initial_belief) out << ' ' << num(b);
    out << "\n";
    for (int u1 = 0; u1 < u1n; ++u1)
        for (int u2 = 0; u2 < u2n; ++u2)
            for (int x = 0; x < n; ++x)
                for (int y = 0; y < n; ++y)
                    if (t_at(x, u1, u2, y) != 0.0)
                        out << "T: " << u1 << ' ' << u2 << " : " << x << " : "
                            << y << " : " << num(t_at(x, u1, u2, y)) << "\n";
    for (int u1 = 0; u1 < u1n; ++u1)
        for (int u2 = 0; u2 < u2n; ++u2)
            for (int y = 0; y < n; ++y)
                for (int z1 = 0; z1 < z1n; ++z1)
                    for (int z2 = 0; z2 < z2n; ++z2)
                        if (o_at(u1, u2, y, z1, z2) != 0.0)
                            out << "O: " << u1 << ' ' << u2 << " : " << y
                                << " : " << z1 << ' ' << z2 << " : "
                                << num(o_at(u1, u2, y, z1, z2)) << "\n";
    for (int u1 = 0; u1 < u1n; ++u1)
        for (int u2 = 0; u2 < u2n; ++u2)
            for (int x = 0; x < n; ++x)
                if (g.r(x, u1, u2) != 0.0)
                    out << "R: " << u1 << ' ' << u2 << " : " << x
                        << " : * : * : " << num(g.r(x, u1, u2)) << "\n";
    return out.str();
}

} // namespace posg
