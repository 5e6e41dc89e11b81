#pragma once

#include <json.hpp>

#include "io.hpp"
#include "mwu.hpp"
#include "selfcheck.hpp"

namespace cpemd {

// ---------------------------------------------------------------------------
// Command surface shared by the binary and the tests. Reports are
// deterministic for a fixed (config, seed): nlohmann's default object keeps
// keys sorted, and wall-clock timings are only embedded when requested
// (benchmarks always request them).
// ---------------------------------------------------------------------------

struct RunConfig {
    std::string command;
    double eps = 0.25;
    double phi_exp = 0.5;
    std::uint64_t seed = 1;
    std::string mode = "practical";
    std::string oracle = "brute";
    std::string x_path, y_path, b_path, out_path;
    int trials = 10;
    double relax = 1.0;
    std::size_t count = 200000;
    long long dual_range = 0;
    bool timings = false;
    std::string prefix = "exact";  // close-pair structure source: exact | cp

    void validate() const {
        if (!(eps > 0.0 && eps < 0.5)) throw input_error("--eps must lie in (0, 0.5)");
        if (!(phi_exp > 0.0 && phi_exp < 1.0)) throw input_error("--phi must lie in (0, 1)");
        if (mode != "practical" && mode != "faithful")
            throw input_error("--mode must be 'practical' or 'faithful'");
        if (oracle != "brute" && oracle != "grid")
            throw input_error("--oracle must be 'brute' or 'grid'");
        if (trials < 1) throw input_error("--trials must be positive");
        if (relax < 1.0) throw input_error("--relax must be >= 1");
        if (prefix != "exact" && prefix != "cp")
            throw input_error("--prefix must be 'exact' or 'cp'");
    }
};

struct CommandResult {
    int exit_code = 0;
    nlohmann::json report;
};

namespace cli_detail {

inline nlohmann::json config_json(const RunConfig& c) {
    return {{"command", c.command}, {"eps", c.eps},       {"phi_exp", c.phi_exp},
            {"seed", c.seed},       {"mode", c.mode},     {"oracle", c.oracle},
            {"x", c.x_path},        {"y", c.y_path},      {"b", c.b_path},
            {"trials", c.trials},   {"relax", c.relax},   {"count", c.count},
            {"dual_range", c.dual_range}, {"prefix", c.prefix}};
}

inline nlohmann::json params_json(const MwuParams& p) {
    return {{"mode", p.mode},
            {"eps", p.eps},
            {"phi_exp", p.phi_exp},
            {"h", p.h},
            {"d_lower", p.d_lower},
            {"d_upper", p.d_upper},
            {"d_tree", p.d_tree},
            {"gamma_gap", p.gamma_gap},
            {"k_bound", p.k_bound},
            {"eta", p.eta},
            {"chi", p.chi},
            {"delta", p.delta},
            {"rounds_formula", p.rounds},
            {"samples_formula", p.samples},
            {"rounds_op", p.rounds_op},
            {"samples_op", p.samples_op},
            {"chi_op", p.chi_op},
            {"eta_op", p.eta_op}};
}

inline std::pair<PointSet, PointSet> load_xy(const RunConfig& cfg) {
    if (cfg.x_path.empty() || cfg.y_path.empty())
        throw input_error(cfg.command + " requires --x and --y point files");
    auto X = load_points(cfg.x_path);
    auto Y = load_points(cfg.y_path);
    if (X.dim != Y.dim) throw input_error("--x and --y dimensions differ");
    double phi = std::max(X.phi, Y.phi);
    X.phi = Y.phi = phi;
    return {std::move(X), std::move(Y)};
}

inline PointSet union_points(const PointSet& X, const PointSet& Y) {
    PointSet U = X;
    for (std::size_t j = 0; j < Y.size(); ++j) U.push_back(Y.point(j));
    U.phi = std::max(X.phi, Y.phi);
    return U;
}

inline nlohmann::json cmd_exact(const RunConfig& cfg) {
    if (!cfg.b_path.empty()) {
        if (cfg.x_path.empty()) throw input_error("exact with --b requires --x");
        auto X = load_points(cfg.x_path);
        auto b = load_supply(cfg.b_path);
        if (b.size() != X.size()) throw input_error("--b length must match --x point count");
        auto sol = exact_emd_supply(X, b);
        return {{"emd", sol.cost}, {"flow_arcs", sol.flow.size()}};
    }
    auto [X, Y] = load_xy(cfg);
    if (X.size() != Y.size()) throw input_error("exact requires |X| = |Y|");
    return {{"emd", exact_emd(X, Y)}};
}

inline nlohmann::json cmd_tree(const RunConfig& cfg) {
    auto [X, Y] = load_xy(cfg);
    auto U = union_points(X, Y);
    auto inst = embed_and_perturb(U, cfg.eps, derive_seed(cfg.seed, 0x7321));
    double max_ratio = 0.0, min_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < U.size(); ++i)
        for (std::size_t j = i + 1; j < U.size(); ++j) {
            double d = l1_distance(inst.Y.point(i), inst.Y.point(j));
            if (d <= 0.0) continue;
            double r = inst.tree.distance(i, j) / d;
            max_ratio = std::max(max_ratio, r);
            min_ratio = std::min(min_ratio, r);
        }
    nlohmann::json out{{"phi", inst.tree.phi},
                       {"height", inst.tree.height},
                       {"d_prime", inst.d_prime},
                       {"eps_inner", inst.eps_inner},
                       {"distortion_min", min_ratio},
                       {"distortion_max", max_ratio}};
    if (X.size() == Y.size()) out["t0"] = greedy_tree_bound(inst.tree, X.size());
    return out;
}

inline SolverConfig solver_config(const RunConfig& cfg, std::unique_ptr<CpOracle>& oracle) {
    SolverConfig sc;
    sc.mode = cfg.mode;
    sc.relax = cfg.relax;
    oracle = make_oracle(cfg.oracle);
    sc.oracle = oracle.get();
    sc.prefix_via_oracle = cfg.prefix == "cp";
    return sc;
}

inline nlohmann::json cmd_approx(const RunConfig& cfg, nlohmann::json& diagnostics) {
    auto [X, Y] = load_xy(cfg);
    if (X.size() != Y.size()) throw input_error("approx requires |X| = |Y|");
    std::unique_ptr<CpOracle> oracle;
    auto sc = solver_config(cfg, oracle);
    auto res = approximate_emd(X, Y, cfg.eps, cfg.phi_exp, sc, cfg.seed);
    nlohmann::json parts = nlohmann::json::array();
    for (auto& p : res.parts) {
        parts.push_back({{"points", p.points},
                         {"scale", p.scale},
                         {"t_lo", p.t_lo},
                         {"t_hi", p.t_hi},
                         {"t_fail", p.t_fail},
                         {"best_certified", p.best_certified},
                         {"estimate", p.estimate},
                         {"searches", p.searches}});
        for (auto& d : p.diag) {
            if (diagnostics.size() >= 200) break;
            diagnostics.push_back({{"round", d.round},
                                   {"t", d.t},
                                   {"level", d.level},
                                   {"gap", d.gap},
                                   {"flow_cost", d.flow_cost},
                                   {"residual", d.residual},
                                   {"samples", d.samples},
                                   {"failed", d.failed},
                                   {"verified", d.verified}});
        }
    }
    nlohmann::json out{{"value", res.value}, {"parts", parts},
                       {"params", params_json(res.params)}};
    if (X.size() <= 64) {
        double exact = exact_emd(X, Y);
        out["exact"] = exact;
        out["ratio"] = exact > 0.0 ? res.value / exact : (res.value == 0.0 ? 1.0 : 0.0);
    }
    return out;
}

inline nlohmann::json cmd_closepairs(const RunConfig& cfg) {
    auto [X, Y] = load_xy(cfg);
    if (X.size() != Y.size()) throw input_error("closepairs requires |X| = |Y|");
    auto oracle = make_oracle(cfg.oracle);
    auto res = find_close_pairs(*oracle, X, Y, cfg.phi_exp, cfg.eps, cfg.seed);
    nlohmann::json pairs = nlohmann::json::array();
    std::vector<std::uint64_t> keys(res.pairs.begin(), res.pairs.end());
    std::sort(keys.begin(), keys.end());
    for (auto key : keys) {
        if (pairs.size() >= 1000) break;
        auto [i, j] = key_pair(key);
        pairs.push_back({i, j});
    }
    return {{"t", res.t},
            {"pair_count", res.pairs.size()},
            {"pairs", pairs},
            {"frequent", res.frequent}};
}

inline nlohmann::json cmd_sample(const RunConfig& cfg) {
    auto [X, Y] = load_xy(cfg);
    if (X.size() != Y.size()) throw input_error("sample requires |X| = |Y|");
    const std::size_t n = X.size();
    RoundingState rounding(X, Y, cfg.eps);
    auto S = draw_rounding_set(n, cfg.phi_exp, derive_seed(cfg.seed, 0x5a));
    rounding.set_down_set(S);
    DualState duals;
    duals.chi = std::max(cfg.eps, 1.0 / 64.0);
    Rng rng(derive_seed(cfg.seed, 0xd0a1));
    for (std::size_t i = 0; i < n; ++i) {
        duals.alpha.push_back(cfg.dual_range > 0 ? rng.range(-cfg.dual_range, cfg.dual_range)
                                                 : 0);
        duals.beta.push_back(cfg.dual_range > 0 ? rng.range(-cfg.dual_range, cfg.dual_range)
                                                : 0);
    }
    ArbitrarySamplerConfig acfg;
    acfg.eta = 1.0;
    acfg.phi_exp = cfg.phi_exp;
    ArbitrarySampler sampler(X, Y, rounding, S, duals, acfg, derive_seed(cfg.seed, 0x5a2));
    auto samples = sampler.draw(cfg.count, derive_seed(cfg.seed, 0x5a3));

    nlohmann::json first = nlohmann::json::array();
    for (std::size_t k = 0; k < std::min<std::size_t>(50, samples.size()); ++k)
        first.push_back({samples[k].i, samples[k].j, samples[k].sigma});
    nlohmann::json out{{"count", samples.size()},
                       {"rectangles", sampler.partition().rects.size()},
                       {"leftover_pairs", sampler.partition().leftover.size()},
                       {"first_samples", first}};

    if (n <= 64) {
        RoundedDuals rd(duals);
        std::vector C(n, std::vector<double>(n, 0.0));
        std::vector D(n, std::vector<double>(n, 0.0));
        std::vector P(n, std::vector<int>(n, 1));
        for (std::uint32_t i = 0; i < n; ++i)
            for (std::uint32_t j = 0; j < n; ++j) {
                C[i][j] = rounding.cost(i, j);
                D[i][j] = rd.rounded(i, j);
                P[i][j] = rd.sign(i, j);
            }
        auto tab = explicit_lambda(acfg.eta, C, D, P);
        std::vector<std::size_t> counts(n * n * 2, 0);
        for (auto& s : samples)
            counts[(static_cast<std::size_t>(s.i) * n + s.j) * 2 + (s.sigma < 0 ? 1 : 0)]++;
        double tv = 0.0;
        for (std::size_t k = 0; k < counts.size(); ++k)
            tv += std::abs(static_cast<double>(counts[k]) / samples.size() - tab.prob[k]);
        out["tv_vs_explicit"] = 0.5 * tv;
        if (cfg.dual_range == 0) {
            std::vector<double> probs(counts.size(), 1.0 / (2.0 * n * n));
            out["chi2_uniform_p"] = chi_squared_uniformity_pvalue(counts, probs);
        }
    }
    return out;
}

inline nlohmann::json cmd_bench(const RunConfig& cfg, nlohmann::json& timings) {
    nlohmann::json out;
    if (!cfg.x_path.empty()) {
        // accuracy/runtime table over seeds
        auto [X, Y] = load_xy(cfg);
        if (X.size() != Y.size()) throw input_error("bench requires |X| = |Y|");
        double exact = X.size() <= 128 ? exact_emd(X, Y) : 0.0;
        nlohmann::json rows = nlohmann::json::array();
        int in_window = 0;
        for (int trial = 0; trial < cfg.trials; ++trial) {
            std::unique_ptr<CpOracle> oracle;
            auto sc = solver_config(cfg, oracle);
            auto start = std::chrono::steady_clock::now();
            auto res = approximate_emd(X, Y, cfg.eps, cfg.phi_exp, sc,
                                       derive_seed(cfg.seed, 0xbe, trial));
            double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
            nlohmann::json row{{"trial", trial}, {"value", res.value}};
            if (exact > 0.0) {
                row["ratio"] = res.value / exact;
                double r = res.value / exact;
                if (r >= 1.0 / (1.0 + 5.0 * cfg.eps) && r <= 1.0 + 5.0 * cfg.eps) in_window++;
            }
            row["seconds"] = secs;
            rows.push_back(std::move(row));
        }
        out["rows"] = rows;
        if (exact > 0.0) {
            out["exact"] = exact;
            out["in_window"] = in_window;
        }
    } else {
        // FindClosePairs scaling study on synthetic instances
        auto oracle = make_oracle(cfg.oracle);
        FindClosePairsParams timing_params;
        timing_params.k1 = 2.0;
        timing_params.k2 = 8.0;
        std::vector<double> ns, times;
        nlohmann::json rows = nlohmann::json::array();
        for (std::size_t n : {256, 512, 1024}) {
            Rng rng(derive_seed(cfg.seed, 0xbf, n));
            std::set<std::vector<double>> seen;
            PointSet X(8, 65536.0), Y(8, 65536.0);
            std::vector<double> p(8);
            auto draw = [&](PointSet& out_ps) {
                for (;;) {
                    for (int k = 0; k < 8; ++k)
                        p[k] = static_cast<double>(1 + rng.below(65536));
                    if (seen.insert(p).second) {
                        out_ps.push_back(p);
                        return;
                    }
                }
            };
            for (std::size_t i = 0; i < n; ++i) draw(X);
            for (std::size_t i = 0; i < n; ++i) draw(Y);
            auto start = std::chrono::steady_clock::now();
            auto res = find_close_pairs(*oracle, X, Y, cfg.phi_exp, cfg.eps,
                                        derive_seed(cfg.seed, 0xc0, n), timing_params);
            double secs =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
            ns.push_back(static_cast<double>(n));
            times.push_back(std::max(secs, 1e-4));
            rows.push_back({{"n", n}, {"seconds", secs}, {"pairs", res.pairs.size()}});
        }
        out["rows"] = rows;
        out["fitted_exponent"] = fit_log_log_slope(ns, times);
        out["subquadratic"] = out["fitted_exponent"].get<double>() <= 1.9;
    }
    timings["bench_included"] = true;
    return out;
}

inline nlohmann::json cmd_selftest(const RunConfig& cfg, int& exit_code) {
    auto results = selfcheck::run_all(cfg.seed);
    nlohmann::json rows = nlohmann::json::array();
    bool all_pass = true;
    for (auto& r : results) {
        rows.push_back({{"id", r.id},
                        {"name", r.name},
                        {"pass", r.pass},
                        {"advisory", r.advisory},
                        {"details", r.details}});
        if (!r.pass && !r.advisory) all_pass = false;
    }
    if (!all_pass) exit_code = 4;
    return {{"criteria", rows}, {"all_pass", all_pass}};
}

}  // namespace cli_detail

inline CommandResult run_command(const RunConfig& cfg) {
    CommandResult out;
    auto start = std::chrono::steady_clock::now();
    nlohmann::json diagnostics = nlohmann::json::array();
    nlohmann::json timings;
    try {
        cfg.validate();
        nlohmann::json result;
        bool force_timings = false;
        if (cfg.command == "exact") result = cli_detail::cmd_exact(cfg);
        else if (cfg.command == "tree") result = cli_detail::cmd_tree(cfg);
        else if (cfg.command == "approx") result = cli_detail::cmd_approx(cfg, diagnostics);
        else if (cfg.command == "closepairs") result = cli_detail::cmd_closepairs(cfg);
        else if (cfg.command == "sample") result = cli_detail::cmd_sample(cfg);
        else if (cfg.command == "bench") {
            result = cli_detail::cmd_bench(cfg, timings);
            force_timings = true;  // benchmark output is inherently timing data
        } else if (cfg.command == "selftest") {
            result = cli_detail::cmd_selftest(cfg, out.exit_code);
        } else {
            throw input_error("unknown command: " + cfg.command);
        }
        out.report = {{"schema", 1},
                      {"command", cfg.command},
                      {"config", cli_detail::config_json(cfg)},
                      {"result", result},
                      {"diagnostics", diagnostics}};
        if (cfg.timings || force_timings) {
            timings["total_seconds"] =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                    .count();
            out.report["timings"] = timings;
        }
    } catch (const input_error& e) {
        out.exit_code = 2;
        out.report = {{"schema", 1},
                      {"command", cfg.command},
                      {"error", {{"kind", "input"}, {"message", e.what()}}}};
    } catch (const std::exception& e) {
        out.exit_code = 3;
        out.report = {{"schema", 1},
                      {"command", cfg.command},
                      {"error", {{"kind", "run"}, {"message", e.what()}}}};
    }
    return out;
}

}  // namespace cpemd
