// emdcp: approximate Earth Mover's Distance via closest-pair sampling.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "cpemd/cli.hpp"

int main(int argc, char** argv) {
    CLI::App app{"approximate Earth Mover's Distance toolkit"};
    app.require_subcommand(1);

    cpemd::RunConfig cfg;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--eps", cfg.eps, "accuracy parameter, in (0, 0.5)");
        sub->add_option("--phi", cfg.phi_exp, "closest-pair speedup exponent, in (0, 1)");
        sub->add_option("--seed", cfg.seed, "64-bit master seed");
        sub->add_option("--mode", cfg.mode, "practical | faithful");
        sub->add_option("--oracle", cfg.oracle, "brute | grid");
        sub->add_option("--x", cfg.x_path, "X point file");
        sub->add_option("--y", cfg.y_path, "Y point file");
        sub->add_option("--b", cfg.b_path, "supply/demand file (one integer per line)");
        sub->add_option("--out", cfg.out_path, "write the JSON report here");
        sub->add_option("--trials", cfg.trials, "benchmark trials");
        sub->add_option("--relax", cfg.relax, "practical-mode relaxation divisor (>= 1)");
        sub->add_option("--count", cfg.count, "sample count for the sample command");
        sub->add_option("--dual-range", cfg.dual_range,
                        "draw random duals in [-R, R] for the sample command");
        sub->add_option("--prefix", cfg.prefix,
                        "close-pair structure source for the sampler: exact | cp");
        sub->add_flag("--timings", cfg.timings, "embed wall-clock timings in the report");
    };

    for (const char* name :
         {"exact", "tree", "approx", "closepairs", "sample", "bench", "selftest"})
        add_common(app.add_subcommand(name));

    CLI11_PARSE(app, argc, argv);
    cfg.command = app.get_subcommands().front()->get_name();

    auto res = cpemd::run_command(cfg);
    std::string text = res.report.dump(2);
    if (!cfg.out_path.empty()) {
        std::ofstream out(cfg.out_path);
        if (!out) {
            std::cerr << "cannot write " << cfg.out_path << "\n";
            return 2;
        }
        out << text << "\n";
    } else {
        std::cout << text << "\n";
    }
    return res.exit_code;
}
