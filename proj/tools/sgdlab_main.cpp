#include <CLI11.hpp>

#include <cstdint>
#include <string>

#include "sgdlab/experiments.hpp"
#include "sgdlab/report.hpp"

int main(int argc, char** argv) {
    CLI::App app{"numerical laboratory for SGD/SGLD escape dynamics"};
    app.set_version_flag("--version", std::string(sgdlab::kToolVersion));
    app.require_subcommand(1);

    const char* names[] = {"noise-hist", "cov-fit", "escape-sweep", "theory-table", "occupancy"};
    const char* descs[] = {
        "gradient-noise norm histograms vs Gaussian and alpha-stable baselines",
        "gradient-noise covariance vs Hessian in the Hessian eigenbasis",
        "repeated escape trials over a hyperparameter grid with a scaling-law fit",
        "closed-form escape-time predictions",
        "long-run two-valley residence fractions vs escape-time prediction",
    };

    struct SubArgs {
        std::string config;
        std::string out;
        std::uint64_t seed = 0;
        bool seed_set = false;
        int workers = 1;
        bool dry_run = false;
    };
    SubArgs args[5];

    for (int i = 0; i < 5; ++i) {
        CLI::App* sub = app.add_subcommand(names[i], descs[i]);
        sub->add_option("--config", args[i].config, "experiment config file (JSON)")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--out", args[i].out, "output directory (overrides config)");
        sub->add_option("--seed", args[i].seed, "root seed (overrides config)")
            ->trigger_on_parse()
            ->each([&args, i](const std::string&) { args[i].seed_set = true; });
        sub->add_option("--workers", args[i].workers, "worker thread count")
            ->check(CLI::PositiveNumber);
        sub->add_flag("--dry-run", args[i].dry_run,
                      "validate and print the resolved config without computing");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : sgdlab::kExitConfig;
    }

    for (int i = 0; i < 5; ++i) {
        if (!app.get_subcommand(names[i])->parsed()) continue;
        sgdlab::RunOptions opts;
        opts.config_path = args[i].config;
        if (!args[i].out.empty()) opts.out_dir = args[i].out;
        if (args[i].seed_set) opts.seed = args[i].seed;
        opts.workers = args[i].workers;
        opts.dry_run = args[i].dry_run;
        return sgdlab::run_experiment(names[i], opts);
    }
    return sgdlab::kExitConfig;
}
