#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace sgdlab {

struct RunOptions {
    std::string config_path;
    std::optional<std::string> out_dir;   // overrides config output_dir
    std::optional<std::uint64_t> seed;    // overrides config seed
    int workers = 1;
    bool dry_run = false;
};

// Exit codes shared by the CLI: 0 ok, 2 config error, 3 numerical failure,
// 4 insufficient data.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitInsufficient = 4;

// Runs one experiment subcommand (noise-hist, cov-fit, escape-sweep,
// theory-table, occupancy) from a JSON config file; writes results.csv,
// summary.json and plot.svg into the output directory. Returns an exit code
// and reports diagnostics on stderr.
int run_experiment(const std::string& subcommand, const RunOptions& options);

}  // namespace sgdlab
