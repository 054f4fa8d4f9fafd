#include <doctest.h>

#include <cstdlib>
#include <sys/wait.h>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "sgdlab/report.hpp"

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    REQUIRE(f.good());
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
    fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    REQUIRE(f.good());
    f << text;
}

struct CliRun {
    int exit_code;
    std::string err;
};

CliRun run_cli(const std::string& args, const fs::path& dir) {
    const fs::path errfile = dir / "stderr.txt";
    const std::string cmd =
        std::string(SGDLAB_CLI_PATH) + " " + args + " 2>" + errfile.string();
    const int status = std::system(cmd.c_str());
    CliRun r;
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = fs::exists(errfile) ? slurp(errfile) : "";
    return r;
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::path("cli_test_tmp") / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const char* kSweepConfig = R"({
  "experiment": "escape-sweep",
  "seed": 7,
  "landscape": {"type": "styblinski-tang", "dim": 1},
  "dynamics": {"stepper": "sgld", "eta": 0.01, "diffusion": 9.8},
  "protocol": {"start": "st-minimum", "region_radius": 3.0602, "max_iters": 2000000},
  "sweep": {"variable": "diffusion_D", "grid": [7.872, 9.84, 13.12], "trials": 12}
})";

}  // namespace

TEST_CASE("escape-sweep replays byte-identically") {
    const fs::path dir = fresh_dir("replay");
    spit(dir / "config.json", kSweepConfig);

    const CliRun r1 = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                  " --out " + (dir / "out1").string() + " --workers 2",
                              dir);
    REQUIRE(r1.exit_code == 0);
    const CliRun r2 = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                  " --out " + (dir / "out2").string() + " --workers 1",
                              dir);
    REQUIRE(r2.exit_code == 0);

    CHECK(slurp(dir / "out1/results.csv") == slurp(dir / "out2/results.csv"));

    // summary.json differs only in the output_dir echo; compare after masking
    std::string s1 = slurp(dir / "out1/summary.json");
    std::string s2 = slurp(dir / "out2/summary.json");
    const auto scrub = [](std::string s, const std::string& what) {
        for (std::size_t pos = s.find(what); pos != std::string::npos; pos = s.find(what))
            s.erase(pos, what.size());
        return s;
    };
    s1 = scrub(scrub(s1, "out1"), "\"workers\": 2");
    s2 = scrub(scrub(s2, "out2"), "\"workers\": 1");
    CHECK(s1 == s2);

    CHECK(fs::exists(dir / "out1/plot.svg"));
    const std::string csv = slurp(dir / "out1/results.csv");
    CHECK(csv.substr(0, csv.find('\n')) ==
          "x_raw,x_transformed,gamma_hat,ci_low,ci_high,neg_log_gamma,censored_count");
}

TEST_CASE("identical seeds give identical artifacts across output dirs") {
    const fs::path dir = fresh_dir("seedswap");
    spit(dir / "config.json", kSweepConfig);
    const CliRun r1 = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                  " --out " + (dir / "a").string() + " --seed 99",
                              dir);
    const CliRun r2 = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                  " --out " + (dir / "b").string() + " --seed 99",
                              dir);
    REQUIRE(r1.exit_code == 0);
    REQUIRE(r2.exit_code == 0);
    CHECK(slurp(dir / "a/results.csv") == slurp(dir / "b/results.csv"));

    const CliRun r3 = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                  " --out " + (dir / "c").string() + " --seed 100",
                              dir);
    REQUIRE(r3.exit_code == 0);
    CHECK(slurp(dir / "a/results.csv") != slurp(dir / "c/results.csv"));
}

TEST_CASE("theory-table emits the closed-form styblinski-tang row") {
    const fs::path dir = fresh_dir("theory");
    spit(dir / "config.json", R"({
  "experiment": "theory-table",
  "seed": 1,
  "geometry": {"source": "styblinski-tang", "dim": 1},
  "sgld": {"diffusion": [20.0]},
  "sgd": {"eta": 0.1, "batch_sizes": [1], "s": 0.5}
})");
    const CliRun r = run_cli("theory-table --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string(),
                             dir);
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "out/results.csv");
    // find the sgld row and check tau ~ 1.921
    std::istringstream lines(csv);
    std::string line;
    bool found = false;
    while (std::getline(lines, line)) {
        if (line.rfind("sgld,", 0) != 0) continue;
        // method,k,parameter,value,barrier,tau,exponent,low_temperature
        std::istringstream cells(line);
        std::string cell;
        for (int i = 0; i < 6 && std::getline(cells, cell, ','); ++i) {}
        const double tau = std::stod(cell);
        CHECK(tau == doctest::Approx(1.921).epsilon(0.01 / 1.921));
        found = true;
    }
    CHECK(found);
}

TEST_CASE("noise-hist writes histogram series and tail statistics") {
    const fs::path dir = fresh_dir("noisehist");
    spit(dir / "config.json", R"({
  "experiment": "noise-hist",
  "seed": 5,
  "landscape": {"type": "mlp", "dataset": {"samples": 400, "input_dim": 4, "seed": 7},
                "width": 5, "depth": 2, "activation": "relu"},
  "probe": {"constant": 0.1, "jitter": 0.01},
  "batch_size": 16,
  "draws": 400,
  "bins": 20
})");
    const CliRun r = run_cli("noise-hist --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string(),
                             dir);
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "out/results.csv");
    CHECK(csv.find("sgn,") != std::string::npos);
    CHECK(csv.find("gaussian,") != std::string::npos);
    CHECK(csv.find("levy,") != std::string::npos);
    const std::string summary = slurp(dir / "out/summary.json");
    CHECK(summary.find("max_over_median") != std::string::npos);
    CHECK(fs::exists(dir / "out/plot.svg"));
}

TEST_CASE("cov-fit reports the eigenbasis fit and the 1/B trace law") {
    const fs::path dir = fresh_dir("covfit");
    spit(dir / "config.json", R"({
  "experiment": "cov-fit",
  "seed": 5,
  "landscape": {"type": "logistic", "dataset": {"samples": 400, "input_dim": 12, "seed": 5}},
  "pretrain": {"eta": 1.5, "grad_tol": 1e-4, "max_iters": 100000},
  "batch_size": 4,
  "draws": 4000,
  "trace_batch_sizes": [1, 2, 4],
  "trace_draws": 2000
})");
    const CliRun r = run_cli("cov-fit --config " + (dir / "config.json").string() + " --out " +
                                 (dir / "out").string(),
                             dir);
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "out/results.csv");
    CHECK(csv.rfind("h_element,c_element,h_over_b\n", 0) == 0);
    const std::string summary = slurp(dir / "out/summary.json");
    CHECK(summary.find("\"pearson\"") != std::string::npos);
    CHECK(summary.find("trace_fit") != std::string::npos);
    CHECK(summary.find("residual_grad_norm") != std::string::npos);
}

TEST_CASE("occupancy reports fractions against the sojourn prediction") {
    const fs::path dir = fresh_dir("occupancy");
    spit(dir / "config.json", R"({
  "experiment": "occupancy",
  "seed": 9,
  "landscape": {"type": "double-well", "h": 1.0, "tilt": 0.2},
  "dynamics": {"stepper": "sgld", "eta": 0.002, "diffusion": 0.4},
  "region_a": {"center": [-1.0], "radius": 0.55},
  "region_b": {"center": [1.0], "radius": 0.55},
  "total_iters": 400000
})");
    const CliRun r = run_cli("occupancy --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string(),
                             dir);
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "out/results.csv");
    CHECK(csv.rfind("valley,fraction,predicted,mean_sojourn_time,transitions,low_confidence\n",
                    0) == 0);
    CHECK(fs::exists(dir / "out/plot.svg"));
}

TEST_CASE("malformed config values exit with code 2 and name the field") {
    const fs::path dir = fresh_dir("badcfg");
    spit(dir / "config.json", R"({
  "experiment": "escape-sweep",
  "seed": 7,
  "landscape": {"type": "styblinski-tang", "dim": 1},
  "dynamics": {"stepper": "sgld", "eta": -0.01, "diffusion": 9.8},
  "protocol": {"start": "st-minimum", "region_radius": 3.0},
  "sweep": {"variable": "diffusion_D", "grid": [8.0, 9.0, 10.0], "trials": 12}
})");
    const CliRun r = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string(),
                             dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("eta") != std::string::npos);
}

TEST_CASE("unknown config keys are rejected") {
    const fs::path dir = fresh_dir("unknownkey");
    spit(dir / "config.json", R"({
  "experiment": "escape-sweep",
  "seed": 7,
  "landscape": {"type": "styblinski-tang", "dim": 1, "wobble": 3},
  "dynamics": {"stepper": "sgld", "eta": 0.01, "diffusion": 9.8},
  "protocol": {"start": "st-minimum", "region_radius": 3.0},
  "sweep": {"variable": "diffusion_D", "grid": [8.0, 9.0, 10.0], "trials": 12}
})");
    const CliRun r = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string(),
                             dir);
    CHECK(r.exit_code == 2);
    CHECK(r.err.find("wobble") != std::string::npos);
}

TEST_CASE("insufficient escapes exit with code 4") {
    const fs::path dir = fresh_dir("insufficient");
    spit(dir / "config.json", R"({
  "experiment": "escape-sweep",
  "seed": 7,
  "landscape": {"type": "quadratic", "diag": [1.0]},
  "dynamics": {"stepper": "sgld", "eta": 0.01, "diffusion": 0.0},
  "protocol": {"start": "zeros", "region_radius": 5.0, "max_iters": 200},
  "sweep": {"variable": "diffusion_D", "grid": [1e-8, 2e-8, 3e-8], "trials": 10}
})");
    const CliRun r = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string(),
                             dir);
    CHECK(r.exit_code == 4);
}

TEST_CASE("dry run validates without writing artifacts") {
    const fs::path dir = fresh_dir("dryrun");
    spit(dir / "config.json", kSweepConfig);
    const CliRun r = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string() + " --dry-run",
                             dir);
    CHECK(r.exit_code == 0);
    CHECK(!fs::exists(dir / "out/results.csv"));
}

TEST_CASE("resolved defaults appear explicitly in the summary") {
    const fs::path dir = fresh_dir("echo");
    // max_iters, sampling mode, trials, and label_rule are all left to default
    spit(dir / "config.json", R"({
  "experiment": "escape-sweep",
  "seed": 7,
  "landscape": {"type": "shifted-styblinski-tang", "dim": 1,
                "dataset": {"samples": 60, "input_dim": 1}},
  "dynamics": {"stepper": "sgd", "eta": 0.01},
  "protocol": {"start": "st-minimum", "region_radius": 3.0602},
  "sweep": {"variable": "eta", "grid": [0.009, 0.01, 0.011]}
})");
    const CliRun r = run_cli("escape-sweep --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string() + " --workers 2",
                             dir);
    REQUIRE(r.exit_code == 0);
    const std::string summary = slurp(dir / "out/summary.json");
    CHECK(summary.find("\"max_iters\": 10000000") != std::string::npos);
    CHECK(summary.find("\"sampling\": \"with-replacement\"") != std::string::npos);
    CHECK(summary.find("\"trials\": 100") != std::string::npos);
    CHECK(summary.find("\"label_rule\": \"random-binary\"") != std::string::npos);
    CHECK(summary.find("\"batch_size\": 1") != std::string::npos);
    CHECK(summary.find("\"seed\": 0") != std::string::npos);  // dataset seed default
}

TEST_CASE("pretraining failure exits with the numerical-failure code") {
    const fs::path dir = fresh_dir("exit3");
    spit(dir / "config.json", R"({
  "experiment": "cov-fit",
  "seed": 5,
  "landscape": {"type": "logistic", "dataset": {"samples": 100, "input_dim": 6, "seed": 5}},
  "pretrain": {"eta": 0.001, "grad_tol": 1e-12, "max_iters": 3},
  "batch_size": 2,
  "draws": 200
})");
    const CliRun r = run_cli("cov-fit --config " + (dir / "config.json").string() + " --out " +
                                 (dir / "out").string(),
                             dir);
    CHECK(r.exit_code == 3);
}

TEST_CASE("theory-table accepts explicit geometry") {
    const fs::path dir = fresh_dir("explicitgeo");
    spit(dir / "config.json", R"({
  "experiment": "theory-table",
  "seed": 1,
  "geometry": {"source": "explicit",
               "valley": {"loss": -10.0, "eigs": [3.7], "escape_eig": 3.7},
               "saddle": {"loss": -2.0, "eigs": [-1.9], "escape_eig": -1.9}},
  "sgld": {"diffusion": [1.1]}
})");
    const CliRun r = run_cli("theory-table --config " + (dir / "config.json").string() +
                                 " --out " + (dir / "out").string(),
                             dir);
    REQUIRE(r.exit_code == 0);
    const std::string csv = slurp(dir / "out/results.csv");
    // tau = 2 pi / sqrt(3.7 * 1.9) exp(8 / 1.1) ~ 3413.6
    CHECK(csv.find("sgld,") != std::string::npos);
    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // header
    std::getline(lines, line);
    std::istringstream cells(line);
    std::string cell;
    for (int i = 0; i < 6 && std::getline(cells, cell, ','); ++i) {}
    CHECK(std::stod(cell) == doctest::Approx(3413.56).epsilon(0.001));
}

TEST_CASE("missing config file exits with code 2") {
    const fs::path dir = fresh_dir("missing");
    const CliRun r = run_cli("escape-sweep --config " + (dir / "nope.json").string(), dir);
    CHECK(r.exit_code == 2);
}

TEST_CASE("svg renderer basics") {
    using namespace sgdlab;
    std::vector<PlotPoint> two{{0.0, 1.0, 0.9, 1.1, false}, {1.0, 2.0, 1.9, 2.1, false}};
    FitResult fit;
    fit.slope = 1.0;
    fit.intercept = 1.0;
    fit.pearson = 1.0;
    PlotStyle style{"1/k", "-log gamma", "test"};
    const std::string svg = render_fit_plot(two, &fit, style);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("r = 1") != std::string::npos);
    CHECK(svg.find("1/k") != std::string::npos);
    CHECK_THROWS_AS(render_fit_plot(std::vector<PlotPoint>{{0, 0, 0, 0, false}}, &fit, style),
                    std::invalid_argument);

    // degenerate range: all y equal; padding keeps the viewport nonempty
    std::vector<PlotPoint> flat{{0.0, 2.0, 2.0, 2.0, false}, {1.0, 2.0, 2.0, 2.0, false}};
    const std::string svg2 = render_fit_plot(flat, nullptr, style);
    CHECK(svg2.find("<svg") != std::string::npos);

    // flagged points trigger the warning annotation
    std::vector<PlotPoint> with_flag{
        {0.0, 1.0, 1.0, 1.0, false}, {0.5, 0.0, 0.0, 0.0, true}, {1.0, 2.0, 2.0, 2.0, false}};
    const std::string svg3 = render_fit_plot(with_flag, nullptr, style);
    CHECK(svg3.find("warning") != std::string::npos);
}

TEST_CASE("format_double round-trips") {
    using namespace sgdlab;
    for (double v : {0.1, 1.0 / 3.0, 9.80665e8, -2.903534, 1e-300}) {
        CHECK(std::stod(format_double(v)) == v);
    }
}
