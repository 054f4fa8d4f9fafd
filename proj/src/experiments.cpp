#include "sgdlab/experiments.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include <json.hpp>

#include "sgdlab/dynamics.hpp"
#include "sgdlab/errors.hpp"
#include "sgdlab/escape_mc.hpp"
#include "sgdlab/kramers.hpp"
#include "sgdlab/landscapes.hpp"
#include "sgdlab/noise_lab.hpp"
#include "sgdlab/report.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/stats.hpp"

namespace sgdlab {

namespace {

using json = nlohmann::ordered_json;

struct config_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Strict object reader: every key must be consumed, unknown keys are
// rejected with the JSON path in the message.
class Checker {
public:
    Checker(const json& node, std::string path) : node_(node), path_(std::move(path)) {
        if (!node_.is_object()) throw config_error(path_ + ": expected an object");
    }

    const json* find(const std::string& key) {
        seen_.insert(key);
        auto it = node_.find(key);
        return it == node_.end() ? nullptr : &*it;
    }

    const json& require(const std::string& key) {
        const json* j = find(key);
        if (!j) throw config_error(path_ + ": missing required field '" + key + "'");
        return *j;
    }

    double number(const std::string& key) {
        const json& j = require(key);
        if (!j.is_number()) throw config_error(path_ + "." + key + ": expected a number");
        return j.get<double>();
    }
    double number_or(const std::string& key, double fallback) {
        const json* j = find(key);
        if (!j) return fallback;
        if (!j->is_number()) throw config_error(path_ + "." + key + ": expected a number");
        return j->get<double>();
    }
    std::int64_t integer(const std::string& key) {
        const json& j = require(key);
        if (!j.is_number_integer()) throw config_error(path_ + "." + key + ": expected an integer");
        return j.get<std::int64_t>();
    }
    std::int64_t integer_or(const std::string& key, std::int64_t fallback) {
        const json* j = find(key);
        if (!j) return fallback;
        if (!j->is_number_integer()) throw config_error(path_ + "." + key + ": expected an integer");
        return j->get<std::int64_t>();
    }
    std::uint64_t uinteger_or(const std::string& key, std::uint64_t fallback) {
        const json* j = find(key);
        if (!j) return fallback;
        if (!j->is_number_unsigned() && !j->is_number_integer())
            throw config_error(path_ + "." + key + ": expected an unsigned integer");
        return j->get<std::uint64_t>();
    }
    std::string text(const std::string& key) {
        const json& j = require(key);
        if (!j.is_string()) throw config_error(path_ + "." + key + ": expected a string");
        return j.get<std::string>();
    }
    std::string text_or(const std::string& key, const std::string& fallback) {
        const json* j = find(key);
        if (!j) return fallback;
        if (!j->is_string()) throw config_error(path_ + "." + key + ": expected a string");
        return j->get<std::string>();
    }
    Vec number_list(const std::string& key) {
        const json& j = require(key);
        return as_number_list(j, path_ + "." + key);
    }
    std::optional<Vec> number_list_opt(const std::string& key) {
        const json* j = find(key);
        if (!j) return std::nullopt;
        return as_number_list(*j, path_ + "." + key);
    }

    static Vec as_number_list(const json& j, const std::string& path) {
        if (!j.is_array()) throw config_error(path + ": expected an array of numbers");
        Vec out;
        for (const auto& v : j) {
            if (!v.is_number()) throw config_error(path + ": expected an array of numbers");
            out.push_back(v.get<double>());
        }
        return out;
    }

    Checker object(const std::string& key) {
        return Checker(require(key), path_ + "." + key);
    }
    std::optional<Checker> object_opt(const std::string& key) {
        const json* j = find(key);
        if (!j) return std::nullopt;
        return Checker(*j, path_ + "." + key);
    }

    // call after all reads: rejects unexpected keys
    void finish() const {
        for (auto it = node_.begin(); it != node_.end(); ++it)
            if (!seen_.contains(it.key()))
                throw config_error(path_ + ": unknown key '" + it.key() + "'");
    }

    const std::string& path() const { return path_; }

private:
    const json& node_;
    std::string path_;
    std::set<std::string> seen_;
};

// ---------------------------------------------------------------------------
// landscape / start / dynamics parsing
// ---------------------------------------------------------------------------

DatasetSpec parse_dataset(Checker c, json& echo) {
    DatasetSpec spec;
    spec.samples = static_cast<int>(c.integer("samples"));
    spec.input_dim = static_cast<int>(c.integer("input_dim"));
    spec.seed = c.uinteger_or("seed", 0);
    spec.label_rule = c.text_or("label_rule", "random-binary");
    c.finish();
    if (spec.samples <= 0) throw config_error(c.path() + ".samples: must be positive");
    if (spec.input_dim <= 0) throw config_error(c.path() + ".input_dim: must be positive");
    echo = {{"samples", spec.samples},
            {"input_dim", spec.input_dim},
            {"seed", spec.seed},
            {"label_rule", spec.label_rule}};
    return spec;
}

struct ParsedLandscape {
    LandscapePtr landscape;
    std::string type;
    double k = 1.0;  // optional pre-applied sharpness
};

ParsedLandscape parse_landscape(Checker c, json& echo) {
    ParsedLandscape out;
    out.type = c.text("type");
    echo["type"] = out.type;
    if (out.type == "styblinski-tang") {
        const int dim = static_cast<int>(c.integer("dim"));
        echo["dim"] = dim;
        out.landscape = st_landscape(dim);
    } else if (out.type == "shifted-styblinski-tang") {
        const int dim = static_cast<int>(c.integer("dim"));
        echo["dim"] = dim;
        json ds_echo;
        const DatasetSpec ds = parse_dataset(c.object("dataset"), ds_echo);
        echo["dataset"] = ds_echo;
        out.landscape = shifted_st_landscape(dim, ds);
    } else if (out.type == "logistic") {
        json ds_echo;
        const DatasetSpec ds = parse_dataset(c.object("dataset"), ds_echo);
        echo["dataset"] = ds_echo;
        out.landscape = logistic_landscape(ds);
    } else if (out.type == "mlp") {
        json ds_echo;
        const DatasetSpec ds = parse_dataset(c.object("dataset"), ds_echo);
        const int width = static_cast<int>(c.integer_or("width", 10));
        const int depth = static_cast<int>(c.integer_or("depth", 3));
        const std::string act = c.text_or("activation", "relu");
        if (act != "relu" && act != "tanh")
            throw config_error(c.path() + ".activation: must be 'relu' or 'tanh'");
        echo["dataset"] = ds_echo;
        echo["width"] = width;
        echo["depth"] = depth;
        echo["activation"] = act;
        out.landscape = mlp_landscape(ds, width, depth,
                                      act == "relu" ? Activation::relu : Activation::tanh);
    } else if (out.type == "quadratic") {
        Vec diag = c.number_list("diag");
        echo["diag"] = diag;
        out.landscape = quadratic_landscape(std::move(diag));
    } else if (out.type == "double-well") {
        const double h = c.number_or("h", 1.0);
        const double tilt = c.number_or("tilt", 0.0);
        echo["h"] = h;
        echo["tilt"] = tilt;
        out.landscape = double_well_landscape(h, tilt);
    } else {
        throw config_error(c.path() + ".type: unknown landscape type '" + out.type + "'");
    }

    const double k = c.number_or("k", 1.0);
    if (k <= 0.0) throw config_error(c.path() + ".k: must be positive");
    echo["k"] = k;
    out.k = k;
    if (k != 1.0) out.landscape = rescale(out.landscape, k);
    c.finish();
    return out;
}

struct PretrainSpec {
    double eta = 0.5;
    double grad_tol = 1e-4;
    std::int64_t max_iters = 1'000'000;
};

PretrainSpec parse_pretrain(Checker c, json& echo) {
    PretrainSpec p;
    p.eta = c.number_or("eta", p.eta);
    p.grad_tol = c.number_or("grad_tol", p.grad_tol);
    p.max_iters = c.integer_or("max_iters", p.max_iters);
    c.finish();
    if (p.eta <= 0.0) throw config_error(c.path() + ".eta: must be positive");
    if (p.grad_tol <= 0.0) throw config_error(c.path() + ".grad_tol: must be positive");
    echo = {{"eta", p.eta}, {"grad_tol", p.grad_tol}, {"max_iters", p.max_iters}};
    return p;
}

// start: [numbers] | "zeros" | "st-minimum" | "pretrained"
//        | {"constant": v, "jitter": sd}
struct StartResolution {
    Vec theta;
    bool pretrained = false;
    double residual_grad_norm = 0.0;
    std::int64_t pretrain_iters = 0;
};

StartResolution resolve_start(const json& node, const std::string& path,
                              const Landscape& landscape, const PretrainSpec& pretrain,
                              std::uint64_t seed, json& echo) {
    const int n = landscape.dim();
    StartResolution res;
    if (node.is_array()) {
        res.theta = Checker::as_number_list(node, path);
        if (static_cast<int>(res.theta.size()) != n)
            throw config_error(path + ": start vector has wrong dimension");
        echo = node;
        return res;
    }
    if (node.is_string()) {
        const std::string s = node.get<std::string>();
        echo = s;
        if (s == "zeros") {
            res.theta.assign(n, 0.0);
            return res;
        }
        if (s == "st-minimum") {
            res.theta.assign(n, st::kMinimum);
            return res;
        }
        if (s == "pretrained") {
            Vec zero(n, 0.0);
            PretrainResult pr = pretrain_to_critical(landscape, std::move(zero), pretrain.eta,
                                                     pretrain.grad_tol, pretrain.max_iters);
            if (!pr.converged)
                throw numerical_error("pretraining did not reach grad_tol (residual " +
                                      format_double(pr.grad_norm) + ")");
            res.theta = std::move(pr.theta);
            res.pretrained = true;
            res.residual_grad_norm = pr.grad_norm;
            res.pretrain_iters = pr.iterations;
            return res;
        }
        throw config_error(path + ": unknown start kind '" + s + "'");
    }
    if (node.is_object()) {
        Checker c(node, path);
        const double value = c.number("constant");
        const double jitter = c.number_or("jitter", 0.0);
        c.finish();
        echo = {{"constant", value}, {"jitter", jitter}};
        res.theta.assign(n, value);
        if (jitter > 0.0) {
            RngStream rng(seed, /*idx_a=*/0x57a7ULL);
            for (double& t : res.theta) t += jitter * rng.normal();
        }
        return res;
    }
    throw config_error(path + ": expected array, string, or object");
}

StepperSpec parse_dynamics(Checker c, json& echo) {
    const std::string kind = c.text("stepper");
    echo["stepper"] = kind;
    if (kind == "sgd" || kind == "sgd-injected") {
        SgdConfig cfg;
        cfg.eta = c.number("eta");
        cfg.batch_size = static_cast<int>(c.integer_or("batch_size", 1));
        const std::string sampling = c.text_or("sampling", "with-replacement");
        if (sampling == "with-replacement")
            cfg.sampling = Sampling::with_replacement;
        else if (sampling == "without-replacement")
            cfg.sampling = Sampling::without_replacement;
        else
            throw config_error(c.path() + ".sampling: unknown mode '" + sampling + "'");
        if (cfg.eta <= 0.0) throw config_error(c.path() + ".eta: must be positive");
        if (cfg.batch_size < 1) throw config_error(c.path() + ".batch_size: must be >= 1");
        echo["eta"] = cfg.eta;
        echo["batch_size"] = cfg.batch_size;
        echo["sampling"] = sampling;
        if (kind == "sgd") {
            c.finish();
            return cfg;
        }
        SgdInjectedConfig mix;
        mix.sgd = cfg;
        mix.diffusion = c.number("diffusion");
        if (mix.diffusion < 0.0) throw config_error(c.path() + ".diffusion: must be >= 0");
        echo["diffusion"] = mix.diffusion;
        c.finish();
        return mix;
    }
    if (kind == "sgld") {
        SgldConfig cfg;
        cfg.eta = c.number("eta");
        cfg.diffusion = c.number("diffusion");
        if (cfg.eta <= 0.0) throw config_error(c.path() + ".eta: must be positive");
        if (cfg.diffusion < 0.0) throw config_error(c.path() + ".diffusion: must be >= 0");
        echo["eta"] = cfg.eta;
        echo["diffusion"] = cfg.diffusion;
        c.finish();
        return cfg;
    }
    throw config_error(c.path() + ".stepper: unknown stepper '" + kind + "'");
}

// ---------------------------------------------------------------------------
// artifact helpers
// ---------------------------------------------------------------------------

struct ArtifactSink {
    std::string dir;

    void write(const std::string& name, const std::string& contents) const {
        std::filesystem::create_directories(dir);
        write_text_file(dir + "/" + name, contents);
    }
};

json rate_to_json(const RateEstimate& r) {
    return {{"gamma_hat", r.gamma_hat},      {"ci_low", r.ci_low},
            {"ci_high", r.ci_high},          {"trial_count", r.trial_count},
            {"censored_count", r.censored_count}, {"invalid_count", r.invalid_count},
            {"total_time", r.total_time}};
}

// ---------------------------------------------------------------------------
// experiment runners
// ---------------------------------------------------------------------------

struct RunInput {
    json config;
    std::uint64_t seed = 0;
    std::string out_dir;
    int workers = 1;
    bool dry_run = false;
};

int finish_run(const RunInput& in, json& summary, const std::string& csv,
               const std::string& svg, double wall_seconds) {
    if (in.dry_run) {
        std::cout << summary["config"].dump(2) << "\n";
        return kExitOk;
    }
    ArtifactSink sink{in.out_dir};
    sink.write("results.csv", csv);
    sink.write("summary.json", summary.dump(2) + "\n");
    sink.write("plot.svg", svg);
    // wall time lives outside summary.json so replays stay byte-identical
    sink.write("run.log", std::string("wall_seconds=") + format_double(wall_seconds) + "\n");
    return kExitOk;
}

json base_summary(const std::string& experiment, const RunInput& in, const json& resolved) {
    json s;
    s["tool"] = kToolVersion;
    s["experiment"] = experiment;
    s["seed"] = in.seed;
    s["config"] = resolved;
    return s;
}

int run_escape_sweep(RunInput& in) {
    const auto t0 = std::chrono::steady_clock::now();
    json resolved;
    resolved["experiment"] = "escape-sweep";
    resolved["seed"] = in.seed;

    Checker root(in.config, "$");
    root.find("experiment");
    root.find("seed");
    root.find("output_dir");

    json land_echo;
    ParsedLandscape land = parse_landscape(root.object("landscape"), land_echo);
    resolved["landscape"] = land_echo;

    json dyn_echo;
    StepperSpec stepper = parse_dynamics(root.object("dynamics"), dyn_echo);
    resolved["dynamics"] = dyn_echo;

    Checker proto = root.object("protocol");
    json proto_echo;
    json pre_echo;
    PretrainSpec pretrain;
    if (auto pc = proto.object_opt("pretrain"))
        pretrain = parse_pretrain(std::move(*pc), pre_echo);
    else
        pre_echo = {{"eta", pretrain.eta},
                    {"grad_tol", pretrain.grad_tol},
                    {"max_iters", pretrain.max_iters}};

    json start_echo;
    StartResolution start = resolve_start(proto.require("start"), proto.path() + ".start",
                                          *land.landscape, pretrain, in.seed, start_echo);
    proto_echo["start"] = start_echo;
    proto_echo["pretrain"] = pre_echo;
    if (start.pretrained) {
        proto_echo["pretrain_iterations"] = start.pretrain_iters;
        proto_echo["residual_grad_norm"] = start.residual_grad_norm;
    }

    EscapeProtocol protocol;
    protocol.start = start.theta;
    if (auto center = proto.number_list_opt("region_center")) {
        if (center->size() != start.theta.size())
            throw config_error(proto.path() + ".region_center: wrong dimension");
        protocol.region.center = *center;
        proto_echo["region_center"] = *center;
    } else {
        protocol.region.center = start.theta;
        proto_echo["region_center"] = "start";
    }
    protocol.region.radius = proto.number("region_radius");
    if (protocol.region.radius <= 0.0)
        throw config_error(proto.path() + ".region_radius: must be positive");
    protocol.max_iters = proto.integer_or("max_iters", 10'000'000);
    if (protocol.max_iters < 1)
        throw config_error(proto.path() + ".max_iters: must be >= 1");
    protocol.stepper = stepper;
    proto_echo["region_radius"] = protocol.region.radius;
    proto_echo["max_iters"] = protocol.max_iters;
    proto.finish();
    resolved["protocol"] = proto_echo;

    Checker sweep_c = root.object("sweep");
    SweepSpec sweep;
    const std::string var = sweep_c.text("variable");
    if (var == "sharpness_k") sweep.variable = SweepVariable::sharpness_k;
    else if (var == "batch_size") sweep.variable = SweepVariable::batch_size;
    else if (var == "eta") sweep.variable = SweepVariable::eta;
    else if (var == "diffusion_D") sweep.variable = SweepVariable::diffusion_d;
    else throw config_error(sweep_c.path() + ".variable: unknown variable '" + var + "'");
    sweep.grid = sweep_c.number_list("grid");
    sweep.trials_per_point = static_cast<int>(sweep_c.integer_or("trials", 100));
    sweep_c.finish();
    resolved["sweep"] = {{"variable", var}, {"grid", sweep.grid},
                         {"trials", sweep.trials_per_point}};
    root.finish();

    resolved["output_dir"] = in.out_dir;
    resolved["workers"] = in.workers;
    json summary = base_summary("escape-sweep", in, resolved);
    if (in.dry_run) return finish_run(in, summary, "", "", 0.0);

    const SweepResult result = sweep_and_fit(land.landscape, protocol, sweep, in.seed, in.workers);

    std::string csv = "x_raw,x_transformed,gamma_hat,ci_low,ci_high,neg_log_gamma,censored_count\n";
    std::vector<PlotPoint> plot_points;
    json points_json = json::array();
    for (const SweepPoint& p : result.points) {
        std::vector<std::string> row{format_double(p.x_raw), format_double(p.x_transformed)};
        json pj = {{"x_raw", p.x_raw}, {"x_transformed", p.x_transformed}, {"flagged", p.flagged}};
        PlotPoint pp{p.x_transformed, 0.0, 0.0, 0.0, p.flagged};
        if (p.flagged) {
            row.insert(row.end(), {"nan", "nan", "nan", "nan", "nan"});
        } else {
            const double neg_log = -std::log(p.rate.gamma_hat);
            row.insert(row.end(),
                       {format_double(p.rate.gamma_hat), format_double(p.rate.ci_low),
                        format_double(p.rate.ci_high), format_double(neg_log),
                        std::to_string(p.rate.censored_count)});
            pj["rate"] = rate_to_json(p.rate);
            pj["y_transformed"] = p.y_transformed;
            if (!std::isnan(p.cov)) pj["escape_time_cov"] = p.cov;
            pp.y = p.y_transformed;
            if (result.fit.y_transform == YTransform::neg_log) {
                pp.y_low = -std::log(p.rate.ci_high);
                pp.y_high = -std::log(p.rate.ci_low);
            } else {
                pp.y_low = p.rate.ci_low;
                pp.y_high = p.rate.ci_high;
            }
        }
        csv += csv_join(row);
        points_json.push_back(pj);
        plot_points.push_back(pp);
    }

    summary["points"] = points_json;
    summary["fit"] = {{"slope", result.fit.slope},
                      {"intercept", result.fit.intercept},
                      {"pearson", result.fit.pearson},
                      {"x_transform", to_string(result.fit.x_transform)},
                      {"y_transform", to_string(result.fit.y_transform)}};

    PlotStyle style;
    style.x_label = result.fit.x_transform == XTransform::reciprocal
                        ? std::string("1/") + to_string(sweep.variable)
                        : to_string(sweep.variable);
    style.y_label = result.fit.y_transform == YTransform::neg_log
                        ? "-log gamma_hat" : "gamma_hat";
    style.title = std::string("escape sweep: ") + to_string(sweep.variable);
    const std::string svg = render_fit_plot(plot_points, &result.fit, style);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_run(in, summary, csv, svg, wall);
}

int run_theory_table(RunInput& in) {
    const auto t0 = std::chrono::steady_clock::now();
    json resolved;
    resolved["experiment"] = "theory-table";
    resolved["seed"] = in.seed;

    Checker root(in.config, "$");
    root.find("experiment");
    root.find("seed");
    root.find("output_dir");

    Checker geom = root.object("geometry");
    const std::string source = geom.text_or("source", "styblinski-tang");
    ValleyGeometry valley;
    SaddleGeometry saddle;
    double barrier = 0.0;
    Vec k_grid{1.0};
    if (source == "styblinski-tang") {
        const int dim = static_cast<int>(geom.integer_or("dim", 1));
        if (auto ks = geom.number_list_opt("k")) k_grid = *ks;
        resolved["geometry"] = {{"source", source}, {"dim", dim}, {"k", k_grid}};
        geom.finish();
        valley = st_valley_geometry(dim, 1.0);
        saddle = st_saddle_geometry(dim, 1.0);
        barrier = st::barrier_height();
    } else if (source == "explicit") {
        Checker vc = geom.object("valley");
        valley.loss_at_min = vc.number("loss");
        valley.hessian_eigs = vc.number_list("eigs");
        valley.escape_eig = vc.number("escape_eig");
        vc.finish();
        Checker sc = geom.object("saddle");
        saddle.loss_at_saddle = sc.number("loss");
        saddle.hessian_eigs = sc.number_list("eigs");
        saddle.escape_eig = sc.number("escape_eig");
        sc.finish();
        barrier = barrier_of(valley, saddle);
        resolved["geometry"] = {
            {"source", source},
            {"valley", {{"loss", valley.loss_at_min}, {"eigs", valley.hessian_eigs},
                        {"escape_eig", valley.escape_eig}}},
            {"saddle", {{"loss", saddle.loss_at_saddle}, {"eigs", saddle.hessian_eigs},
                        {"escape_eig", saddle.escape_eig}}}};
        geom.finish();
    } else {
        throw config_error(geom.path() + ".source: unknown geometry source '" + source + "'");
    }
    if (barrier <= 0.0) throw config_error("$.geometry: barrier must be positive");

    std::optional<Vec> sgld_d;
    if (auto c = root.object_opt("sgld")) {
        sgld_d = c->number_list("diffusion");
        c->finish();
        resolved["sgld"] = {{"diffusion", *sgld_d}};
    }
    struct SgdTable {
        double eta;
        Vec batch_sizes;
        double s;
    };
    std::optional<SgdTable> sgd_table;
    if (auto c = root.object_opt("sgd")) {
        SgdTable t;
        t.eta = c->number("eta");
        t.batch_sizes = c->number_list("batch_sizes");
        t.s = c->number_or("s", 0.5);
        c->finish();
        if (t.eta <= 0.0) throw config_error("$.sgd.eta: must be positive");
        sgd_table = t;
        resolved["sgd"] = {{"eta", t.eta}, {"batch_sizes", t.batch_sizes}, {"s", t.s}};
    }
    if (!sgld_d && !sgd_table)
        throw config_error("$: theory-table needs an 'sgld' or 'sgd' section");
    root.finish();

    resolved["output_dir"] = in.out_dir;
    resolved["workers"] = in.workers;
    json summary = base_summary("theory-table", in, resolved);
    if (in.dry_run) return finish_run(in, summary, "", "", 0.0);

    std::string csv = "method,k,parameter,value,barrier,tau,exponent,low_temperature\n";
    json rows = json::array();
    std::vector<PlotPoint> plot_points;
    for (double k : k_grid) {
        ValleyGeometry vk = valley;
        SaddleGeometry sk = saddle;
        for (double& e : vk.hessian_eigs) e *= k;
        vk.escape_eig *= k;
        for (double& e : sk.hessian_eigs) e *= k;
        sk.escape_eig *= k;

        if (sgld_d) {
            for (double d : *sgld_d) {
                const SgldPrediction p = sgld_escape_time(vk, sk, barrier, d);
                csv += csv_join(std::vector<std::string>{
                    "sgld", format_double(k), "D", format_double(d), format_double(barrier),
                    format_double(p.tau), format_double(p.barrier_over_d),
                    p.low_temperature ? "true" : "false"});
                rows.push_back({{"method", "sgld"}, {"k", k}, {"D", d}, {"tau", p.tau},
                                {"barrier_over_d", p.barrier_over_d},
                                {"low_temperature", p.low_temperature}});
                plot_points.push_back({p.barrier_over_d, std::log(p.tau),
                                       std::log(p.tau), std::log(p.tau), false});
            }
        }
        if (sgd_table) {
            for (double b : sgd_table->batch_sizes) {
                const int bi = static_cast<int>(std::llround(b));
                const SgdPrediction p = sgd_escape_time(vk.escape_eig, sk.escape_eig, barrier, bi,
                                                        sgd_table->eta, sgd_table->s);
                csv += csv_join(std::vector<std::string>{
                    "sgd", format_double(k), "B", format_double(b), format_double(barrier),
                    format_double(p.tau), format_double(p.exponent),
                    p.low_temperature ? "true" : "false"});
                rows.push_back({{"method", "sgd"}, {"k", k}, {"B", bi}, {"tau", p.tau},
                                {"exponent", p.exponent},
                                {"T_a", p.temperature_min}, {"T_b", p.temperature_saddle},
                                {"low_temperature", p.low_temperature}});
                plot_points.push_back({p.exponent, std::log(p.tau),
                                       std::log(p.tau), std::log(p.tau), false});
            }
        }
    }
    summary["rows"] = rows;

    PlotStyle style;
    style.x_label = "exponent";
    style.y_label = "log tau";
    style.title = "closed-form escape-time predictions";
    std::string svg;
    if (plot_points.size() >= 2)
        svg = render_fit_plot(plot_points, nullptr, style);
    else
        svg = render_fit_plot(std::vector<PlotPoint>{{0, 0, 0, 0, false}, {1, 1, 1, 1, false}},
                              nullptr, style);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_run(in, summary, csv, svg, wall);
}

int run_noise_hist(RunInput& in) {
    const auto t0 = std::chrono::steady_clock::now();
    json resolved;
    resolved["experiment"] = "noise-hist";
    resolved["seed"] = in.seed;

    Checker root(in.config, "$");
    root.find("experiment");
    root.find("seed");
    root.find("output_dir");

    json land_echo;
    ParsedLandscape land = parse_landscape(root.object("landscape"), land_echo);
    resolved["landscape"] = land_echo;
    if (land.landscape->sample_count() == 0)
        throw config_error("$.landscape: noise-hist needs a landscape with per-sample structure");

    json pre_echo;
    PretrainSpec pretrain;
    if (auto pc = root.object_opt("pretrain"))
        pretrain = parse_pretrain(std::move(*pc), pre_echo);
    else
        pre_echo = {{"eta", pretrain.eta}, {"grad_tol", pretrain.grad_tol},
                    {"max_iters", pretrain.max_iters}};
    resolved["pretrain"] = pre_echo;

    json probe_echo;
    StartResolution probe = resolve_start(root.require("probe"), "$.probe", *land.landscape,
                                          pretrain, in.seed, probe_echo);
    resolved["probe"] = probe_echo;

    const int batch_size = static_cast<int>(root.integer_or("batch_size", 32));
    const int draws = static_cast<int>(root.integer_or("draws", 4000));
    const int bins = static_cast<int>(root.integer_or("bins", 60));
    const double levy_alpha = root.number_or("levy_alpha", 1.2);
    const double levy_scale = root.number_or("levy_scale", 1.0);
    resolved["batch_size"] = batch_size;
    resolved["draws"] = draws;
    resolved["bins"] = bins;
    resolved["levy_alpha"] = levy_alpha;
    resolved["levy_scale"] = levy_scale;
    root.finish();

    resolved["output_dir"] = in.out_dir;
    resolved["workers"] = in.workers;
    json summary = base_summary("noise-hist", in, resolved);
    if (in.dry_run) return finish_run(in, summary, "", "", 0.0);

    const int n = land.landscape->dim();
    const NoiseSampleSet sgn =
        draw_sgn(*land.landscape, probe.theta, batch_size, draws, in.seed);

    // Gaussian baseline matched in dimension and covariance (the scaled
    // Gaussian comparison), plus an alpha-stable baseline
    const Mat sgn_cov = estimate_sgn_covariance(sgn);
    const EigenSym es = eigh(sgn_cov);
    std::vector<Vec> gauss(draws, Vec(n, 0.0));
    RngStream grng(in.seed, /*idx_a=*/0x6a55ULL);
    Vec zbuf(n);
    for (Vec& v : gauss) {
        for (int k = 0; k < n; ++k)
            zbuf[k] = es.values[k] > 0.0 ? std::sqrt(es.values[k]) * grng.normal() : 0.0;
        for (int i = 0; i < n; ++i) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) acc += es.vectors(i, k) * zbuf[k];
            v[i] = acc;
        }
    }
    const std::vector<Vec> levy = levy_sample(levy_alpha, levy_scale, n, draws, in.seed + 1);

    struct Series {
        std::string name;
        Vec norms;
    };
    std::vector<Series> series{{"sgn", norms_of(sgn.draws)},
                               {"gaussian", norms_of(gauss)},
                               {"levy", norms_of(levy)}};

    std::string csv = "series,bin_low,bin_high,count\n";
    std::vector<HistogramSeries> hseries;
    json stats_json;
    for (const Series& s : series) {
        std::vector<Vec> as_vecs;  // norm_histogram takes vectors; wrap norms
        as_vecs.reserve(s.norms.size());
        for (double v : s.norms) as_vecs.push_back(Vec{v});
        const Histogram h = norm_histogram(as_vecs, bins);
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            csv += csv_join(std::vector<std::string>{
                s.name, format_double(h.low + b * h.bin_width),
                format_double(h.low + (b + 1) * h.bin_width), std::to_string(h.counts[b])});
        }
        hseries.push_back({s.name, h});
        const TailStats ts = tail_statistic(s.norms);
        stats_json[s.name] = {{"max_over_median", ts.max_over_median},
                              {"excess_kurtosis_of_log", ts.excess_kurtosis_of_log},
                              {"median_norm", median(s.norms)}};
    }
    summary["tail_statistics"] = stats_json;

    PlotStyle style;
    style.x_label = "norm";
    style.y_label = "fraction per bin";
    style.title = "gradient-noise norm histograms";
    const std::string svg = render_histogram_plot(hseries, style);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_run(in, summary, csv, svg, wall);
}

int run_cov_fit(RunInput& in) {
    const auto t0 = std::chrono::steady_clock::now();
    json resolved;
    resolved["experiment"] = "cov-fit";
    resolved["seed"] = in.seed;

    Checker root(in.config, "$");
    root.find("experiment");
    root.find("seed");
    root.find("output_dir");

    json land_echo;
    ParsedLandscape land = parse_landscape(root.object("landscape"), land_echo);
    resolved["landscape"] = land_echo;
    if (land.landscape->sample_count() == 0)
        throw config_error("$.landscape: cov-fit needs a landscape with per-sample structure");

    json pre_echo;
    PretrainSpec pretrain;
    if (auto pc = root.object_opt("pretrain"))
        pretrain = parse_pretrain(std::move(*pc), pre_echo);
    else
        pre_echo = {{"eta", pretrain.eta}, {"grad_tol", pretrain.grad_tol},
                    {"max_iters", pretrain.max_iters}};
    resolved["pretrain"] = pre_echo;

    const int batch_size = static_cast<int>(root.integer_or("batch_size", 8));
    // covariance estimation error scales as 1/sqrt(draws)
    const int dim = land.landscape->dim();
    const std::int64_t default_draws =
        std::min<std::int64_t>(10LL * dim * dim, 100000);
    const int draws = static_cast<int>(root.integer_or("draws", default_draws));
    Vec filter{1e-4, 0.5};
    if (auto f = root.number_list_opt("filter")) {
        if (f->size() != 2) throw config_error("$.filter: expected [low, high]");
        filter = *f;
    }
    Vec trace_batches{1, 2, 4, 8};
    if (auto tb = root.number_list_opt("trace_batch_sizes")) trace_batches = *tb;
    const int trace_draws = static_cast<int>(root.integer_or("trace_draws", 4000));
    resolved["batch_size"] = batch_size;
    resolved["draws"] = draws;
    resolved["filter"] = filter;
    resolved["trace_batch_sizes"] = trace_batches;
    resolved["trace_draws"] = trace_draws;
    root.finish();

    resolved["output_dir"] = in.out_dir;
    resolved["workers"] = in.workers;
    json summary = base_summary("cov-fit", in, resolved);
    if (in.dry_run) return finish_run(in, summary, "", "", 0.0);

    Vec zero(land.landscape->dim(), 0.0);
    PretrainResult pr = pretrain_to_critical(*land.landscape, std::move(zero), pretrain.eta,
                                             pretrain.grad_tol, pretrain.max_iters);
    if (!pr.converged)
        throw numerical_error("cov-fit: pretraining did not converge (residual " +
                              format_double(pr.grad_norm) + ")");
    summary["pretrain_iterations"] = pr.iterations;
    summary["residual_grad_norm"] = pr.grad_norm;

    const Mat hessian = land.landscape->hessian(pr.theta);
    const NoiseSampleSet sgn =
        draw_sgn(*land.landscape, pr.theta, batch_size, draws, in.seed);
    if (draws < dim + 1) {
        std::cerr << "warning: " << draws << " draws for a " << dim
                  << "-dimensional covariance (recommended >= dim + 1)\n";
        summary["covariance_underdetermined"] = true;
    }
    const Mat cov = estimate_sgn_covariance(sgn);
    const CovarianceFit fit =
        covariance_hessian_fit(cov, hessian, batch_size, filter[0], filter[1]);

    summary["fit"] = {{"pearson", fit.pearson}, {"slope", fit.slope},
                      {"element_count", fit.element_count},
                      {"filter", {fit.filter_low, fit.filter_high}}};

    // element pairs in the Hessian eigenbasis, for the CSV and the plot
    const EigenSym es = eigh(hessian);
    const Mat h_rot = congruence(hessian, es.vectors);
    const Mat c_rot = congruence(cov, es.vectors);
    std::string csv = "h_element,c_element,h_over_b\n";
    Vec xs, ys;
    for (int i = 0; i < h_rot.rows(); ++i)
        for (int j = i; j < h_rot.cols(); ++j) {
            const double h = h_rot(i, j);
            if (h < filter[0] || h > filter[1]) continue;
            csv += csv_join(std::vector<std::string>{format_double(h),
                                                     format_double(c_rot(i, j)),
                                                     format_double(h / batch_size)});
            xs.push_back(h / batch_size);
            ys.push_back(c_rot(i, j));
        }

    // 1/B law on the covariance trace
    Vec inv_bs, traces;
    json trace_json = json::array();
    for (double b : trace_batches) {
        const int bi = static_cast<int>(std::llround(b));
        const NoiseSampleSet s =
            draw_sgn(*land.landscape, pr.theta, bi, trace_draws, in.seed + 17 + bi);
        const double tr = trace(estimate_sgn_covariance(s));
        inv_bs.push_back(1.0 / bi);
        traces.push_back(tr);
        trace_json.push_back({{"batch_size", bi}, {"trace", tr}});
    }
    if (inv_bs.size() >= 2) {
        const LinearFit tf = least_squares(inv_bs, traces);
        summary["trace_fit"] = {{"slope", tf.slope}, {"intercept", tf.intercept},
                                {"pearson", tf.pearson}};
    }
    summary["traces"] = trace_json;

    const LinearFit plot_fit = least_squares(xs, ys);
    FitResult fr;
    fr.slope = plot_fit.slope;
    fr.intercept = plot_fit.intercept;
    fr.pearson = plot_fit.pearson;
    fr.x_transform = XTransform::identity;
    fr.y_transform = YTransform::identity;
    std::vector<PlotPoint> points;
    for (std::size_t i = 0; i < xs.size(); ++i)
        points.push_back({xs[i], ys[i], ys[i], ys[i], false});
    PlotStyle style;
    style.x_label = "H element / B (Hessian eigenbasis)";
    style.y_label = "C element";
    style.title = "gradient-noise covariance vs Hessian";
    const std::string svg = render_fit_plot(points, &fr, style);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_run(in, summary, csv, svg, wall);
}

int run_occupancy(RunInput& in) {
    const auto t0 = std::chrono::steady_clock::now();
    json resolved;
    resolved["experiment"] = "occupancy";
    resolved["seed"] = in.seed;

    Checker root(in.config, "$");
    root.find("experiment");
    root.find("seed");
    root.find("output_dir");

    json land_echo;
    ParsedLandscape land = parse_landscape(root.object("landscape"), land_echo);
    resolved["landscape"] = land_echo;

    json dyn_echo;
    StepperSpec stepper = parse_dynamics(root.object("dynamics"), dyn_echo);
    resolved["dynamics"] = dyn_echo;

    auto parse_region = [&](const char* key) {
        Checker rc = root.object(key);
        ValleyRegion region;
        region.center = rc.number_list("center");
        region.radius = rc.number("radius");
        rc.finish();
        if (static_cast<int>(region.center.size()) != land.landscape->dim())
            throw config_error(std::string("$.") + key + ".center: wrong dimension");
        if (region.radius <= 0.0)
            throw config_error(std::string("$.") + key + ".radius: must be positive");
        resolved[key] = {{"center", region.center}, {"radius", region.radius}};
        return region;
    };
    const ValleyRegion region_a = parse_region("region_a");
    const ValleyRegion region_b = parse_region("region_b");

    const std::int64_t total_iters = root.integer_or("total_iters", 10'000'000);
    if (total_iters < 1) throw config_error("$.total_iters: must be >= 1");
    resolved["total_iters"] = total_iters;
    root.finish();

    resolved["output_dir"] = in.out_dir;
    resolved["workers"] = in.workers;
    json summary = base_summary("occupancy", in, resolved);
    if (in.dry_run) return finish_run(in, summary, "", "", 0.0);

    const OccupancyResult res = occupancy_experiment(*land.landscape, region_a, region_b,
                                                     stepper, total_iters, in.seed);

    std::string csv = "valley,fraction,predicted,mean_sojourn_time,transitions,low_confidence\n";
    csv += csv_join(std::vector<std::string>{
        "a", format_double(res.fraction_a), format_double(res.predicted_a),
        format_double(res.mean_sojourn_a), std::to_string(res.transitions),
        res.low_confidence ? "true" : "false"});
    csv += csv_join(std::vector<std::string>{
        "b", format_double(res.fraction_b), format_double(res.predicted_b),
        format_double(res.mean_sojourn_b), std::to_string(res.transitions),
        res.low_confidence ? "true" : "false"});

    summary["result"] = {{"fraction_a", res.fraction_a},       {"fraction_b", res.fraction_b},
                         {"predicted_a", res.predicted_a},     {"predicted_b", res.predicted_b},
                         {"mean_sojourn_a", res.mean_sojourn_a},
                         {"mean_sojourn_b", res.mean_sojourn_b},
                         {"transitions", res.transitions},
                         {"low_confidence", res.low_confidence}};

    const std::vector<std::string> labels{"valley a", "valley b"};
    const Vec measured{res.fraction_a, res.fraction_b};
    const Vec predicted{res.predicted_a, res.predicted_b};
    PlotStyle style;
    style.x_label = "valley";
    style.y_label = "residence fraction";
    style.title = "long-run occupancy vs escape-time prediction";
    const std::string svg = render_bar_plot(labels, measured, predicted, style);

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return finish_run(in, summary, csv, svg, wall);
}

}  // namespace

int run_experiment(const std::string& subcommand, const RunOptions& options) {
    try {
        std::ifstream f(options.config_path);
        if (!f) {
            std::cerr << "config error: cannot open '" << options.config_path << "'\n";
            return kExitConfig;
        }
        RunInput in;
        try {
            in.config = json::parse(f);
        } catch (const json::parse_error& e) {
            // nlohmann reports the byte offset; surface it as the diagnostic
            std::cerr << "config error: " << options.config_path << ": " << e.what() << "\n";
            return kExitConfig;
        }

        if (!in.config.is_object()) {
            std::cerr << "config error: top level must be an object\n";
            return kExitConfig;
        }
        if (in.config.contains("experiment")) {
            const auto& e = in.config["experiment"];
            if (!e.is_string() || e.get<std::string>() != subcommand) {
                std::cerr << "config error: $.experiment does not match subcommand '"
                          << subcommand << "'\n";
                return kExitConfig;
            }
        }
        in.seed = options.seed.value_or(
            in.config.value("seed", static_cast<std::uint64_t>(0)));
        in.out_dir = options.out_dir.value_or(in.config.value("output_dir", std::string("out")));
        in.workers = std::max(1, options.workers);
        in.dry_run = options.dry_run;

        if (subcommand == "escape-sweep") return run_escape_sweep(in);
        if (subcommand == "theory-table") return run_theory_table(in);
        if (subcommand == "noise-hist") return run_noise_hist(in);
        if (subcommand == "cov-fit") return run_cov_fit(in);
        if (subcommand == "occupancy") return run_occupancy(in);
        std::cerr << "config error: unknown experiment '" << subcommand << "'\n";
        return kExitConfig;
    } catch (const insufficient_data_error& e) {
        std::cerr << "insufficient data: " << e.what() << "\n";
        return kExitInsufficient;
    } catch (const numerical_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumerical;
    }
}

}  // namespace sgdlab
