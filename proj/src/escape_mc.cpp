#include "sgdlab/escape_mc.hpp"

#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "sgdlab/errors.hpp"
#include "sgdlab/kramers.hpp"
#include "sgdlab/stats.hpp"

namespace sgdlab {

RateEstimate estimate_rate(std::span<const EscapeTrial> trials, double eta) {
    if (eta <= 0.0) throw std::invalid_argument("estimate_rate: eta must be positive");

    RateEstimate est;
    double total = 0.0;
    for (const EscapeTrial& t : trials) {
        if (!t.valid) {
            ++est.invalid_count;
            continue;
        }
        total += eta * static_cast<double>(t.iterations);
        if (t.escaped)
            ++est.trial_count;
        else
            ++est.censored_count;
    }
    if (est.trial_count < 3)
        throw insufficient_data_error("estimate_rate: need >= 3 escaped trials");
    if (total <= 0.0) throw numerical_error("estimate_rate: nonpositive total time");

    est.total_time = total;
    est.gamma_hat = static_cast<double>(est.trial_count - 2) / total;
    const double half_width = 1.96 / std::sqrt(static_cast<double>(est.trial_count));
    est.ci_low = est.gamma_hat * (1.0 - half_width);
    est.ci_high = est.gamma_hat * (1.0 + half_width);
    return est;
}

double exponentiality_check(std::span<const EscapeTrial> trials) {
    Vec times;
    for (const EscapeTrial& t : trials)
        if (t.valid && t.escaped) times.push_back(t.dynamical_time);
    if (times.size() < 30)
        throw insufficient_data_error("exponentiality_check: need >= 30 escaped trials");
    const double mu = mean(times);
    if (mu == 0.0) throw numerical_error("exponentiality_check: zero mean escape time");
    return std::sqrt(variance(times)) / mu;
}

std::vector<EscapeTrial> run_trials(const Landscape& landscape, const EscapeProtocol& protocol,
                                    int trial_count, std::uint64_t seed, int workers,
                                    std::uint64_t salt) {
    if (trial_count < 1) throw std::invalid_argument("run_trials: trial_count must be >= 1");
    if (workers < 1) workers = 1;

    std::vector<EscapeTrial> trials(trial_count);
    SimulateOptions opts;
    opts.max_iters = protocol.max_iters;

    auto run_one = [&](int i) {
        trials[i] = simulate_until_exit(landscape, protocol.start, protocol.region,
                                        protocol.stepper, opts,
                                        RngStream(seed, salt, static_cast<std::uint64_t>(i)));
    };

    if (workers == 1 || trial_count == 1) {
        for (int i = 0; i < trial_count; ++i) run_one(i);
        return trials;
    }

    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (int i = next.fetch_add(1); i < trial_count; i = next.fetch_add(1)) run_one(i);
        });
    for (std::thread& t : pool) t.join();
    return trials;
}

const char* to_string(SweepVariable v) {
    switch (v) {
        case SweepVariable::sharpness_k: return "sharpness_k";
        case SweepVariable::batch_size: return "batch_size";
        case SweepVariable::eta: return "eta";
        case SweepVariable::diffusion_d: return "diffusion_D";
    }
    return "?";
}
const char* to_string(XTransform t) {
    return t == XTransform::reciprocal ? "reciprocal" : "identity";
}
const char* to_string(YTransform t) {
    return t == YTransform::neg_log ? "neg_log" : "identity";
}

namespace {

void validate_sweep(const SweepSpec& spec) {
    if (spec.grid.size() < 2) throw std::invalid_argument("SweepSpec: grid needs >= 2 values");
    if (spec.trials_per_point < 10)
        throw std::invalid_argument("SweepSpec: trials_per_point must be >= 10");
    bool inc = true, dec = true;
    for (std::size_t i = 1; i < spec.grid.size(); ++i) {
        inc = inc && spec.grid[i] > spec.grid[i - 1];
        dec = dec && spec.grid[i] < spec.grid[i - 1];
    }
    if (!inc && !dec) throw std::invalid_argument("SweepSpec: grid must be strictly monotone");
    for (double g : spec.grid)
        if (g <= 0.0) throw std::invalid_argument("SweepSpec: grid values must be positive");
}

struct PointSetup {
    LandscapePtr landscape;
    EscapeProtocol protocol;
    double eta;
};

PointSetup build_point(const LandscapePtr& landscape, const EscapeProtocol& base,
                       SweepVariable variable, double value) {
    PointSetup p{landscape, base, stepper_eta(base.stepper)};
    switch (variable) {
        case SweepVariable::sharpness_k: {
            const double inv_sqrt_k = 1.0 / std::sqrt(value);
            p.landscape = rescale(landscape, value);
            for (double& t : p.protocol.start) t *= inv_sqrt_k;
            for (double& c : p.protocol.region.center) c *= inv_sqrt_k;
            p.protocol.region.radius *= inv_sqrt_k;
            break;
        }
        case SweepVariable::batch_size: {
            const int b = static_cast<int>(std::llround(value));
            if (std::abs(value - b) > 1e-9 || b < 1)
                throw std::invalid_argument("sweep: batch_size grid values must be positive integers");
            if (auto* sgd = std::get_if<SgdConfig>(&p.protocol.stepper))
                sgd->batch_size = b;
            else if (auto* mix = std::get_if<SgdInjectedConfig>(&p.protocol.stepper))
                mix->sgd.batch_size = b;
            else
                throw std::invalid_argument("sweep: batch_size sweep requires an SGD stepper");
            break;
        }
        case SweepVariable::eta: {
            std::visit([&](auto& s) {
                using T = std::decay_t<decltype(s)>;
                if constexpr (std::is_same_v<T, SgdInjectedConfig>)
                    s.sgd.eta = value;
                else
                    s.eta = value;
            }, p.protocol.stepper);
            p.eta = value;
            break;
        }
        case SweepVariable::diffusion_d: {
            if (auto* sgld = std::get_if<SgldConfig>(&p.protocol.stepper))
                sgld->diffusion = value;
            else if (auto* mix = std::get_if<SgdInjectedConfig>(&p.protocol.stepper))
                mix->diffusion = value;
            else
                throw std::invalid_argument("sweep: diffusion sweep requires an SGLD stepper");
            break;
        }
    }
    return p;
}

void transforms_for(SweepVariable variable, const StepperSpec& stepper, XTransform& xt,
                    YTransform& yt) {
    const bool pure_sgld = std::holds_alternative<SgldConfig>(stepper);
    switch (variable) {
        case SweepVariable::sharpness_k:
            // SGD: (1/k, -log gamma); SGLD: (k, gamma), the polynomial law
            xt = pure_sgld ? XTransform::identity : XTransform::reciprocal;
            yt = pure_sgld ? YTransform::identity : YTransform::neg_log;
            break;
        case SweepVariable::batch_size:
            xt = XTransform::identity;
            yt = YTransform::neg_log;
            break;
        case SweepVariable::eta:
        case SweepVariable::diffusion_d:
            xt = XTransform::reciprocal;
            yt = YTransform::neg_log;
            break;
    }
}

}  // namespace

SweepResult sweep_and_fit(const LandscapePtr& landscape, const EscapeProtocol& base,
                          const SweepSpec& spec, std::uint64_t seed, int workers) {
    if (!landscape) throw std::invalid_argument("sweep_and_fit: null landscape");
    validate_sweep(spec);

    XTransform xt = XTransform::identity;
    YTransform yt = YTransform::identity;
    transforms_for(spec.variable, base.stepper, xt, yt);

    SweepResult result;
    result.fit.x_transform = xt;
    result.fit.y_transform = yt;

    for (std::size_t g = 0; g < spec.grid.size(); ++g) {
        const double value = spec.grid[g];
        const PointSetup setup = build_point(landscape, base, spec.variable, value);

        // the stream salt is derived from the grid value, so reversing the
        // grid order reproduces the exact same trials per value
        const std::uint64_t salt =
            0x57eeb000ULL + static_cast<std::uint64_t>(std::llround(value * 1e6));
        const std::vector<EscapeTrial> trials =
            run_trials(*setup.landscape, setup.protocol, spec.trials_per_point, seed, workers, salt);

        SweepPoint point;
        point.x_raw = value;
        point.x_transformed = xt == XTransform::reciprocal ? 1.0 / value : value;
        try {
            point.rate = estimate_rate(trials, setup.eta);
            point.y_transformed = yt == YTransform::neg_log ? -std::log(point.rate.gamma_hat)
                                                            : point.rate.gamma_hat;
            if (point.rate.trial_count >= 30) point.cov = exponentiality_check(trials);
        } catch (const insufficient_data_error&) {
            point.flagged = true;
        }
        result.points.push_back(std::move(point));
    }

    Vec xs, ys;
    for (const SweepPoint& p : result.points)
        if (!p.flagged) {
            xs.push_back(p.x_transformed);
            ys.push_back(p.y_transformed);
        }
    if (xs.size() < 3)
        throw insufficient_data_error("sweep_and_fit: fewer than 3 grid points with enough escapes");

    const LinearFit lf = least_squares(xs, ys);
    result.fit.slope = lf.slope;
    result.fit.intercept = lf.intercept;
    result.fit.pearson = lf.pearson;
    return result;
}

OccupancyResult occupancy_experiment(const Landscape& landscape, const ValleyRegion& region_a,
                                     const ValleyRegion& region_b, const StepperSpec& stepper,
                                     std::int64_t total_iters, std::uint64_t seed) {
    if (total_iters < 1)
        throw std::invalid_argument("occupancy_experiment: total_iters must be >= 1");
    // disjoint iff some coordinate separates the boxes
    bool disjoint = false;
    for (std::size_t i = 0; i < region_a.center.size(); ++i)
        if (std::abs(region_a.center[i] - region_b.center[i]) > region_a.radius + region_b.radius)
            disjoint = true;
    if (!disjoint) throw std::invalid_argument("occupancy_experiment: regions must be disjoint");

    Stepper s(landscape, stepper);
    TrajectoryState state{region_a.center, 0};
    RngStream rng(seed, /*idx_a=*/0x0cc7ULL);

    std::int64_t in_a = 0, in_b = 0;
    // sojourn: time from first entry into a valley until first entry into the
    // other valley
    int current = 0;  // 0 = A, 1 = B
    std::int64_t sojourn_start = 0;
    std::vector<double> sojourn_a, sojourn_b;
    int transitions = 0;

    for (std::int64_t it = 0; it < total_iters; ++it) {
        s.step(state, rng);
        bool finite = true;
        for (double t : state.theta)
            if (!std::isfinite(t) || std::abs(t) > kDivergenceBound) finite = false;
        if (!finite) throw numerical_error("occupancy_experiment: trajectory diverged");

        const bool a = region_a.contains(state.theta);
        const bool b = region_b.contains(state.theta);
        if (a) ++in_a;
        if (b) ++in_b;

        const int entered = a ? 0 : (b ? 1 : -1);
        if (entered >= 0 && entered != current) {
            const double sojourn =
                s.eta() * static_cast<double>(state.iteration - sojourn_start);
            (current == 0 ? sojourn_a : sojourn_b).push_back(sojourn);
            current = entered;
            sojourn_start = state.iteration;
            ++transitions;
        }
    }

    OccupancyResult res;
    res.transitions = transitions;
    res.low_confidence = transitions < 20;
    const double total = static_cast<double>(total_iters);
    res.fraction_a = static_cast<double>(in_a) / total;
    res.fraction_b = static_cast<double>(in_b) / total;
    if (!sojourn_a.empty() && !sojourn_b.empty()) {
        res.mean_sojourn_a = mean(sojourn_a);
        res.mean_sojourn_b = mean(sojourn_b);
        const Vec occ = stationary_occupancy(Vec{res.mean_sojourn_a, res.mean_sojourn_b});
        res.predicted_a = occ[0];
        res.predicted_b = occ[1];
    } else {
        res.predicted_a = 1.0;
        res.predicted_b = 0.0;
        res.low_confidence = true;
    }
    return res;
}

}  // namespace sgdlab
