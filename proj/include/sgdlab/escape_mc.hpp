#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "sgdlab/dynamics.hpp"
#include "sgdlab/landscapes.hpp"

namespace sgdlab {

// Exponential-MLE rate estimate: gamma_hat = (R - 2) / sum(t) over dynamical
// times, R counting escaped trials. Censored trials contribute elapsed time
// to the denominator only; diverged trials are excluded and counted.
struct RateEstimate {
    double gamma_hat = 0.0;
    double ci_low = 0.0;   // gamma_hat (1 - 1.96 / sqrt(R))
    double ci_high = 0.0;  // gamma_hat (1 + 1.96 / sqrt(R))
    int trial_count = 0;   // escaped trials R
    int censored_count = 0;
    int invalid_count = 0;
    double total_time = 0.0;
};

RateEstimate estimate_rate(std::span<const EscapeTrial> trials, double eta);

// std/mean of escaped dynamical times; 1 for an exponential law.
double exponentiality_check(std::span<const EscapeTrial> trials);

// Everything needed to run one escape configuration.
struct EscapeProtocol {
    Vec start;
    ValleyRegion region;
    StepperSpec stepper;
    std::int64_t max_iters = 10'000'000;
};

// R independent trials; trial i draws its rng stream from (seed, salt, i),
// so results are identical for any worker count and any scheduling order.
std::vector<EscapeTrial> run_trials(const Landscape& landscape, const EscapeProtocol& protocol,
                                    int trial_count, std::uint64_t seed, int workers = 1,
                                    std::uint64_t salt = 0);

enum class SweepVariable { sharpness_k, batch_size, eta, diffusion_d };
enum class XTransform { reciprocal, identity };
enum class YTransform { neg_log, identity };

const char* to_string(SweepVariable v);
const char* to_string(XTransform t);
const char* to_string(YTransform t);

struct SweepSpec {
    SweepVariable variable = SweepVariable::sharpness_k;
    Vec grid;                    // strictly monotone
    int trials_per_point = 100;  // >= 10
};

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double pearson = 0.0;
    XTransform x_transform = XTransform::identity;
    YTransform y_transform = YTransform::identity;
};

struct SweepPoint {
    double x_raw = 0.0;
    double x_transformed = 0.0;
    double y_transformed = 0.0;
    RateEstimate rate;
    double cov = std::numeric_limits<double>::quiet_NaN();  // escape-time CoV, when >= 30 escapes
    bool flagged = false;  // insufficient escapes; excluded from the fit
};

struct SweepResult {
    std::vector<SweepPoint> points;
    FitResult fit;
};

// Rebuilds the protocol at each grid value (sharpness rescales landscape,
// start, and region by 1/sqrt(k)), runs R trials per point, estimates rates
// in dynamical time, and regresses the transformed pairs.
SweepResult sweep_and_fit(const LandscapePtr& landscape, const EscapeProtocol& base,
                          const SweepSpec& spec, std::uint64_t seed, int workers = 1);

struct OccupancyResult {
    double fraction_a = 0.0;   // share of iterations inside region A
    double fraction_b = 0.0;
    double predicted_a = 0.0;  // stationary occupancy from measured sojourns
    double predicted_b = 0.0;
    double mean_sojourn_a = 0.0;  // dynamical time
    double mean_sojourn_b = 0.0;
    int transitions = 0;
    bool low_confidence = false;  // fewer than 20 transitions
};

// One long trajectory started at region A's center. Residence fractions are
// compared against the stationary occupancy computed from measured per-valley
// mean sojourn times.
OccupancyResult occupancy_experiment(const Landscape& landscape, const ValleyRegion& region_a,
                                     const ValleyRegion& region_b, const StepperSpec& stepper,
                                     std::int64_t total_iters, std::uint64_t seed);

}  // namespace sgdlab
