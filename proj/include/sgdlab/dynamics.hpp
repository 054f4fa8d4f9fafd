#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <variant>

#include "sgdlab/landscapes.hpp"
#include "sgdlab/linalg.hpp"
#include "sgdlab/rng.hpp"

namespace sgdlab {

enum class Sampling { with_replacement, without_replacement };

struct SgdConfig {
    double eta = 0.01;
    int batch_size = 1;
    Sampling sampling = Sampling::with_replacement;
};

struct SgldConfig {
    double eta = 0.01;
    double diffusion = 0.0;  // injected per-step noise std is sqrt(2 * D * eta)
};

// SGD on the minibatch loss plus injected isotropic noise, for runs where
// stochastic gradient noise and white noise mix.
struct SgdInjectedConfig {
    SgdConfig sgd;
    double diffusion = 0.0;
};

using StepperSpec = std::variant<SgdConfig, SgldConfig, SgdInjectedConfig>;

double stepper_eta(const StepperSpec& spec);

struct TrajectoryState {
    Vec theta;
    std::int64_t iteration = 0;

    // t = eta * T, computed (not accumulated) so the identity is exact
    double dynamical_time(double eta) const { return eta * static_cast<double>(iteration); }
};

// Axis-aligned box: contains(theta) iff |theta_i - center_i| <= radius for
// every coordinate.
struct ValleyRegion {
    Vec center;
    double radius = 0.0;

    bool contains(std::span<const double> theta) const;
};

// One stepper instance drives one trajectory; it owns the without-replacement
// epoch permutation when that sampling mode is selected. Landscape and rng
// stream stay external, so trajectories parallelize trivially.
class Stepper {
public:
    Stepper(const Landscape& landscape, StepperSpec spec);

    void step(TrajectoryState& state, RngStream& rng);
    double eta() const { return eta_; }

private:
    void sample_batch(RngStream& rng);

    const Landscape& landscape_;
    StepperSpec spec_;
    double eta_;
    Vec grad_buf_;
    std::vector<int> batch_;
    std::vector<int> perm_;
    std::size_t cursor_ = 0;
};

// Single steps matching the protocol formulas. theta' = theta - eta * g_batch
// for SGD; theta' = theta - eta * grad + sqrt(2 D eta) * zeta for SGLD.
TrajectoryState sgd_step(const Landscape& landscape, const TrajectoryState& state,
                         const SgdConfig& config, RngStream& rng);
TrajectoryState sgld_step(const Landscape& landscape, const TrajectoryState& state,
                          const SgldConfig& config, RngStream& rng);

// D = (eta / 2B) [H]^+ : eigendecompose, take |eigenvalues|, reassemble.
Mat diffusion_matrix(const Mat& hessian, double eta, int batch_size);

struct EscapeTrial {
    std::int64_t iterations = 0;
    bool escaped = false;
    bool valid = true;
    double dynamical_time = 0.0;
};

// Any coordinate beyond this magnitude marks the trial diverged (invalid),
// not escaped; running off to infinity is not a valley transition.
inline constexpr double kDivergenceBound = 1e6;

using TrajectoryObserver =
    std::function<void(std::int64_t iteration, double loss, std::span<const double> theta)>;

struct SimulateOptions {
    std::int64_t max_iters = 10'000'000;
    // observer is called every `stride` iterations (and at iteration 0)
    TrajectoryObserver observer;
    std::int64_t observer_stride = 1;
};

// Runs until the first iteration outside the region (escaped), the iteration
// cap (censored), or a divergence (invalid).
EscapeTrial simulate_until_exit(const Landscape& landscape, const Vec& start,
                                const ValleyRegion& region, const StepperSpec& stepper,
                                const SimulateOptions& options, RngStream rng);

EscapeTrial simulate_until_exit(const Landscape& landscape, const Vec& start,
                                const ValleyRegion& region, const StepperSpec& stepper,
                                std::int64_t max_iters, std::uint64_t seed);

}  // namespace sgdlab
