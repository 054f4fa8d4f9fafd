#include "sgdlab/dynamics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

#include "sgdlab/errors.hpp"

namespace sgdlab {

namespace {

void validate_sgd(const SgdConfig& cfg, const Landscape& landscape) {
    if (cfg.eta < 0.0) throw std::invalid_argument("SgdConfig: eta must be nonnegative");
    if (cfg.batch_size < 1) throw std::invalid_argument("SgdConfig: batch_size must be >= 1");
    if (landscape.sample_count() > 0 && cfg.batch_size > landscape.sample_count())
        throw std::invalid_argument("SgdConfig: batch_size exceeds dataset sample count");
}

void validate_sgld(const SgldConfig& cfg) {
    if (cfg.eta < 0.0) throw std::invalid_argument("SgldConfig: eta must be nonnegative");
    if (cfg.diffusion < 0.0) throw std::invalid_argument("SgldConfig: diffusion must be >= 0");
}

}  // namespace

double stepper_eta(const StepperSpec& spec) {
    return std::visit([](const auto& s) {
        if constexpr (std::is_same_v<std::decay_t<decltype(s)>, SgdInjectedConfig>)
            return s.sgd.eta;
        else
            return s.eta;
    }, spec);
}

bool ValleyRegion::contains(std::span<const double> theta) const {
    for (std::size_t i = 0; i < theta.size(); ++i)
        if (std::abs(theta[i] - center[i]) > radius) return false;
    return true;
}

Stepper::Stepper(const Landscape& landscape, StepperSpec spec)
    : landscape_(landscape), spec_(std::move(spec)), eta_(stepper_eta(spec_)),
      grad_buf_(landscape.dim()) {
    if (const auto* sgd = std::get_if<SgdConfig>(&spec_)) {
        validate_sgd(*sgd, landscape);
        batch_.resize(sgd->batch_size);
    } else if (const auto* mix = std::get_if<SgdInjectedConfig>(&spec_)) {
        validate_sgd(mix->sgd, landscape);
        if (mix->diffusion < 0.0)
            throw std::invalid_argument("SgdInjectedConfig: diffusion must be >= 0");
        batch_.resize(mix->sgd.batch_size);
    } else {
        validate_sgld(std::get<SgldConfig>(spec_));
    }
}

void Stepper::sample_batch(RngStream& rng) {
    const SgdConfig& cfg = std::holds_alternative<SgdConfig>(spec_)
                               ? std::get<SgdConfig>(spec_)
                               : std::get<SgdInjectedConfig>(spec_).sgd;
    const int m = landscape_.sample_count();
    if (m == 0) return;  // analytic surface; batch is ignored
    if (cfg.sampling == Sampling::with_replacement) {
        for (int& idx : batch_)
            idx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(m)));
    } else {
        if (perm_.empty()) {
            perm_.resize(m);
            std::iota(perm_.begin(), perm_.end(), 0);
            cursor_ = static_cast<std::size_t>(m);  // force first shuffle
        }
        for (int& idx : batch_) {
            if (cursor_ >= perm_.size()) {
                for (std::size_t j = perm_.size() - 1; j > 0; --j) {
                    const std::size_t k = rng.uniform_int(j + 1);
                    std::swap(perm_[j], perm_[k]);
                }
                cursor_ = 0;
            }
            idx = perm_[cursor_++];
        }
    }
}

void Stepper::step(TrajectoryState& state, RngStream& rng) {
    if (std::holds_alternative<SgldConfig>(spec_)) {
        const auto& cfg = std::get<SgldConfig>(spec_);
        landscape_.grad(state.theta, grad_buf_);
        const double noise_scale = std::sqrt(2.0 * cfg.diffusion * cfg.eta);
        for (int i = 0; i < landscape_.dim(); ++i) {
            double upd = -cfg.eta * grad_buf_[i];
            if (noise_scale > 0.0) upd += noise_scale * rng.normal();
            state.theta[i] += upd;
        }
    } else {
        const bool mixed = std::holds_alternative<SgdInjectedConfig>(spec_);
        const SgdConfig& cfg =
            mixed ? std::get<SgdInjectedConfig>(spec_).sgd : std::get<SgdConfig>(spec_);
        sample_batch(rng);
        if (landscape_.sample_count() > 0)
            landscape_.minibatch_grad(state.theta, batch_, grad_buf_);
        else
            landscape_.grad(state.theta, grad_buf_);
        const double noise_scale =
            mixed ? std::sqrt(2.0 * std::get<SgdInjectedConfig>(spec_).diffusion * cfg.eta) : 0.0;
        for (int i = 0; i < landscape_.dim(); ++i) {
            double upd = -cfg.eta * grad_buf_[i];
            if (noise_scale > 0.0) upd += noise_scale * rng.normal();
            state.theta[i] += upd;
        }
    }
    state.iteration += 1;
}

TrajectoryState sgd_step(const Landscape& landscape, const TrajectoryState& state,
                         const SgdConfig& config, RngStream& rng) {
    Stepper stepper(landscape, config);
    TrajectoryState next = state;
    stepper.step(next, rng);
    return next;
}

TrajectoryState sgld_step(const Landscape& landscape, const TrajectoryState& state,
                          const SgldConfig& config, RngStream& rng) {
    Stepper stepper(landscape, config);
    TrajectoryState next = state;
    stepper.step(next, rng);
    return next;
}

Mat diffusion_matrix(const Mat& hessian, double eta, int batch_size) {
    if (!is_symmetric(hessian, 1e-8))
        throw std::invalid_argument("diffusion_matrix: hessian must be symmetric");
    if (eta <= 0.0) throw std::invalid_argument("diffusion_matrix: eta must be positive");
    if (batch_size < 1) throw std::invalid_argument("diffusion_matrix: batch_size must be >= 1");

    const EigenSym es = eigh(hessian);
    const int n = hessian.rows();
    const double scale = eta / (2.0 * batch_size);
    Mat d(n, n);
    for (int k = 0; k < n; ++k) {
        const double lam = scale * std::abs(es.values[k]);
        for (int i = 0; i < n; ++i) {
            const double vik = es.vectors(i, k);
            if (vik == 0.0) continue;
            for (int j = 0; j < n; ++j) d(i, j) += lam * vik * es.vectors(j, k);
        }
    }
    return d;
}

EscapeTrial simulate_until_exit(const Landscape& landscape, const Vec& start,
                                const ValleyRegion& region, const StepperSpec& stepper,
                                const SimulateOptions& options, RngStream rng) {
    if (options.max_iters < 1)
        throw std::invalid_argument("simulate_until_exit: max_iters must be >= 1");
    if (!region.contains(start))
        throw std::invalid_argument("simulate_until_exit: start point is outside the region");

    Stepper s(landscape, stepper);
    TrajectoryState state{start, 0};
    if (options.observer) options.observer(0, landscape.loss(state.theta), state.theta);

    EscapeTrial trial;
    while (state.iteration < options.max_iters) {
        s.step(state, rng);

        bool finite = true;
        for (double t : state.theta) {
            if (!std::isfinite(t) || std::abs(t) > kDivergenceBound) {
                finite = false;
                break;
            }
        }
        if (!finite) {
            trial.iterations = state.iteration;
            trial.escaped = false;
            trial.valid = false;
            trial.dynamical_time = state.dynamical_time(s.eta());
            return trial;
        }

        if (options.observer && state.iteration % options.observer_stride == 0)
            options.observer(state.iteration, landscape.loss(state.theta), state.theta);

        if (!region.contains(state.theta)) {
            trial.iterations = state.iteration;
            trial.escaped = true;
            trial.valid = true;
            trial.dynamical_time = state.dynamical_time(s.eta());
            return trial;
        }
    }
    trial.iterations = state.iteration;
    trial.escaped = false;
    trial.valid = true;
    trial.dynamical_time = state.dynamical_time(s.eta());
    return trial;
}

EscapeTrial simulate_until_exit(const Landscape& landscape, const Vec& start,
                                const ValleyRegion& region, const StepperSpec& stepper,
                                std::int64_t max_iters, std::uint64_t seed) {
    SimulateOptions opt;
    opt.max_iters = max_iters;
    return simulate_until_exit(landscape, start, region, stepper, opt, RngStream(seed));
}

}  // namespace sgdlab
