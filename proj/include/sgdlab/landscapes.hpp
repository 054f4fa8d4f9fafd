#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sgdlab/linalg.hpp"

namespace sgdlab {

// Synthetic dataset description. Regeneration from the seed is bit-exact,
// so experiments persist only this record, never raw sample files.
struct DatasetSpec {
    int samples = 5000;
    int input_dim = 10;
    std::uint64_t seed = 0;
    std::string label_rule = "random-binary";
};

struct Dataset {
    DatasetSpec spec;
    std::vector<double> x;       // samples * input_dim, row-major
    std::vector<std::int8_t> y;  // binary labels, balanced by construction

    std::span<const double> sample(int j) const {
        return {x.data() + static_cast<std::size_t>(j) * spec.input_dim,
                static_cast<std::size_t>(spec.input_dim)};
    }
};

// Gaussian N(0, I) inputs and a balanced shuffled 0/1 label vector.
Dataset generate_dataset(const DatasetSpec& spec);

// A differentiable loss surface. Implementations are immutable after
// construction; all evaluators are safe for concurrent use.
class Landscape {
public:
    virtual ~Landscape() = default;

    virtual int dim() const = 0;

    // 0 for purely analytic surfaces without per-sample structure.
    virtual int sample_count() const { return 0; }

    virtual double loss(std::span<const double> theta) const = 0;
    virtual void grad(std::span<const double> theta, std::span<double> out) const = 0;

    // Mean of per-sample gradients over `batch`, accumulated in index order
    // so the full index set reproduces grad() bit-for-bit. Analytic surfaces
    // ignore the batch and return grad().
    virtual void minibatch_grad(std::span<const double> theta, std::span<const int> batch,
                                std::span<double> out) const;

    virtual Mat hessian(std::span<const double> theta) const = 0;

    Vec grad_v(std::span<const double> theta) const {
        Vec g(dim());
        grad(theta, g);
        return g;
    }
    Vec minibatch_grad_v(std::span<const double> theta, std::span<const int> batch) const {
        Vec g(dim());
        minibatch_grad(theta, batch, g);
        return g;
    }
};

using LandscapePtr = std::shared_ptr<const Landscape>;

// Styblinski-Tang: loss(theta) = 1/2 sum_i (theta_i^4 - 16 theta_i^2 + 5 theta_i).
// Separable; the Hessian is diagonal with entries 6 theta_i^2 - 16.
LandscapePtr st_landscape(int dim);

// Per-dimension critical points of the Styblinski-Tang polynomial.
namespace st {
inline constexpr double kMinimum = -2.903534;       // global minimum per dimension
inline constexpr double kSaddle = 0.156731;         // barrier top between valleys
inline constexpr double kSecondMinimum = 2.746803;  // shallower minimum
double value_1d(double t);                          // 1/2 (t^4 - 16 t^2 + 5 t)
double grad_1d(double t);                           // 2 t^3 - 16 t + 5/2
double hess_1d(double t);                           // 6 t^2 - 16
double barrier_height();                            // value(saddle) - value(minimum)
}  // namespace st

// Training-style Styblinski-Tang: per-sample loss f(theta - x_j) with
// Gaussian shifts x_j, full loss the mean over the dataset.
LandscapePtr shifted_st_landscape(int dim, const DatasetSpec& dataset);

// Mean cross-entropy of the linear logit theta . x. Analytic Hessian
// (sigma (1 - sigma) weighted outer products).
LandscapePtr logistic_landscape(const DatasetSpec& dataset);

enum class Activation { relu, tanh };

// Fully-connected binary classifier with `depth` affine layers of hidden
// width `width` and a scalar output logit; mean sigmoid cross-entropy.
// Gradients are exact backprop; the Hessian is a symmetrized central
// difference of the gradient (coordinate steps 1e-4 * (1 + |theta_i|)),
// approximate across ReLU kinks, smooth for tanh.
LandscapePtr mlp_landscape(const DatasetSpec& dataset, int width, int depth,
                           Activation activation);

// 1/2 theta^T diag(h) theta
LandscapePtr quadratic_landscape(Vec diag_h);

// Asymmetric 1-D double well: h (theta^2 - 1)^2 + tilt * theta.
LandscapePtr double_well_landscape(double h, double tilt);

// Sharpness rescaling: loss(theta) = base.loss(sqrt(k) * theta), so the
// Hessian picks up a factor k.
LandscapePtr rescale(LandscapePtr base, double k);

// Symmetrized central finite differences of grad(); coordinate step
// step * (1 + |theta_i|).
Mat hessian_fd(const Landscape& landscape, std::span<const double> theta, double step);

// Plain full-batch gradient descent until ||grad||_2 <= grad_tol. Used to
// place probes at converged minima before noise measurements.
struct PretrainResult {
    Vec theta;
    double grad_norm = 0.0;
    std::int64_t iterations = 0;
    bool converged = false;
};
PretrainResult pretrain_to_critical(const Landscape& landscape, Vec start, double eta,
                                    double grad_tol, std::int64_t max_iters);

}  // namespace sgdlab
