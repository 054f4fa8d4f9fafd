#pragma once

#include <cstdint>
#include <vector>

#include "sgdlab/landscapes.hpp"
#include "sgdlab/linalg.hpp"

namespace sgdlab {

// Stochastic gradient noise samples at a fixed probe point: each draw is
// grad(theta) - minibatch_grad(theta, batch).
struct NoiseSampleSet {
    std::vector<Vec> draws;
    int batch_size = 0;
    Vec theta;

    int dim() const { return theta.empty() ? 0 : static_cast<int>(theta.size()); }
};

// Minibatches are uniform with-replacement draws; batch_size equal to the
// sample count means the exact full dataset (zero noise).
NoiseSampleSet draw_sgn(const Landscape& landscape, const Vec& theta, int batch_size,
                        int count, std::uint64_t seed);

// Unbiased sample covariance of the draws.
Mat estimate_sgn_covariance(const NoiseSampleSet& samples);

struct CovarianceFit {
    double pearson = 0.0;
    double slope = 0.0;  // least-squares slope of C elements on H/B elements
    int element_count = 0;
    double filter_low = 0.0;
    double filter_high = 0.0;
};

// Rotates both matrices into the eigenbasis of H, keeps element pairs with
// the H element inside [filter_low, filter_high] (the Fig-2 style window),
// and reports Pearson correlation plus the slope of C on H/B.
CovarianceFit covariance_hessian_fit(const Mat& covariance, const Mat& hessian, int batch_size,
                                     double filter_low = 1e-4, double filter_high = 0.5);

struct Histogram {
    double low = 0.0;
    double high = 0.0;
    double bin_width = 0.0;
    std::vector<std::int64_t> counts;
};

// Equal-width bins spanning [0, max norm].
Histogram norm_histogram(const std::vector<Vec>& vectors, int bin_count);

Vec norms_of(const std::vector<Vec>& vectors);

// Symmetric alpha-stable vectors via the Chambers-Mallows-Stuck transform;
// alpha = 2 coincides with a Gaussian of variance 2 scale^2.
std::vector<Vec> levy_sample(double alpha, double scale, int dim, int count,
                             std::uint64_t seed);

struct TailStats {
    double excess_kurtosis_of_log = 0.0;
    double max_over_median = 0.0;
};

// Heavy-tail summary of a norm sample (>= 100 values). Thresholding is left
// to callers.
TailStats tail_statistic(std::span<const double> norms);

}  // namespace sgdlab
