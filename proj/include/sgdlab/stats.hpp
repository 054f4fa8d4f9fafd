#pragma once

#include <span>
#include <vector>

namespace sgdlab {

double mean(std::span<const double> xs);
double variance(std::span<const double> xs);  // unbiased, needs >= 2 values
double median(std::span<const double> xs);
double excess_kurtosis(std::span<const double> xs);

// Pearson correlation of paired samples; throws insufficient_data_error for
// fewer than two pairs or zero variance on either axis.
double pearson(std::span<const double> xs, std::span<const double> ys);

struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double pearson = 0.0;
};

LinearFit least_squares(std::span<const double> xs, std::span<const double> ys);

}  // namespace sgdlab
