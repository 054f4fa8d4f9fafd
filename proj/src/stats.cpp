#include "sgdlab/stats.hpp"

#include <algorithm>
#include <cmath>

#include "sgdlab/errors.hpp"

namespace sgdlab {

double mean(std::span<const double> xs) {
    if (xs.empty()) throw insufficient_data_error("mean: empty input");
    double s = 0.0;
    for (double x : xs) s += x;
    return s / static_cast<double>(xs.size());
}

double variance(std::span<const double> xs) {
    if (xs.size() < 2) throw insufficient_data_error("variance: need >= 2 values");
    const double mu = mean(xs);
    double s = 0.0;
    for (double x : xs) s += (x - mu) * (x - mu);
    return s / static_cast<double>(xs.size() - 1);
}

double median(std::span<const double> xs) {
    if (xs.empty()) throw insufficient_data_error("median: empty input");
    std::vector<double> v(xs.begin(), xs.end());
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    if (n % 2 == 1) return v[n / 2];
    return 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double excess_kurtosis(std::span<const double> xs) {
    if (xs.size() < 4) throw insufficient_data_error("excess_kurtosis: need >= 4 values");
    const double mu = mean(xs);
    double m2 = 0.0, m4 = 0.0;
    for (double x : xs) {
        const double d = x - mu;
        m2 += d * d;
        m4 += d * d * d * d;
    }
    const double n = static_cast<double>(xs.size());
    m2 /= n;
    m4 /= n;
    if (m2 == 0.0) throw numerical_error("excess_kurtosis: zero variance");
    return m4 / (m2 * m2) - 3.0;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("pearson: length mismatch");
    if (xs.size() < 2) throw insufficient_data_error("pearson: need >= 2 pairs");
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0)
        throw insufficient_data_error("pearson: degenerate axis (zero variance)");
    return sxy / std::sqrt(sxx * syy);
}

LinearFit least_squares(std::span<const double> xs, std::span<const double> ys) {
    if (xs.size() != ys.size()) throw std::invalid_argument("least_squares: length mismatch");
    if (xs.size() < 2) throw insufficient_data_error("least_squares: need >= 2 pairs");
    const double mx = mean(xs), my = mean(ys);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0) throw insufficient_data_error("least_squares: x axis has zero variance");
    LinearFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.pearson = (syy == 0.0) ? 1.0 : sxy / std::sqrt(sxx * syy);
    return fit;
}

}  // namespace sgdlab
