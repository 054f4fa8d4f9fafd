#include "sgdlab/noise_lab.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sgdlab/errors.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/stats.hpp"

namespace sgdlab {

NoiseSampleSet draw_sgn(const Landscape& landscape, const Vec& theta, int batch_size,
                        int count, std::uint64_t seed) {
    const int m = landscape.sample_count();
    if (m == 0) throw std::invalid_argument("draw_sgn: landscape has no per-sample structure");
    if (batch_size < 1) throw std::invalid_argument("draw_sgn: batch_size must be >= 1");
    if (batch_size > m) throw std::invalid_argument("draw_sgn: batch_size exceeds sample count");
    if (count < 1) throw std::invalid_argument("draw_sgn: count must be >= 1");

    NoiseSampleSet set;
    set.batch_size = batch_size;
    set.theta = theta;
    set.draws.reserve(count);

    const Vec full = landscape.grad_v(theta);

    RngStream rng(seed, /*idx_a=*/0x5617ULL);
    std::vector<int> batch(batch_size);
    Vec g(landscape.dim());
    for (int k = 0; k < count; ++k) {
        if (batch_size == m) {
            for (int j = 0; j < m; ++j) batch[j] = j;  // the exact full dataset
        } else {
            for (int& idx : batch)
                idx = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(m)));
        }
        landscape.minibatch_grad(theta, batch, g);
        Vec draw(landscape.dim());
        for (int i = 0; i < landscape.dim(); ++i) draw[i] = full[i] - g[i];
        set.draws.push_back(std::move(draw));
    }
    return set;
}

Mat estimate_sgn_covariance(const NoiseSampleSet& samples) {
    const int n = samples.dim();
    const int count = static_cast<int>(samples.draws.size());
    if (count < 2) throw std::invalid_argument("estimate_sgn_covariance: need >= 2 draws");

    Vec mean_draw(n, 0.0);
    for (const Vec& d : samples.draws) axpy(1.0, d, mean_draw);
    for (double& v : mean_draw) v /= count;

    Mat cov(n, n);
    Vec centered(n);
    for (const Vec& d : samples.draws) {
        for (int i = 0; i < n; ++i) centered[i] = d[i] - mean_draw[i];
        for (int i = 0; i < n; ++i) {
            const double ci = centered[i];
            for (int j = i; j < n; ++j) cov(i, j) += ci * centered[j];
        }
    }
    const double inv = 1.0 / static_cast<double>(count - 1);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            cov(i, j) *= inv;
            cov(j, i) = cov(i, j);
        }
    return cov;
}

CovarianceFit covariance_hessian_fit(const Mat& covariance, const Mat& hessian, int batch_size,
                                     double filter_low, double filter_high) {
    if (covariance.rows() != hessian.rows() || covariance.cols() != hessian.cols())
        throw std::invalid_argument("covariance_hessian_fit: dimension mismatch");
    if (!is_symmetric(covariance, 1e-6) || !is_symmetric(hessian, 1e-6))
        throw std::invalid_argument("covariance_hessian_fit: inputs must be symmetric");
    if (batch_size < 1)
        throw std::invalid_argument("covariance_hessian_fit: batch_size must be >= 1");
    if (!(filter_low < filter_high))
        throw std::invalid_argument("covariance_hessian_fit: bad filter range");

    const EigenSym es = eigh(hessian);
    const Mat h_rot = congruence(hessian, es.vectors);
    const Mat c_rot = congruence(covariance, es.vectors);

    Vec hs, cs;
    for (int i = 0; i < h_rot.rows(); ++i)
        for (int j = i; j < h_rot.cols(); ++j) {
            const double h = h_rot(i, j);
            if (h >= filter_low && h <= filter_high) {
                hs.push_back(h);
                cs.push_back(c_rot(i, j));
            }
        }
    if (hs.size() < 2)
        throw insufficient_data_error(
            "covariance_hessian_fit: fewer than 2 elements survive the filter");

    Vec h_over_b(hs.size());
    for (std::size_t i = 0; i < hs.size(); ++i) h_over_b[i] = hs[i] / batch_size;

    CovarianceFit fit;
    fit.pearson = pearson(hs, cs);
    fit.slope = least_squares(h_over_b, cs).slope;
    fit.element_count = static_cast<int>(hs.size());
    fit.filter_low = filter_low;
    fit.filter_high = filter_high;
    return fit;
}

Vec norms_of(const std::vector<Vec>& vectors) {
    Vec out(vectors.size());
    for (std::size_t i = 0; i < vectors.size(); ++i) out[i] = norm2(vectors[i]);
    return out;
}

Histogram norm_histogram(const std::vector<Vec>& vectors, int bin_count) {
    if (vectors.empty()) throw std::invalid_argument("norm_histogram: empty input");
    if (bin_count < 2) throw std::invalid_argument("norm_histogram: bin_count must be >= 2");

    const Vec ns = norms_of(vectors);
    Histogram h;
    h.low = 0.0;
    h.high = *std::max_element(ns.begin(), ns.end());
    h.counts.assign(bin_count, 0);
    h.bin_width = h.high / bin_count;
    if (h.high == 0.0) {
        h.counts[0] = static_cast<std::int64_t>(ns.size());
        return h;
    }
    for (double v : ns) {
        int idx = static_cast<int>(v / h.high * bin_count);
        if (idx >= bin_count) idx = bin_count - 1;
        ++h.counts[idx];
    }
    return h;
}

std::vector<Vec> levy_sample(double alpha, double scale, int dim, int count,
                             std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha <= 2.0))
        throw std::invalid_argument("levy_sample: alpha must be in (0, 2]");
    if (scale < 0.0) throw std::invalid_argument("levy_sample: scale must be >= 0");
    if (dim < 1) throw std::invalid_argument("levy_sample: dim must be >= 1");
    if (count < 1) throw std::invalid_argument("levy_sample: count must be >= 1");

    RngStream rng(seed, /*idx_a=*/0xa15aULL);
    std::vector<Vec> out(count, Vec(dim));
    for (Vec& v : out)
        for (double& x : v) {
            const double u = std::numbers::pi * (rng.uniform() - 0.5);  // (-pi/2, pi/2)
            const double w = -std::log(rng.uniform_pos());              // Exp(1)
            double s;
            if (alpha == 1.0) {
                s = std::tan(u);
            } else {
                s = std::sin(alpha * u) / std::pow(std::cos(u), 1.0 / alpha) *
                    std::pow(std::cos((1.0 - alpha) * u) / w, (1.0 - alpha) / alpha);
            }
            x = scale * s;
        }
    return out;
}

TailStats tail_statistic(std::span<const double> norms) {
    if (norms.size() < 100)
        throw insufficient_data_error("tail_statistic: need >= 100 norms");

    TailStats out;
    const double max_norm = *std::max_element(norms.begin(), norms.end());
    const double med = median(norms);
    if (max_norm == 0.0)
        out.max_over_median = 1.0;  // all-zero norms: a constant sample
    else
        out.max_over_median = max_norm / med;

    Vec logs;
    logs.reserve(norms.size());
    for (double v : norms)
        if (v > 0.0) logs.push_back(std::log(v));
    if (logs.size() < 4) {
        out.excess_kurtosis_of_log = 0.0;
        return out;
    }
    const double var = variance(logs);
    out.excess_kurtosis_of_log = var == 0.0 ? 0.0 : excess_kurtosis(logs);
    return out;
}

}  // namespace sgdlab
