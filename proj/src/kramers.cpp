#include "sgdlab/kramers.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "sgdlab/errors.hpp"
#include "sgdlab/landscapes.hpp"

namespace sgdlab {

namespace {

bool contains_eig(const Vec& eigs, double e) {
    for (double v : eigs) {
        const double scale = std::max({std::abs(v), std::abs(e), 1e-300});
        if (std::abs(v - e) <= 1e-9 * scale) return true;
    }
    return false;
}

}  // namespace

void validate(const ValleyGeometry& v) {
    if (v.hessian_eigs.empty())
        throw std::invalid_argument("ValleyGeometry: no eigenvalues");
    for (double e : v.hessian_eigs)
        if (e <= 0.0) throw std::invalid_argument("ValleyGeometry: eigenvalues must be positive");
    if (!contains_eig(v.hessian_eigs, v.escape_eig))
        throw std::invalid_argument("ValleyGeometry: escape_eig not among hessian_eigs");
}

void validate(const SaddleGeometry& s) {
    if (s.hessian_eigs.empty())
        throw std::invalid_argument("SaddleGeometry: no eigenvalues");
    int negatives = 0;
    for (double e : s.hessian_eigs) {
        if (e < 0.0) ++negatives;
        if (e == 0.0) throw std::invalid_argument("SaddleGeometry: zero eigenvalue");
    }
    if (negatives != 1)
        throw std::invalid_argument("SaddleGeometry: exactly one negative eigenvalue required");
    if (s.escape_eig >= 0.0 || !contains_eig(s.hessian_eigs, s.escape_eig))
        throw std::invalid_argument("SaddleGeometry: escape_eig must be the negative eigenvalue");
}

SgldPrediction sgld_escape_time(const ValleyGeometry& valley, const SaddleGeometry& saddle,
                                double barrier, double diffusion) {
    validate(valley);
    validate(saddle);
    if (barrier <= 0.0) throw std::invalid_argument("sgld_escape_time: barrier must be positive");
    if (diffusion <= 0.0) throw std::invalid_argument("sgld_escape_time: D must be positive");
    if (valley.hessian_eigs.size() != saddle.hessian_eigs.size())
        throw std::invalid_argument("sgld_escape_time: dimension mismatch");

    // log-space determinant ratio, stable for many eigenvalues
    double log_ratio = 0.0;
    for (double e : saddle.hessian_eigs) log_ratio += std::log(std::abs(e));
    for (double e : valley.hessian_eigs) log_ratio -= std::log(e);

    SgldPrediction out;
    out.barrier_over_d = barrier / diffusion;
    out.low_temperature = out.barrier_over_d >= kLowTemperatureThreshold;
    out.tau = 2.0 * std::numbers::pi * std::exp(0.5 * log_ratio) /
              std::abs(saddle.escape_eig) * std::exp(out.barrier_over_d);
    return out;
}

SgdPrediction sgd_escape_time(double h_ae, double h_be, double barrier, int batch_size,
                              double eta, double s) {
    if (h_ae <= 0.0) throw std::invalid_argument("sgd_escape_time: H_ae must be positive");
    if (h_be >= 0.0) throw std::invalid_argument("sgd_escape_time: H_be must be negative");
    if (barrier <= 0.0) throw std::invalid_argument("sgd_escape_time: barrier must be positive");
    if (batch_size < 1) throw std::invalid_argument("sgd_escape_time: batch_size must be >= 1");
    if (eta <= 0.0) throw std::invalid_argument("sgd_escape_time: eta must be positive");
    if (!(s > 0.0 && s < 1.0)) throw std::invalid_argument("sgd_escape_time: s must be in (0,1)");

    const double abs_hbe = std::abs(h_be);
    SgdPrediction out;
    out.exponent = (2.0 * batch_size * barrier / eta) * (s / h_ae + (1.0 - s) / abs_hbe);
    out.tau = 2.0 * std::numbers::pi / abs_hbe * std::exp(out.exponent);
    out.temperature_min = eta * h_ae / (2.0 * batch_size);
    out.temperature_saddle = eta * abs_hbe / (2.0 * batch_size);
    const double ratio_min =
        std::min(barrier / out.temperature_min, barrier / out.temperature_saddle);
    out.low_temperature = ratio_min >= kLowTemperatureThreshold;
    return out;
}

double combine_rates(std::span<const double> gammas) {
    if (gammas.empty()) throw std::invalid_argument("combine_rates: empty rate list");
    double total = 0.0;
    for (double g : gammas) {
        if (g <= 0.0) throw std::invalid_argument("combine_rates: rates must be positive");
        total += g;
    }
    return total;
}

Vec stationary_occupancy(std::span<const double> taus) {
    if (taus.empty()) throw std::invalid_argument("stationary_occupancy: empty list");
    double total = 0.0;
    for (double t : taus) {
        if (t <= 0.0) throw std::invalid_argument("stationary_occupancy: times must be positive");
        total += t;
    }
    Vec p(taus.size());
    for (std::size_t i = 0; i < taus.size(); ++i) p[i] = taus[i] / total;
    return p;
}

CriticalKind classify_critical(const Mat& hessian, double rel_tol) {
    if (!is_symmetric(hessian, 1e-8))
        throw std::invalid_argument("classify_critical: hessian must be symmetric");
    const EigenSym es = eigh(hessian);
    double max_abs = 0.0;
    for (double e : es.values) max_abs = std::max(max_abs, std::abs(e));
    const double tol = rel_tol * max_abs;

    int below = 0, above = 0;
    for (double e : es.values) {
        if (e < -tol) ++below;
        else if (e > tol) ++above;
    }
    const int n = static_cast<int>(es.values.size());
    if (below == 0 && above == n) return CriticalKind::minimum;
    if (below == 1 && above == n - 1) return CriticalKind::index1_saddle;
    return CriticalKind::other;
}

ValleyGeometry st_valley_geometry(int dim, double k) {
    if (dim < 1) throw std::invalid_argument("st_valley_geometry: dim must be >= 1");
    if (k <= 0.0) throw std::invalid_argument("st_valley_geometry: k must be positive");
    ValleyGeometry v;
    v.loss_at_min = dim * st::value_1d(st::kMinimum);
    v.hessian_eigs.assign(dim, k * st::hess_1d(st::kMinimum));
    v.escape_eig = v.hessian_eigs.front();
    return v;
}

SaddleGeometry st_saddle_geometry(int dim, double k) {
    if (dim < 1) throw std::invalid_argument("st_saddle_geometry: dim must be >= 1");
    if (k <= 0.0) throw std::invalid_argument("st_saddle_geometry: k must be positive");
    SaddleGeometry s;
    s.loss_at_saddle = st::value_1d(st::kSaddle) + (dim - 1) * st::value_1d(st::kMinimum);
    s.hessian_eigs.assign(dim, k * st::hess_1d(st::kMinimum));
    s.hessian_eigs.front() = k * st::hess_1d(st::kSaddle);
    s.escape_eig = s.hessian_eigs.front();
    return s;
}

}  // namespace sgdlab
