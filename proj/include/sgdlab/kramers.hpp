#pragma once

#include <span>

#include "sgdlab/linalg.hpp"

namespace sgdlab {

// Spectral data of a loss valley: Hessian eigenvalues at the minimum plus
// the eigenvalue along the escape direction.
struct ValleyGeometry {
    double loss_at_min = 0.0;
    Vec hessian_eigs;       // all positive
    double escape_eig = 0.0;  // member of hessian_eigs
};

// Spectral data at an index-1 saddle; escape_eig is the unique negative
// eigenvalue.
struct SaddleGeometry {
    double loss_at_saddle = 0.0;
    Vec hessian_eigs;
    double escape_eig = 0.0;
};

void validate(const ValleyGeometry& v);
void validate(const SaddleGeometry& s);

inline double barrier_of(const ValleyGeometry& v, const SaddleGeometry& s) {
    return s.loss_at_saddle - v.loss_at_min;
}

// Predictions below delta_l / temperature = 6 leave the low-temperature
// regime where the closed forms are accurate; they are flagged, never
// refused.
inline constexpr double kLowTemperatureThreshold = 6.0;

struct SgldPrediction {
    double tau = 0.0;           // mean escape time in dynamical-time units
    double barrier_over_d = 0.0;
    bool low_temperature = false;  // barrier_over_d >= 6
};

// tau = 2 pi sqrt(-det H_b / det H_a) (1 / |H_be|) exp(dL / D)
SgldPrediction sgld_escape_time(const ValleyGeometry& valley, const SaddleGeometry& saddle,
                                double barrier, double diffusion);

struct SgdPrediction {
    double tau = 0.0;
    double exponent = 0.0;
    double temperature_min = 0.0;     // T_a = eta H_ae / 2B
    double temperature_saddle = 0.0;  // T_b = eta |H_be| / 2B
    bool low_temperature = false;     // min(dL/T_a, dL/T_b) >= 6
};

// tau = 2 pi (1 / |H_be|) exp[(2 B dL / eta) (s / H_ae + (1 - s) / |H_be|)]
SgdPrediction sgd_escape_time(double h_ae, double h_be, double barrier, int batch_size,
                              double eta, double s);

// Rule for parallel escape paths: rates add.
double combine_rates(std::span<const double> gammas);

// P(theta in V_v) = tau_v / sum tau
Vec stationary_occupancy(std::span<const double> taus);

enum class CriticalKind { minimum, index1_saddle, other };

// Counts eigenvalues below -tol and above +tol, with tol relative to the
// largest eigenvalue magnitude.
CriticalKind classify_critical(const Mat& hessian, double rel_tol = 1e-6);

// Analytic Styblinski-Tang geometries under sharpness rescaling by k:
// the valley at the all-minima corner and the adjacent saddle with one
// coordinate over the barrier top.
ValleyGeometry st_valley_geometry(int dim, double k = 1.0);
SaddleGeometry st_saddle_geometry(int dim, double k = 1.0);

}  // namespace sgdlab
