#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sgdlab/escape_mc.hpp"
#include "sgdlab/noise_lab.hpp"

namespace sgdlab {

inline constexpr const char* kToolVersion = "sgdlab 0.1.0";

// Shortest round-trip decimal representation; locale-free and deterministic,
// so replayed runs produce byte-identical artifacts.
std::string format_double(double v);

std::string csv_join(std::span<const std::string> cells);

void write_text_file(const std::string& path, const std::string& contents);

struct PlotPoint {
    double x = 0.0;
    double y = 0.0;
    double y_low = 0.0;   // CI whisker ends; equal to y for none
    double y_high = 0.0;
    bool flagged = false;
};

struct PlotStyle {
    std::string x_label;
    std::string y_label;
    std::string title;
};

// Scatter with CI whiskers and the fitted line, Pearson r annotated.
// Flagged points are drawn hollow and excluded from the fit; a degenerate
// axis range is padded by 10% each side.
std::string render_fit_plot(std::span<const PlotPoint> points, const FitResult* fit,
                            const PlotStyle& style);

struct HistogramSeries {
    std::string label;
    Histogram histogram;
};

// Overlaid step-outline histograms (counts normalized per series).
std::string render_histogram_plot(std::span<const HistogramSeries> series,
                                  const PlotStyle& style);

// Paired bars (measured vs predicted) for occupancy fractions.
std::string render_bar_plot(std::span<const std::string> labels,
                            std::span<const double> measured,
                            std::span<const double> predicted, const PlotStyle& style);

// Buffers trajectory snapshots as CSV rows (iteration, loss, theta_0..);
// plug `observer()` into SimulateOptions and write `csv()` afterwards.
class TrajectoryCsvBuffer {
public:
    explicit TrajectoryCsvBuffer(int dim);
    TrajectoryObserver observer();
    const std::string& csv() const { return csv_; }

private:
    std::string csv_;
};

}  // namespace sgdlab
