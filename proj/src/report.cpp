#include "sgdlab/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace sgdlab {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw std::runtime_error("format_double: to_chars failed");
    return std::string(buf, ptr);
}

std::string csv_join(std::span<const std::string> cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) line += ',';
        line += cells[i];
    }
    line += '\n';
    return line;
}

void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + path);
}

namespace {

constexpr int kWidth = 800, kHeight = 600;
constexpr int kLeft = 80, kRight = 30, kTop = 50, kBottom = 70;

struct AxisMap {
    double x0, x1, y0, y1;
    double px(double x) const {
        return kLeft + (x - x0) / (x1 - x0) * (kWidth - kLeft - kRight);
    }
    double py(double y) const {
        return kHeight - kBottom - (y - y0) / (y1 - y0) * (kHeight - kTop - kBottom);
    }
};

void pad_range(double& lo, double& hi) {
    if (lo == hi) {
        const double pad = lo == 0.0 ? 1.0 : std::abs(lo) * 0.1;
        lo -= pad;
        hi += pad;
    } else {
        const double pad = (hi - lo) * 0.07;
        lo -= pad;
        hi += pad;
    }
}

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

void svg_open(std::ostringstream& s, const PlotStyle& style) {
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n";
    s << "<!-- " << kToolVersion << " -->\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!style.title.empty())
        s << "<text x=\"" << kWidth / 2 << "\" y=\"28\" text-anchor=\"middle\" "
          << "font-family=\"sans-serif\" font-size=\"17\">" << style.title << "</text>\n";
}

void svg_axes(std::ostringstream& s, const AxisMap& m, const PlotStyle& style) {
    s << "<line x1=\"" << kLeft << "\" y1=\"" << kHeight - kBottom << "\" x2=\""
      << kWidth - kRight << "\" y2=\"" << kHeight - kBottom
      << "\" stroke=\"black\" stroke-width=\"1.2\"/>\n";
    s << "<line x1=\"" << kLeft << "\" y1=\"" << kTop << "\" x2=\"" << kLeft << "\" y2=\""
      << kHeight - kBottom << "\" stroke=\"black\" stroke-width=\"1.2\"/>\n";
    const int ticks = 5;
    for (int i = 0; i <= ticks; ++i) {
        const double fx = m.x0 + (m.x1 - m.x0) * i / ticks;
        const double fy = m.y0 + (m.y1 - m.y0) * i / ticks;
        const double px = m.px(fx), py = m.py(fy);
        s << "<line x1=\"" << px << "\" y1=\"" << kHeight - kBottom << "\" x2=\"" << px
          << "\" y2=\"" << kHeight - kBottom + 6 << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << px << "\" y=\"" << kHeight - kBottom + 22
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
          << fmt_tick(fx) << "</text>\n";
        s << "<line x1=\"" << kLeft - 6 << "\" y1=\"" << py << "\" x2=\"" << kLeft << "\" y2=\""
          << py << "\" stroke=\"black\"/>\n";
        s << "<text x=\"" << kLeft - 10 << "\" y=\"" << py + 4
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\">" << fmt_tick(fy)
          << "</text>\n";
    }
    s << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - 20
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
      << style.x_label << "</text>\n";
    s << "<text x=\"22\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\" "
      << "transform=\"rotate(-90 22 " << (kTop + kHeight - kBottom) / 2 << ")\">"
      << style.y_label << "</text>\n";
}

}  // namespace

std::string render_fit_plot(std::span<const PlotPoint> points, const FitResult* fit,
                            const PlotStyle& style) {
    if (points.size() < 2)
        throw std::invalid_argument("render_fit_plot: need >= 2 points");

    double x0 = points[0].x, x1 = points[0].x;
    double y0 = points[0].y, y1 = points[0].y;
    bool any_unflagged = false;
    for (const PlotPoint& p : points) {
        x0 = std::min(x0, p.x);
        x1 = std::max(x1, p.x);
        if (p.flagged) continue;
        any_unflagged = true;
        y0 = std::min({y0, p.y, p.y_low});
        y1 = std::max({y1, p.y, p.y_high});
    }
    pad_range(x0, x1);
    pad_range(y0, y1);
    AxisMap m{x0, x1, y0, y1};

    std::ostringstream s;
    svg_open(s, style);
    svg_axes(s, m, style);

    if (fit != nullptr) {
        const double fy0 = fit->intercept + fit->slope * x0;
        const double fy1 = fit->intercept + fit->slope * x1;
        s << "<line x1=\"" << m.px(x0) << "\" y1=\"" << m.py(fy0) << "\" x2=\"" << m.px(x1)
          << "\" y2=\"" << m.py(fy1) << "\" stroke=\"#c03030\" stroke-width=\"1.6\"/>\n";
        s << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 18
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"14\">r = "
          << fmt_tick(fit->pearson) << "</text>\n";
    }

    bool any_flagged = false;
    for (const PlotPoint& p : points) {
        if (p.flagged) {
            any_flagged = true;
            s << "<circle cx=\"" << m.px(p.x) << "\" cy=\"" << m.py((y0 + y1) / 2)
              << "\" r=\"4\" fill=\"none\" stroke=\"#999999\"/>\n";
            continue;
        }
        if (p.y_high > p.y_low) {
            s << "<line x1=\"" << m.px(p.x) << "\" y1=\"" << m.py(p.y_low) << "\" x2=\""
              << m.px(p.x) << "\" y2=\"" << m.py(p.y_high)
              << "\" stroke=\"#3050c0\" stroke-width=\"1.2\"/>\n";
        }
        s << "<circle cx=\"" << m.px(p.x) << "\" cy=\"" << m.py(p.y)
          << "\" r=\"4\" fill=\"#3050c0\"/>\n";
    }
    if (any_flagged || !any_unflagged)
        s << "<text x=\"" << kLeft + 8 << "\" y=\"" << kTop + 18
          << "\" font-family=\"sans-serif\" font-size=\"13\" fill=\"#b06000\">"
          << "warning: flagged grid points excluded</text>\n";

    s << "</svg>\n";
    return s.str();
}

std::string render_histogram_plot(std::span<const HistogramSeries> series,
                                  const PlotStyle& style) {
    if (series.empty()) throw std::invalid_argument("render_histogram_plot: no series");
    static const char* kColors[] = {"#3050c0", "#c03030", "#208040", "#b06000"};

    double xmax = 0.0, ymax = 0.0;
    for (const auto& sr : series) {
        xmax = std::max(xmax, sr.histogram.high);
        std::int64_t total = 0;
        for (auto c : sr.histogram.counts) total += c;
        for (auto c : sr.histogram.counts)
            ymax = std::max(ymax, total > 0 ? static_cast<double>(c) / total : 0.0);
    }
    double x0 = 0.0, y0 = 0.0;
    pad_range(x0, xmax);
    pad_range(y0, ymax);
    x0 = 0.0;
    y0 = 0.0;
    AxisMap m{x0, xmax, y0, ymax};

    std::ostringstream s;
    svg_open(s, style);
    svg_axes(s, m, style);

    for (std::size_t k = 0; k < series.size(); ++k) {
        const Histogram& h = series[k].histogram;
        std::int64_t total = 0;
        for (auto c : h.counts) total += c;
        if (total == 0) continue;
        s << "<polyline fill=\"none\" stroke=\"" << kColors[k % 4]
          << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t b = 0; b < h.counts.size(); ++b) {
            const double lo = h.low + b * h.bin_width;
            const double hi = lo + h.bin_width;
            const double frac = static_cast<double>(h.counts[b]) / total;
            s << m.px(lo) << "," << m.py(frac) << " " << m.px(hi) << "," << m.py(frac) << " ";
        }
        s << "\"/>\n";
        s << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 18 + 16 * k
          << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\" fill=\""
          << kColors[k % 4] << "\">" << series[k].label << "</text>\n";
    }
    s << "</svg>\n";
    return s.str();
}

TrajectoryCsvBuffer::TrajectoryCsvBuffer(int dim) {
    csv_ = "iteration,loss";
    for (int i = 0; i < dim; ++i) csv_ += ",theta_" + std::to_string(i);
    csv_ += '\n';
}

TrajectoryObserver TrajectoryCsvBuffer::observer() {
    return [this](std::int64_t iteration, double loss, std::span<const double> theta) {
        csv_ += std::to_string(iteration);
        csv_ += ',';
        csv_ += format_double(loss);
        for (double t : theta) {
            csv_ += ',';
            csv_ += format_double(t);
        }
        csv_ += '\n';
    };
}

std::string render_bar_plot(std::span<const std::string> labels,
                            std::span<const double> measured,
                            std::span<const double> predicted, const PlotStyle& style) {
    if (labels.size() != measured.size() || labels.size() != predicted.size())
        throw std::invalid_argument("render_bar_plot: length mismatch");
    double ymax = 0.0;
    for (double v : measured) ymax = std::max(ymax, v);
    for (double v : predicted) ymax = std::max(ymax, v);
    double y0 = 0.0;
    pad_range(y0, ymax);
    AxisMap m{0.0, static_cast<double>(labels.size()), 0.0, ymax};

    std::ostringstream s;
    svg_open(s, style);
    svg_axes(s, m, style);
    const double slot = (kWidth - kLeft - kRight) / static_cast<double>(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double xm = kLeft + slot * i + slot * 0.2;
        const double xp = kLeft + slot * i + slot * 0.55;
        const double wm = slot * 0.3;
        s << "<rect x=\"" << xm << "\" y=\"" << m.py(measured[i]) << "\" width=\"" << wm
          << "\" height=\"" << m.py(0) - m.py(measured[i]) << "\" fill=\"#3050c0\"/>\n";
        s << "<rect x=\"" << xp << "\" y=\"" << m.py(predicted[i]) << "\" width=\"" << wm
          << "\" height=\"" << m.py(0) - m.py(predicted[i]) << "\" fill=\"#c03030\"/>\n";
        s << "<text x=\"" << kLeft + slot * i + slot / 2 << "\" y=\"" << kHeight - kBottom + 40
          << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">" << labels[i]
          << "</text>\n";
    }
    s << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 18
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\" "
      << "fill=\"#3050c0\">measured</text>\n";
    s << "<text x=\"" << kWidth - kRight - 8 << "\" y=\"" << kTop + 34
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"13\" "
      << "fill=\"#c03030\">predicted</text>\n";
    s << "</svg>\n";
    return s.str();
}

}  // namespace sgdlab
