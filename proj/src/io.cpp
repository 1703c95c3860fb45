#include "trihedge/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "trihedge/errors.hpp"

namespace trihedge::io {

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path, std::ios::binary); // fixed '\n' on every platform
    if (!out) throw ConfigError("write_csv: cannot open " + path.string());
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (i) out << ',';
        out << header[i];
    }
    out << '\n';
    for (const auto& row : rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out << ',';
            out << row[i];
        }
        out << '\n';
    }
    if (!out) throw ConfigError("write_csv: write failed for " + path.string());
}

namespace {

struct AxisScale {
    double lo, hi;
    bool log;

    double to_unit(double v) const {
        const double a = log ? std::log10(lo) : lo;
        const double b = log ? std::log10(hi) : hi;
        const double x = log ? std::log10(v) : v;
        return b > a ? (x - a) / (b - a) : 0.5;
    }
};

std::string tick_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3g", v);
    return buf;
}

std::vector<double> make_ticks(const AxisScale& axis) {
    std::vector<double> ticks;
    if (axis.log) {
        const int e0 = static_cast<int>(std::floor(std::log10(axis.lo)));
        const int e1 = static_cast<int>(std::ceil(std::log10(axis.hi)));
        for (int e = e0; e <= e1; ++e) {
            const double v = std::pow(10.0, e);
            if (v >= axis.lo * 0.999 && v <= axis.hi * 1.001) ticks.push_back(v);
        }
        if (ticks.empty()) ticks = {axis.lo, axis.hi};
    } else {
        for (int i = 0; i <= 4; ++i)
            ticks.push_back(axis.lo + (axis.hi - axis.lo) * i / 4.0);
    }
    return ticks;
}

} // namespace

std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<PlotSeries>& series, bool log_x,
                          bool log_y) {
    constexpr double W = 640, H = 440;
    constexpr double ML = 80, MR = 24, MT = 40, MB = 56;
    const double plot_w = W - ML - MR, plot_h = H - MT - MB;

    double x_lo = 1e300, x_hi = -1e300, y_lo = 1e300, y_hi = -1e300;
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            const double x = s.x[i], y = s.y[i];
            if ((log_x && !(x > 0.0)) || (log_y && !(y > 0.0))) continue;
            x_lo = std::min(x_lo, x);
            x_hi = std::max(x_hi, x);
            y_lo = std::min(y_lo, y);
            y_hi = std::max(y_hi, y);
        }
    if (!(x_lo <= x_hi)) {
        x_lo = log_x ? 1.0 : 0.0;
        x_hi = log_x ? 10.0 : 1.0;
    }
    if (!(y_lo <= y_hi)) {
        y_lo = log_y ? 1.0 : 0.0;
        y_hi = log_y ? 10.0 : 1.0;
    }
    if (x_lo == x_hi) {
        x_lo *= log_x ? 0.5 : 1.0;
        x_hi = log_x ? x_hi * 2.0 : x_hi + 1.0;
    }
    if (y_lo == y_hi) {
        y_lo *= log_y ? 0.5 : 1.0;
        y_hi = log_y ? y_hi * 2.0 : y_hi + 1.0;
    }
    const AxisScale xs{x_lo, x_hi, log_x};
    const AxisScale ys{y_lo, y_hi, log_y};
    auto px = [&](double v) { return ML + xs.to_unit(v) * plot_w; };
    auto py = [&](double v) { return MT + (1.0 - ys.to_unit(v)) * plot_h; };

    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\" viewBox=\"0 0 " << W << " " << H << "\">\n";
    svg << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\" "
        << "font-family=\"sans-serif\">" << title << "</text>\n";
    // axes
    svg << "<line x1=\"" << ML << "\" y1=\"" << MT + plot_h << "\" x2=\"" << ML + plot_w
        << "\" y2=\"" << MT + plot_h << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ML << "\" y1=\"" << MT << "\" x2=\"" << ML << "\" y2=\""
        << MT + plot_h << "\" stroke=\"black\"/>\n";
    for (double t : make_ticks(xs)) {
        const double x = px(t);
        svg << "<line x1=\"" << x << "\" y1=\"" << MT + plot_h << "\" x2=\"" << x << "\" y2=\""
            << MT + plot_h + 5 << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << x << "\" y=\"" << MT + plot_h + 20
            << "\" text-anchor=\"middle\" font-size=\"11\" font-family=\"sans-serif\">"
            << tick_label(t) << "</text>\n";
    }
    for (double t : make_ticks(ys)) {
        const double y = py(t);
        svg << "<line x1=\"" << ML - 5 << "\" y1=\"" << y << "\" x2=\"" << ML << "\" y2=\"" << y
            << "\" stroke=\"black\"/>\n";
        svg << "<text x=\"" << ML - 8 << "\" y=\"" << y + 4
            << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\">"
            << tick_label(t) << "</text>\n";
    }
    svg << "<text x=\"" << ML + plot_w / 2 << "\" y=\"" << H - 12
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">" << x_label
        << "</text>\n";
    svg << "<text x=\"18\" y=\"" << MT + plot_h / 2
        << "\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\" "
        << "transform=\"rotate(-90 18 " << MT + plot_h / 2 << ")\">" << y_label << "</text>\n";

    for (std::size_t s = 0; s < series.size(); ++s) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            const double x = series[s].x[i], y = series[s].y[i];
            if ((log_x && !(x > 0.0)) || (log_y && !(y > 0.0))) continue;
            pts << px(x) << ',' << py(y) << ' ';
        }
        const char* color = colors[s % 4];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\""
            << pts.str() << "\"/>\n";
        for (std::size_t i = 0; i < series[s].x.size(); ++i) {
            const double x = series[s].x[i], y = series[s].y[i];
            if ((log_x && !(x > 0.0)) || (log_y && !(y > 0.0))) continue;
            svg << "<circle cx=\"" << px(x) << "\" cy=\"" << py(y) << "\" r=\"3\" fill=\"" << color
                << "\"/>\n";
        }
        if (!series[s].label.empty())
            svg << "<text x=\"" << ML + plot_w - 6 << "\" y=\"" << MT + 16 + 16 * s
                << "\" text-anchor=\"end\" font-size=\"12\" font-family=\"sans-serif\" fill=\""
                << color << "\">" << series[s].label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

} // namespace trihedge::io
