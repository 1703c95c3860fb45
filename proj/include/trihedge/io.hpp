#ifndef TRIHEDGE_IO_HPP
#define TRIHEDGE_IO_HPP

#include <filesystem>
#include <string>
#include <vector>

namespace trihedge::io {

/// Round-trip decimal formatting ("%.17g", '.' separator); the same value
/// always prints the same bytes, which the reproducibility checks rely on.
std::string format_double(double v);

/// Writes a CSV file: header row, '.' decimal separator, every row
/// newline-terminated.
void write_csv(const std::filesystem::path& path,
               const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct PlotSeries {
    std::string label;
    std::vector<double> x, y;
};

/// Minimal self-contained SVG line plot (axes, ticks, polyline per series).
/// log_x/log_y switch the respective axis to log10; nonpositive points are
/// dropped from log axes.
std::string svg_line_plot(const std::string& title, const std::string& x_label,
                          const std::string& y_label,
                          const std::vector<PlotSeries>& series, bool log_x,
                          bool log_y);

} // namespace trihedge::io

#endif // TRIHEDGE_IO_HPP
