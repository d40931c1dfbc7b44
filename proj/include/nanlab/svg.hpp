#pragma once

#include <string>
#include <vector>

namespace nanlab {

struct SvgSeries {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

// Minimal static line chart: axes, ticks, one polyline per series and a small
// legend. No external charting dependency; the output is a plain artifact.
void write_line_chart(const std::string& path, const std::string& title,
                      const std::string& x_label, const std::string& y_label,
                      const std::vector<SvgSeries>& series);

}  // namespace nanlab
