#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "phil/harness/recording.hpp"

namespace phil {

struct PlotSeries {
    std::string label;
    std::vector<Real> t;
    std::vector<Real> y;
};

/// Self-contained SVG line plot, one polyline per series.
std::string svg_line_plot(const std::string& title, const std::string& y_label, const std::vector<PlotSeries>& series);

/// frequency.svg, p_pcc.svg, v_rms_pcc.svg, v_nodes.svg and one
/// currents_event_<n>.svg per grid event covering +-0.2 s.
void export_plots(const Recording& recording, const std::filesystem::path& dir);

} // namespace phil
