#pragma once
// Minimal SVG plotting: multi-panel line/marker/bar charts with fixed layout
// and printf-formatted coordinates, so identical inputs give identical bytes.
// Covers the three artifact plots (kernel overlays, residual histograms,
// injection curves) without an external renderer.

#include <string>
#include <vector>

namespace kernelde::svg {

enum class SeriesKind { line, markers, bars };

struct Series {
    std::string label;
    SeriesKind kind = SeriesKind::line;
    std::vector<double> xs;
    std::vector<double> ys;
    std::string color = "#1f6fb2";
    double bar_width = 0.0;  // x units, bars only
};

struct Panel {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
};

// Panels side by side, shared style, legend from series labels. Axis limits
// cover the data with 5% padding; ticks sit on round numbers.
struct Figure {
    std::string title;
    std::vector<Panel> panels;
    int panel_width = 360;
    int panel_height = 300;
};

std::string render(const Figure& fig);

}  // namespace kernelde::svg
