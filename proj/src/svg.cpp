#include "kernelde/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>

namespace kernelde::svg {

namespace {

std::string fmt(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (char ch : s) {
        switch (ch) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

struct Range {
    double lo = 0.0, hi = 1.0;
};

// Round tick step: 1, 2 or 5 times a power of ten, aiming for ~5 intervals.
double tick_step(const Range& r)
{
    const double span = r.hi - r.lo;
    const double raw = span / 5.0;
    const double mag = std::pow(10.0, std::floor(std::log10(raw)));
    const double frac = raw / mag;
    double nice = 10.0;
    if (frac <= 1.5)
        nice = 1.0;
    else if (frac <= 3.5)
        nice = 2.0;
    else if (frac <= 7.5)
        nice = 5.0;
    return nice * mag;
}

std::string tick_label(double v, double step)
{
    char buf[32];
    const int dec = std::max(0, static_cast<int>(std::ceil(-std::log10(step))));
    std::snprintf(buf, sizeof buf, "%.*f", dec, v + 0.0);  // +0.0 drops -0
    return buf;
}

Range data_range(const Panel& p, bool vertical)
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& s : p.series) {
        const auto& v = vertical ? s.ys : s.xs;
        for (double q : v) {
            if (!std::isfinite(q)) continue;
            lo = std::min(lo, q);
            hi = std::max(hi, q);
        }
        if (!vertical && s.kind == SeriesKind::bars && !s.xs.empty()) {
            lo = std::min(lo, *std::min_element(s.xs.begin(), s.xs.end()) - s.bar_width / 2);
            hi = std::max(hi, *std::max_element(s.xs.begin(), s.xs.end()) + s.bar_width / 2);
        }
        if (vertical && s.kind == SeriesKind::bars) lo = std::min(lo, 0.0);
    }
    if (!(lo < hi)) {
        if (!std::isfinite(lo)) return {0.0, 1.0};
        return {lo - 0.5, hi + 0.5};
    }
    const double pad = 0.05 * (hi - lo);
    return {lo - pad, hi + pad};
}

}  // namespace

std::string render(const Figure& fig)
{
    if (fig.panels.empty()) throw std::invalid_argument("svg::render: no panels");

    const int margin_l = 52, margin_r = 16, margin_t = 34, margin_b = 42;
    const int gap = 18;
    const int pw = fig.panel_width, ph = fig.panel_height;
    const int n = static_cast<int>(fig.panels.size());
    const int width = n * pw + (n - 1) * gap + 8;
    const int height = ph + 46;

    std::string out;
    out += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) +
           "\" height=\"" + std::to_string(height) + "\" viewBox=\"0 0 " +
           std::to_string(width) + " " + std::to_string(height) + "\">\n";
    out += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!fig.title.empty())
        out += "<text x=\"" + std::to_string(width / 2) +
               "\" y=\"16\" text-anchor=\"middle\" font-family=\"sans-serif\" "
               "font-size=\"14\">" +
               escape(fig.title) + "</text>\n";

    for (int pi = 0; pi < n; ++pi) {
        const Panel& p = fig.panels[pi];
        const double ox = pi * (pw + gap) + 4;
        const double oy = 24;
        const double x0 = ox + margin_l, x1 = ox + pw - margin_r;
        const double y0 = oy + margin_t, y1 = oy + ph - margin_b;
        const Range rx = data_range(p, false);
        const Range ry = data_range(p, true);
        auto sx = [&](double v) { return x0 + (v - rx.lo) / (rx.hi - rx.lo) * (x1 - x0); };
        auto sy = [&](double v) { return y1 - (v - ry.lo) / (ry.hi - ry.lo) * (y1 - y0); };

        out += "<rect x=\"" + fmt(x0) + "\" y=\"" + fmt(y0) + "\" width=\"" + fmt(x1 - x0) +
               "\" height=\"" + fmt(y1 - y0) +
               "\" fill=\"none\" stroke=\"#444\" stroke-width=\"1\"/>\n";
        if (!p.title.empty())
            out += "<text x=\"" + fmt((x0 + x1) / 2) + "\" y=\"" + fmt(y0 - 8) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" +
                   escape(p.title) + "</text>\n";

        const double stx = tick_step(rx);
        for (double t = std::ceil(rx.lo / stx) * stx; t <= rx.hi + 1e-9 * stx; t += stx) {
            out += "<line x1=\"" + fmt(sx(t)) + "\" y1=\"" + fmt(y1) + "\" x2=\"" + fmt(sx(t)) +
                   "\" y2=\"" + fmt(y1 + 4) + "\" stroke=\"#444\"/>\n";
            out += "<text x=\"" + fmt(sx(t)) + "\" y=\"" + fmt(y1 + 16) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" +
                   tick_label(t, stx) + "</text>\n";
        }
        const double sty = tick_step(ry);
        for (double t = std::ceil(ry.lo / sty) * sty; t <= ry.hi + 1e-9 * sty; t += sty) {
            out += "<line x1=\"" + fmt(x0 - 4) + "\" y1=\"" + fmt(sy(t)) + "\" x2=\"" + fmt(x0) +
                   "\" y2=\"" + fmt(sy(t)) + "\" stroke=\"#444\"/>\n";
            out += "<text x=\"" + fmt(x0 - 6) + "\" y=\"" + fmt(sy(t) + 3) +
                   "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" +
                   tick_label(t, sty) + "</text>\n";
        }
        if (!p.x_label.empty())
            out += "<text x=\"" + fmt((x0 + x1) / 2) + "\" y=\"" + fmt(y1 + 32) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">" +
                   escape(p.x_label) + "</text>\n";
        if (!p.y_label.empty())
            out += "<text x=\"" + fmt(ox + 14) + "\" y=\"" + fmt((y0 + y1) / 2) +
                   "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\" "
                   "transform=\"rotate(-90 " +
                   fmt(ox + 14) + " " + fmt((y0 + y1) / 2) + ")\">" +
                   escape(p.y_label) + "</text>\n";

        double ly = y0 + 12;
        for (const auto& s : p.series) {
            if (s.xs.size() != s.ys.size())
                throw std::invalid_argument("svg::render: xs/ys length mismatch");
            if (s.kind == SeriesKind::bars) {
                const double w = s.bar_width > 0 ? sx(rx.lo + s.bar_width) - sx(rx.lo) : 4.0;
                for (size_t i = 0; i < s.xs.size(); ++i) {
                    if (!std::isfinite(s.ys[i])) continue;
                    const double top = sy(s.ys[i]);
                    out += "<rect x=\"" + fmt(sx(s.xs[i]) - w / 2) + "\" y=\"" + fmt(top) +
                           "\" width=\"" + fmt(w) + "\" height=\"" + fmt(sy(0.0) - top) +
                           "\" fill=\"" + s.color + "\" fill-opacity=\"0.55\"/>\n";
                }
            } else if (s.kind == SeriesKind::line) {
                std::string pts;
                for (size_t i = 0; i < s.xs.size(); ++i) {
                    if (!std::isfinite(s.ys[i])) continue;
                    pts += fmt(sx(s.xs[i])) + "," + fmt(sy(s.ys[i])) + " ";
                }
                if (!pts.empty()) pts.pop_back();
                out += "<polyline points=\"" + pts + "\" fill=\"none\" stroke=\"" + s.color +
                       "\" stroke-width=\"1.5\"/>\n";
            } else {
                for (size_t i = 0; i < s.xs.size(); ++i) {
                    if (!std::isfinite(s.ys[i])) continue;
                    out += "<circle cx=\"" + fmt(sx(s.xs[i])) + "\" cy=\"" + fmt(sy(s.ys[i])) +
                           "\" r=\"2.5\" fill=\"" + s.color + "\"/>\n";
                }
            }
            if (!s.label.empty()) {
                out += "<line x1=\"" + fmt(x1 - 70) + "\" y1=\"" + fmt(ly - 3) + "\" x2=\"" +
                       fmt(x1 - 56) + "\" y2=\"" + fmt(ly - 3) + "\" stroke=\"" + s.color +
                       "\" stroke-width=\"3\"/>\n";
                out += "<text x=\"" + fmt(x1 - 52) + "\" y=\"" + fmt(ly) +
                       "\" font-family=\"sans-serif\" font-size=\"10\">" + escape(s.label) +
                       "</text>\n";
                ly += 13;
            }
        }
    }
    out += "</svg>\n";
    return out;
}

}  // namespace kernelde::svg
