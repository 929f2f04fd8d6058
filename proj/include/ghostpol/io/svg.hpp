#pragma once

/**
 * @file svg.hpp
 * @brief Self-contained SVG plots: response curves versus angle and
 *        response-space scatter with confidence ellipses (3D data drawn as
 *        its three coordinate-plane projections).
 */

#include <ostream>
#include <string>
#include <vector>

#include "ghostpol/discern.hpp"
#include "ghostpol/ghost.hpp"
#include "ghostpol/io/csv.hpp"

namespace ghostpol::io {

namespace svg {

inline const char* color(std::size_t i) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};
    return palette[i % 6];
}

inline std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

inline std::string fixed(double v, int digits = 2) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

/// Linear map from data box to pixel box (y grows downward).
struct Frame {
    double x0, y0, w, h;          // pixels
    double xmin, xmax, ymin, ymax;  // data
    double px(double x) const { return x0 + (x - xmin) / (xmax - xmin) * w; }
    double py(double y) const { return y0 + h - (y - ymin) / (ymax - ymin) * h; }
    double sx(double dx) const { return dx / (xmax - xmin) * w; }
    double sy(double dy) const { return dy / (ymax - ymin) * h; }
};

inline void axes(std::ostream& os, const Frame& f, const std::string& xlabel, const std::string& ylabel,
                 const std::vector<double>& xticks, const std::vector<double>& yticks) {
    os << "<g class=\"axes\" stroke=\"#000\" fill=\"none\">"
       << "<rect x=\"" << fixed(f.x0) << "\" y=\"" << fixed(f.y0) << "\" width=\"" << fixed(f.w) << "\" height=\""
       << fixed(f.h) << "\"/></g>\n";
    os << "<g class=\"ticks\" font-size=\"10\" font-family=\"sans-serif\">";
    for (double t : xticks)
        os << "<text x=\"" << fixed(f.px(t)) << "\" y=\"" << fixed(f.y0 + f.h + 14) << "\" text-anchor=\"middle\">"
           << num(t) << "</text>";
    for (double t : yticks)
        os << "<text x=\"" << fixed(f.x0 - 4) << "\" y=\"" << fixed(f.py(t) + 3) << "\" text-anchor=\"end\">"
           << num(t) << "</text>";
    os << "</g>\n";
    os << "<text x=\"" << fixed(f.x0 + f.w / 2) << "\" y=\"" << fixed(f.y0 + f.h + 30)
       << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << escape(xlabel) << "</text>\n";
    os << "<text x=\"" << fixed(f.x0 - 34) << "\" y=\"" << fixed(f.y0 + f.h / 2) << "\" transform=\"rotate(-90 "
       << fixed(f.x0 - 34) << ' ' << fixed(f.y0 + f.h / 2)
       << ")\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">" << escape(ylabel) << "</text>\n";
}

inline std::vector<double> ticks(double lo, double hi, int n) {
    std::vector<double> t;
    for (int i = 0; i <= n; ++i) t.push_back(lo + (hi - lo) * i / n);
    return t;
}

}  // namespace svg

/// One polyline per (family, coordinate) against theta.
inline void write_curves_svg(std::ostream& os, const std::vector<ghost::ResponseCurve>& normalized,
                             const std::string& title = "") {
    double tmin = 0.0, tmax = 180.0, ymax = 1.0;
    for (const auto& c : normalized)
        for (const auto& s : c.samples) {
            tmin = std::min(tmin, s.theta_deg);
            tmax = std::max(tmax, s.theta_deg);
            if (s.point.size()) ymax = std::max(ymax, s.point.maxCoeff());
        }
    const svg::Frame f{60, 30, 520, 300, tmin, tmax, 0.0, ymax};
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"720\" height=\"380\" viewBox=\"0 0 720 380\">\n";
    if (!title.empty())
        os << "<text x=\"320\" y=\"18\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
           << svg::escape(title) << "</text>\n";
    svg::axes(os, f, "orientation (deg)", "normalized coincidences", svg::ticks(tmin, tmax, 6), svg::ticks(0.0, ymax, 5));

    const char* dash[] = {"", "6 3", "2 2"};
    std::size_t legend = 0;
    for (std::size_t fi = 0; fi < normalized.size(); ++fi) {
        const auto& c = normalized[fi];
        for (std::size_t k = 0; k < c.dimension(); ++k) {
            os << "<polyline class=\"curve\" fill=\"none\" stroke=\"" << svg::color(k) << "\" stroke-width=\"1.5\"";
            if (fi % 3) os << " stroke-dasharray=\"" << dash[fi % 3] << "\"";
            os << " points=\"";
            for (const auto& s : c.samples)
                os << svg::fixed(f.px(s.theta_deg))
                   << ',' << svg::fixed(f.py(s.point(static_cast<Eigen::Index>(k)))) << ' ';
            os << "\"/>\n";
            os << "<text class=\"legend\" x=\"590\" y=\"" << 40 + 16 * legend
               << "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"" << svg::color(k) << "\">"
               << svg::escape(c.family) << " P" << k + 1 << "</text>\n";
            ++legend;
        }
    }
    os << "</svg>\n";
}

/// Response-space scatter: one ellipse per sample (kept samples filled) in
/// each coordinate-plane projection.
inline void write_scatter_svg(std::ostream& os, const std::vector<discern::FamilySelection>& selections,
                              const std::string& title = "") {
    std::size_t dim = 0;
    double hi = 0.0;
    for (const auto& s : selections)
        for (const auto& r : s.regions) {
            dim = std::max<std::size_t>(dim, static_cast<std::size_t>(r.center.size()));
            hi = std::max(hi, (r.center + r.semi_axes).maxCoeff());
        }
    hi = std::max(hi, 1.0);
    std::vector<std::pair<int, int>> planes;
    if (dim == 2) planes = {{0, 1}};
    else if (dim >= 3) planes = {{0, 1}, {0, 2}, {1, 2}};

    const double panel = 300.0;
    const double width = 70.0 + planes.size() * (panel + 70.0);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << svg::fixed(width, 0) << "\" height=\"420\" viewBox=\"0 0 "
       << svg::fixed(width, 0) << " 420\">\n";
    if (!title.empty())
        os << "<text x=\"" << svg::fixed(width / 2) << "\" y=\"18\" text-anchor=\"middle\" font-size=\"13\" font-family=\"sans-serif\">"
           << svg::escape(title) << "</text>\n";

    for (std::size_t p = 0; p < planes.size(); ++p) {
        const auto [a, b] = planes[p];
        const svg::Frame f{70.0 + p * (panel + 70.0), 40, panel, panel, 0.0, hi, 0.0, hi};
        os << "<g class=\"panel\">\n";
        svg::axes(os, f, "P" + std::to_string(a + 1), "P" + std::to_string(b + 1), svg::ticks(0, hi, 4), svg::ticks(0, hi, 4));
        for (std::size_t fi = 0; fi < selections.size(); ++fi) {
            const auto& sel = selections[fi];
            std::vector<bool> kept(sel.regions.size(), false);
            for (auto k : sel.kept) kept[k] = true;
            for (std::size_t i = 0; i < sel.regions.size(); ++i) {
                const auto& r = sel.regions[i];
                os << "<ellipse class=\"region\" cx=\"" << svg::fixed(f.px(r.center(a)), 3) << "\" cy=\""
                   << svg::fixed(f.py(r.center(b)), 3) << "\" rx=\"" << svg::fixed(std::max(f.sx(r.semi_axes(a)), 0.3), 3)
                   << "\" ry=\"" << svg::fixed(std::max(f.sy(r.semi_axes(b)), 0.3), 3) << "\" stroke=\"" << svg::color(fi)
                   << "\" fill=\"" << (kept[i] ? svg::color(fi) : "none") << "\" fill-opacity=\"0.35\"/>\n";
            }
        }
        os << "</g>\n";
    }
    for (std::size_t fi = 0; fi < selections.size(); ++fi)
        os << "<text class=\"legend\" x=\"70\" y=\"" << 400 - 14 * (selections.size() - 1 - fi)
           << "\" font-size=\"11\" font-family=\"sans-serif\" fill=\"" << svg::color(fi) << "\">"
           << svg::escape(selections[fi].label) << " (" << selections[fi].kept.size() << " kept)</text>\n";
    os << "</svg>\n";
}

}  // namespace ghostpol::io
