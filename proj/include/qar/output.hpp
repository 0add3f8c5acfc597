// output.hpp: CSV tables, atomic file writes and static SVG plots.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "qar/errors.hpp"

namespace qar {

/// Scientific notation with 12 significant digits; "nan" for missing values.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.11e", v);
    return buf;
}

/// Short label-friendly rendering, e.g. 21.424 -> "21.424".
inline std::string format_label(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// Writes via a temporary sibling and renames, so readers never see partial files.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open '" + tmp.string() + "' for writing");
        out << content;
        if (!out) throw Error("write to '" + tmp.string() + "' failed");
    }
    fs::rename(tmp, path);
}

class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

    void add_row(const std::vector<double>& values) {
        if (values.size() != header_.size()) throw DimensionMismatch("CsvTable: row width differs from header");
        rows_.push_back(values);
    }

    std::size_t rows() const { return rows_.size(); }

    std::string str() const {
        std::ostringstream os;
        for (std::size_t k = 0; k < header_.size(); ++k) os << (k ? "," : "") << header_[k];
        os << '\n';
        for (const auto& r : rows_) {
            for (std::size_t k = 0; k < r.size(); ++k) os << (k ? "," : "") << format_number(r[k]);
            os << '\n';
        }
        return os.str();
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<double>> rows_;
};

/// Reads `x,value[,sigma]` rows; a non-numeric first line is taken as the header.
inline std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read '" + path.string() + "'");
    std::vector<std::vector<double>> rows;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream ss(line);
        std::string cell;
        bool numeric = true;
        while (std::getline(ss, cell, ',')) {
            try {
                std::size_t used = 0;
                row.push_back(std::stod(cell, &used));
                if (cell.find_first_not_of(" \t", used) != std::string::npos) numeric = false;
            } catch (const std::exception&) {
                numeric = false;
            }
        }
        if (!numeric) {
            if (first) {
                first = false;
                continue;
            }
            throw ValidationError("'" + path.string() + "': non-numeric row '" + line + "'");
        }
        first = false;
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------------------
// SVG

struct Series {
    std::string label;
    std::vector<double> x, y;
};

namespace detail {

inline std::string svg_color(std::size_t k) {
    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
    return palette[k % 8];
}

inline std::string svg_num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

inline std::string svg_escape(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '<') {
            out += "&lt;";
        } else if (c == '>') {
            out += "&gt;";
        } else if (c == '&') {
            out += "&amp;";
        } else {
            out += c;
        }
    }
    return out;
}

}  // namespace detail

/// Line plot; non-positive y values are dropped when log_y is set.
inline std::string svg_line_plot(const std::vector<Series>& series, const std::string& title, const std::string& xlabel,
                                 const std::string& ylabel, bool log_x = false, bool log_y = false) {
    const double w = 640, h = 420, l = 70, r = 160, t = 40, b = 50;
    auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
    auto ty = [&](double v) { return log_y ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!log_x || x > 0) && (!log_y || y > 0);
    };
    double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& s : series) {
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (!usable(s.x[k], s.y[k])) continue;
            x0 = std::min(x0, tx(s.x[k]));
            x1 = std::max(x1, tx(s.x[k]));
            y0 = std::min(y0, ty(s.y[k]));
            y1 = std::max(y1, ty(s.y[k]));
        }
    }
    if (!std::isfinite(x0)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
    if (x1 == x0) x1 = x0 + 1;
    if (y1 == y0) y1 = y0 + 1;
    auto px = [&](double v) { return l + (tx(v) - x0) / (x1 - x0) * (w - l - r); };
    auto py = [&](double v) { return h - b - (ty(v) - y0) / (y1 - y0) * (h - t - b); };

    std::ostringstream os;
    using detail::svg_num;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << detail::svg_escape(title)
       << "</text>\n";
    os << "<rect x=\"" << l << "\" y=\"" << t << "\" width=\"" << (w - l - r) << "\" height=\"" << (h - t - b)
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int k = 0; k <= 4; ++k) {
        const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        const double vx = log_x ? std::pow(10.0, fx) : fx, vy = log_y ? std::pow(10.0, fy) : fy;
        char lx[32], ly[32];
        std::snprintf(lx, sizeof lx, "%.3g", vx);
        std::snprintf(ly, sizeof ly, "%.3g", vy);
        os << "<text x=\"" << svg_num(px(vx)) << "\" y=\"" << (h - b + 18) << "\" text-anchor=\"middle\" font-size=\"11\">"
           << lx << "</text>\n";
        os << "<text x=\"" << (l - 6) << "\" y=\"" << svg_num(py(vy) + 4) << "\" text-anchor=\"end\" font-size=\"11\">" << ly
           << "</text>\n";
    }
    os << "<text x=\"" << (l + (w - l - r) / 2) << "\" y=\"" << (h - 10) << "\" text-anchor=\"middle\" font-size=\"13\">"
       << detail::svg_escape(xlabel) << "</text>\n";
    os << "<text x=\"16\" y=\"" << (t + (h - t - b) / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 16 "
       << (t + (h - t - b) / 2) << ")\">" << detail::svg_escape(ylabel) << "</text>\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
        const auto& s = series[si];
        os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << detail::svg_color(si) << "\" points=\"";
        for (std::size_t k = 0; k < s.x.size(); ++k) {
            if (usable(s.x[k], s.y[k])) os << svg_num(px(s.x[k])) << "," << svg_num(py(s.y[k])) << " ";
        }
        os << "\"/>\n";
        const double ly = t + 16.0 * static_cast<double>(si + 1);
        os << "<line x1=\"" << (w - r + 10) << "\" y1=\"" << ly - 4 << "\" x2=\"" << (w - r + 30) << "\" y2=\"" << ly - 4
           << "\" stroke=\"" << detail::svg_color(si) << "\" stroke-width=\"2\"/>\n";
        os << "<text x=\"" << (w - r + 34) << "\" y=\"" << ly << "\" font-size=\"11\">" << detail::svg_escape(s.label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

/// Heatmap of z(row, col) with rows along y and columns along x; grey scale from min to max.
inline std::string svg_heatmap(const std::vector<double>& xs, const std::vector<double>& ys,
                               const std::vector<std::vector<double>>& z, const std::string& title,
                               const std::string& xlabel, const std::string& ylabel) {
    const double w = 560, h = 480, l = 80, r = 40, t = 40, b = 60;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& row : z)
        for (double v : row) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (!(hi > lo)) hi = lo + 1;
    const double cw = (w - l - r) / static_cast<double>(std::max<std::size_t>(xs.size(), 1));
    const double ch = (h - t - b) / static_cast<double>(std::max<std::size_t>(ys.size(), 1));
    using detail::svg_num;
    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << w / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << detail::svg_escape(title)
       << "</text>\n";
    for (std::size_t i = 0; i < ys.size(); ++i) {
        for (std::size_t j = 0; j < xs.size(); ++j) {
            const int g = static_cast<int>(std::lround(255.0 * (z[i][j] - lo) / (hi - lo)));
            os << "<rect x=\"" << svg_num(l + cw * static_cast<double>(j)) << "\" y=\""
               << svg_num(h - b - ch * static_cast<double>(i + 1)) << "\" width=\"" << svg_num(cw + 0.5) << "\" height=\""
               << svg_num(ch + 0.5) << "\" fill=\"rgb(" << g << "," << g << "," << 255 << ")\"/>\n";
        }
    }
    auto tick = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3g", v);
        return std::string(buf);
    };
    if (!xs.empty()) {
        os << "<text x=\"" << l << "\" y=\"" << (h - b + 16) << "\" font-size=\"11\">" << tick(xs.front()) << "</text>\n";
        os << "<text x=\"" << (w - r) << "\" y=\"" << (h - b + 16) << "\" text-anchor=\"end\" font-size=\"11\">"
           << tick(xs.back()) << "</text>\n";
    }
    if (!ys.empty()) {
        os << "<text x=\"" << (l - 6) << "\" y=\"" << (h - b) << "\" text-anchor=\"end\" font-size=\"11\">" << tick(ys.front())
           << "</text>\n";
        os << "<text x=\"" << (l - 6) << "\" y=\"" << (t + 10) << "\" text-anchor=\"end\" font-size=\"11\">" << tick(ys.back())
           << "</text>\n";
    }
    os << "<text x=\"" << (l + (w - l - r) / 2) << "\" y=\"" << (h - 20) << "\" text-anchor=\"middle\" font-size=\"13\">"
       << detail::svg_escape(xlabel) << "</text>\n";
    os << "<text x=\"18\" y=\"" << (t + (h - t - b) / 2) << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
       << (t + (h - t - b) / 2) << ")\">" << detail::svg_escape(ylabel) << "</text>\n";
    os << "<text x=\"" << (w - r) << "\" y=\"" << (h - 6) << "\" text-anchor=\"end\" font-size=\"10\">range " << tick(lo)
       << " .. " << tick(hi) << "</text>\n";
    os << "</svg>\n";
    return os.str();
}

}  // namespace qar
