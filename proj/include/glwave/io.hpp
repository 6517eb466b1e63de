#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "glwave/math.hpp"
#include "json.hpp"

namespace glwave {

// CSV with 17 significant digits per cell.
class CsvWriter {
   public:
    explicit CsvWriter(const std::string& path) : f_(std::fopen(path.c_str(), "w")) {
        require(f_ != nullptr, "CsvWriter: cannot open " + path);
    }
    ~CsvWriter() {
        if (f_) std::fclose(f_);
    }
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;

    void header(const std::vector<std::string>& cols) {
        for (std::size_t i = 0; i < cols.size(); ++i)
            std::fprintf(f_, "%s%s", cols[i].c_str(), i + 1 < cols.size() ? "," : "\n");
    }
    void row(const std::vector<double>& vals) {
        for (std::size_t i = 0; i < vals.size(); ++i)
            std::fprintf(f_, "%.17g%s", vals[i], i + 1 < vals.size() ? "," : "\n");
    }

   private:
    std::FILE* f_;
};

// Minimal SVG line plot: one or more polylines over a shared frame.
struct SvgSeries {
    std::string label;
    std::string color = "#1f6fb2";
    std::vector<double> x, y;
};

inline void write_svg_plot(const std::string& path, const std::string& title,
                           const std::vector<SvgSeries>& series, bool logy = false) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    auto ty = [&](double v) { return logy ? std::log10(std::max(v, 1e-300)) : v; };
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, ty(s.y[i]));
            ymax = std::max(ymax, ty(s.y[i]));
        }
    if (xmin > xmax) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (ymax - ymin < 1e-12) {
        ymax += 1;
        ymin -= 1;
    }
    int W = 640, H = 420, M = 50;
    auto px = [&](double x) { return M + (x - xmin) / (xmax - xmin) * (W - 2 * M); };
    auto py = [&](double y) { return H - M - (ty(y) - ymin) / (ymax - ymin) * (H - 2 * M); };
    std::ofstream out(path);
    require(out.good(), "write_svg_plot: cannot open " + path);
    out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    out << "<rect width='100%' height='100%' fill='white'/>\n";
    out << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
        << "</text>\n";
    out << "<line x1='" << M << "' y1='" << H - M << "' x2='" << W - M << "' y2='" << H - M
        << "' stroke='black'/>\n";
    out << "<line x1='" << M << "' y1='" << M << "' x2='" << M << "' y2='" << H - M
        << "' stroke='black'/>\n";
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3g", xmin);
    out << "<text x='" << M << "' y='" << H - M + 16 << "' font-size='11'>" << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", xmax);
    out << "<text x='" << W - M << "' y='" << H - M + 16 << "' text-anchor='end' font-size='11'>"
        << buf << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", logy ? std::pow(10, ymin) : ymin);
    out << "<text x='" << M - 4 << "' y='" << H - M << "' text-anchor='end' font-size='11'>" << buf
        << "</text>\n";
    std::snprintf(buf, sizeof buf, "%.3g", logy ? std::pow(10, ymax) : ymax);
    out << "<text x='" << M - 4 << "' y='" << M << "' text-anchor='end' font-size='11'>" << buf
        << "</text>\n";
    int leg = 0;
    for (const auto& s : series) {
        out << "<polyline fill='none' stroke='" << s.color << "' stroke-width='1.5' points='";
        for (std::size_t i = 0; i < s.x.size(); ++i)
            out << px(s.x[i]) << "," << py(s.y[i]) << " ";
        out << "'/>\n";
        out << "<text x='" << W - M - 4 << "' y='" << M + 14 * leg++
            << "' text-anchor='end' font-size='11' fill='" << s.color << "'>" << s.label
            << "</text>\n";
    }
    out << "</svg>\n";
}

// File manifest: every emitted artifact with its content hash; reruns with
// the same configuration must reproduce the hashes bit for bit.
class Manifest {
   public:
    void add(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        require(in.good(), "Manifest: cannot read " + path);
        std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
        entries_[std::filesystem::path(path).filename().string()] = hex64(fnv1a64(data));
    }
    nlohmann::json to_json() const {
        nlohmann::json j;
        for (const auto& [name, hash] : entries_) j[name] = hash;
        return j;
    }
    void write(const std::string& path) const {
        std::ofstream out(path);
        out << to_json().dump(2) << "\n";
    }

   private:
    std::map<std::string, std::string> entries_;
};

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    require(out.good(), "write_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

}  // namespace glwave
