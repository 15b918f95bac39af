#include "ergo/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ergo {

std::string format_shortest(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

std::uint64_t fnv1a64(const std::string& data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

std::string hex64(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return s;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary); // binary: fixed \n line endings
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

} // namespace

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
    if (header.size() != columns.size())
        throw std::invalid_argument("write_csv: header/column count mismatch");
    const std::size_t rows = columns.empty() ? 0 : columns.front().size();
    for (const auto& col : columns)
        if (col.size() != rows) throw std::invalid_argument("write_csv: ragged columns");

    auto out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < columns.size(); ++c)
            out << (c ? "," : "") << format_shortest(columns[c][r]);
        out << '\n';
    }
}

void write_csv_rows(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows) {
    auto out = open_out(path);
    for (std::size_t c = 0; c < header.size(); ++c)
        out << (c ? "," : "") << header[c];
    out << '\n';
    for (const auto& row : rows) {
        if (row.size() != header.size())
            throw std::invalid_argument("write_csv_rows: ragged row");
        for (std::size_t c = 0; c < row.size(); ++c)
            out << (c ? "," : "") << row[c];
        out << '\n';
    }
}

namespace {

constexpr double kW = 800, kH = 480;
constexpr double kMarginL = 70, kMarginR = 20, kMarginT = 40, kMarginB = 50;

struct Range {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    void take(double v) {
        if (!std::isfinite(v)) return;
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    void pad() {
        if (lo > hi) { lo = 0; hi = 1; }
        if (hi - lo < 1e-12) { lo -= 0.5; hi += 0.5; }
        const double m = 0.04 * (hi - lo);
        lo -= m;
        hi += m;
    }
};

std::string esc(const std::string& s) {
    std::string out;
    for (char c : s) {
        if (c == '&') out += "&amp;";
        else if (c == '<') out += "&lt;";
        else if (c == '>') out += "&gt;";
        else out += c;
    }
    return out;
}

} // namespace

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<SvgSeries>& series,
                     const std::vector<double>& hlines) {
    Range xr, yr;
    for (const auto& s : series) {
        if (s.x.size() != s.y.size())
            throw std::invalid_argument("write_svg_chart: x/y size mismatch");
        if (!s.band_lo.empty() &&
            (s.band_lo.size() != s.x.size() || s.band_hi.size() != s.x.size()))
            throw std::invalid_argument("write_svg_chart: band size mismatch");
        for (double v : s.x) xr.take(v);
        for (double v : s.y) yr.take(v);
        for (double v : s.band_lo) yr.take(v);
        for (double v : s.band_hi) yr.take(v);
    }
    for (double v : hlines) yr.take(v);
    xr.pad();
    yr.pad();

    auto X = [&](double v) { return kMarginL + (v - xr.lo) / (xr.hi - xr.lo) * (kW - kMarginL - kMarginR); };
    auto Y = [&](double v) { return kH - kMarginB - (v - yr.lo) / (yr.hi - yr.lo) * (kH - kMarginT - kMarginB); };
    auto pt = [&](double x, double y) {
        return format_shortest(std::round(X(x) * 100) / 100) + "," +
               format_shortest(std::round(Y(y) * 100) / 100);
    };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << kW << " " << kH
        << "\" font-family=\"monospace\" font-size=\"12\">\n";
    svg << "<rect width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
    svg << "<text x=\"" << kW / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
        << esc(title) << "</text>\n";

    // axes with min/max labels
    svg << "<line x1=\"" << kMarginL << "\" y1=\"" << kH - kMarginB << "\" x2=\"" << kW - kMarginR
        << "\" y2=\"" << kH - kMarginB << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << kMarginL << "\" y1=\"" << kMarginT << "\" x2=\"" << kMarginL
        << "\" y2=\"" << kH - kMarginB << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << kMarginL << "\" y=\"" << kH - kMarginB + 16
        << "\" text-anchor=\"middle\">" << format_shortest(xr.lo) << "</text>\n";
    svg << "<text x=\"" << kW - kMarginR << "\" y=\"" << kH - kMarginB + 16
        << "\" text-anchor=\"middle\">" << format_shortest(xr.hi) << "</text>\n";
    svg << "<text x=\"" << kMarginL - 6 << "\" y=\"" << kH - kMarginB
        << "\" text-anchor=\"end\">" << format_shortest(yr.lo) << "</text>\n";
    svg << "<text x=\"" << kMarginL - 6 << "\" y=\"" << kMarginT + 4
        << "\" text-anchor=\"end\">" << format_shortest(yr.hi) << "</text>\n";
    svg << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 12 << "\" text-anchor=\"middle\">"
        << esc(xlabel) << "</text>\n";
    svg << "<text x=\"16\" y=\"" << kH / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << kH / 2 << ")\">"
        << esc(ylabel) << "</text>\n";

    for (double h : hlines)
        svg << "<line x1=\"" << kMarginL << "\" y1=\"" << format_shortest(Y(h)) << "\" x2=\""
            << kW - kMarginR << "\" y2=\"" << format_shortest(Y(h))
            << "\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>\n";

    for (const auto& s : series) {
        if (!s.band_lo.empty()) {
            svg << "<polygon fill=\"" << s.color << "\" fill-opacity=\"0.18\" stroke=\"none\" points=\"";
            for (std::size_t i = 0; i < s.x.size(); ++i) svg << pt(s.x[i], s.band_lo[i]) << " ";
            for (std::size_t i = s.x.size(); i-- > 0;) svg << pt(s.x[i], s.band_hi[i]) << " ";
            svg << "\"/>\n";
        }
    }
    int label_row = 0;
    for (const auto& s : series) {
        svg << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t i = 0; i < s.x.size(); ++i) svg << pt(s.x[i], s.y[i]) << " ";
        svg << "\"/>\n";
        if (!s.label.empty()) {
            const double ly = kMarginT + 14 * label_row++;
            svg << "<line x1=\"" << kW - kMarginR - 140 << "\" y1=\"" << ly << "\" x2=\""
                << kW - kMarginR - 120 << "\" y2=\"" << ly << "\" stroke=\"" << s.color
                << "\" stroke-width=\"2\"/>\n";
            svg << "<text x=\"" << kW - kMarginR - 114 << "\" y=\"" << ly + 4 << "\">"
                << esc(s.label) << "</text>\n";
        }
    }
    svg << "</svg>\n";

    auto out = open_out(path);
    out << svg.str();
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
    auto out = open_out(path);
    out << "{\n";
    out << "  \"config_digest\": \"" << manifest.config_digest << "\",\n";
    out << "  \"version\": \"" << manifest.version << "\",\n";
    out << "  \"wall_clock_seconds\": " << format_shortest(manifest.wall_seconds) << ",\n";
    out << "  \"files\": [";
    for (std::size_t i = 0; i < manifest.files.size(); ++i)
        out << (i ? ", " : "") << "\"" << manifest.files[i] << "\"";
    out << "]\n}\n";
}

} // namespace ergo
