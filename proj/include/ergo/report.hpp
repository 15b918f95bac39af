#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace ergo {

inline constexpr const char* kToolkitVersion = "0.1.0";

// Shortest round-trip decimal representation (to_chars); the basis for
// byte-stable CSV output.
std::string format_shortest(double v);

std::uint64_t fnv1a64(const std::string& data);
std::string hex64(std::uint64_t v);

// Column-major numeric CSV; every column formatted with format_shortest.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns);

// Row-major CSV of preformatted cells (exact rationals etc.).
void write_csv_rows(const std::string& path, const std::vector<std::string>& header,
                    const std::vector<std::vector<std::string>>& rows);

struct SvgSeries {
    std::vector<double> x, y;
    std::vector<double> band_lo, band_hi; // optional shaded band (same x)
    std::string color = "#1f6feb";
    std::string label;
};

// Minimal deterministic polyline chart: fixed layout, mean lines, optional
// std bands, optional horizontal reference lines.
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<SvgSeries>& series,
                     const std::vector<double>& hlines = {});

struct RunManifest {
    std::string config_digest;
    std::string version = kToolkitVersion;
    double wall_seconds = 0.0;
    std::vector<std::string> files;
};

void write_manifest(const std::string& path, const RunManifest& manifest);

} // namespace ergo
