#pragma once

#include "ckada/csv.hpp"
#include "ckada/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace ckada {

struct RenderSpec {
    int rows = 0;
    int cols = 0;
    std::array<int, 3> channels = {0, 1, 2}; // embedding dimensions for R, G, B
    double low = 2.0;                         // percentiles
    double high = 98.0;
};

inline void validate(const RenderSpec& spec)
{
    require(spec.rows >= 1 && spec.cols >= 1, ErrorCode::invalid_argument, "render grid must be at least 1x1");
    require(spec.low >= 0.0 && spec.low < spec.high && spec.high <= 100.0, ErrorCode::invalid_argument,
            "percentiles must satisfy 0 <= low < high <= 100");
    for (int ch : spec.channels)
        require(ch >= 0, ErrorCode::invalid_argument, "channel indices must be >= 0");
}

/// Percentile with linear interpolation between order statistics
/// (position p/100 * (n-1) in the sorted values).
inline double percentile(std::vector<double> v, double p)
{
    require(!v.empty(), ErrorCode::invalid_argument, "percentile of nothing");
    std::sort(v.begin(), v.end());
    const double pos = p / 100.0 * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct Image {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> rgb; // row-major, 3 bytes per pixel
};

/// False-color composite of three embedding dimensions. `coords` is r x m with
/// m = rows * cols samples in row-major pixel order. Each channel is stretched
/// linearly so its low/high percentiles map to 0/255, clipping outside; a
/// channel whose stretch bounds coincide renders as 128.
inline Image render_false_color(const Eigen::MatrixXd& coords, const RenderSpec& spec)
{
    validate(spec);
    const auto pixels = static_cast<Eigen::Index>(spec.rows) * spec.cols;
    if (coords.cols() != pixels)
        fail(ErrorCode::shape_mismatch, "coordinates hold " + std::to_string(coords.cols()) + " samples, grid "
                                            + std::to_string(spec.rows) + "x" + std::to_string(spec.cols)
                                            + " needs " + std::to_string(pixels));
    for (int ch : spec.channels)
        if (ch >= coords.rows())
            fail(ErrorCode::shape_mismatch, "channel " + std::to_string(ch) + " exceeds embedding dimension "
                                                + std::to_string(coords.rows()));
    Image img{spec.rows, spec.cols, std::vector<std::uint8_t>(static_cast<std::size_t>(pixels) * 3)};
    for (std::size_t c = 0; c < 3; ++c) {
        const Eigen::VectorXd v = coords.row(spec.channels[c]).transpose();
        const std::vector<double> values(v.data(), v.data() + v.size());
        const double lo = percentile(values, spec.low);
        const double hi = percentile(values, spec.high);
        for (Eigen::Index i = 0; i < pixels; ++i) {
            long byte = 128;
            if (hi > lo)
                byte = std::lround(std::clamp((v(i) - lo) / (hi - lo), 0.0, 1.0) * 255.0);
            img.rgb[static_cast<std::size_t>(i) * 3 + c] = static_cast<std::uint8_t>(byte);
        }
    }
    return img;
}

inline std::string encode_ppm(const Image& img)
{
    std::string out = "P6\n" + std::to_string(img.cols) + " " + std::to_string(img.rows) + "\n255\n";
    out.append(reinterpret_cast<const char*>(img.rgb.data()), img.rgb.size());
    return out;
}

inline void write_ppm(const std::string& path, const Image& img) { csv::write_file(path, encode_ppm(img)); }

} // namespace ckada
