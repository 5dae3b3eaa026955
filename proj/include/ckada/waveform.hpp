#pragma once

#include "ckada/csv.hpp"
#include "ckada/dataset.hpp"
#include "ckada/error.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace ckada {

struct LidarPoint {
    double x = 0.0; // meters
    double y = 0.0; // meters
    double z = 0.0; // elevation, meters
    double intensity = 0.0;
};

using PointCloud = std::vector<LidarPoint>;

inline void validate(const PointCloud& pc)
{
    for (std::size_t i = 0; i < pc.size(); ++i) {
        const auto& p = pc[i];
        require(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z) && std::isfinite(p.intensity),
                ErrorCode::invalid_argument, "point " + std::to_string(i) + " has non-finite fields");
        require(p.intensity >= 0.0, ErrorCode::invalid_argument,
                "point " + std::to_string(i) + " has negative intensity");
    }
}

/// Reads x,y,z,intensity rows.
inline PointCloud load_point_cloud_csv(const std::string& path, bool header = false)
{
    const auto m = csv::parse_matrix(csv::read_file(path), header);
    require(m.rows() == 0 || m.cols() == 4, ErrorCode::parse,
            "'" + path + "' must have 4 columns (x,y,z,intensity), found " + std::to_string(m.cols()));
    PointCloud pc(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        pc[static_cast<std::size_t>(i)] = {m(i, 0), m(i, 1), m(i, 2), m(i, 3)};
    validate(pc);
    return pc;
}

struct PseudoWaveform {
    /// One row per occupied cell (row-major cell order), one column per bin.
    SourceMatrix raster;
    /// Points that fell in each (cell, bin), same shape as raster.
    Eigen::MatrixXi counts;
    /// Grid (row, col) of each raster row.
    std::vector<std::pair<int, int>> cells;
    int rows = 0;
    int cols = 0;
};

/// Rasterizes a point cloud into per-cell elevation profiles of mean intensity.
///
/// The grid origin is the minimum x/y over all points; col = floor((x - x0) /
/// cell_size), row = floor((y - y0) / cell_size). Elevation bins are half-open
/// [z_min + k*dz, z_min + (k+1)*dz) with dz = (z_max - z_min) / n_bins; points
/// outside [z_min, z_max) are dropped. Empty bins are 0.
inline PseudoWaveform build_pseudo_waveform(const PointCloud& pc, double cell_size, double z_min,
                                            double z_max, int n_bins)
{
    require(cell_size > 0.0, ErrorCode::invalid_argument, "cell_size must be > 0");
    require(z_max > z_min, ErrorCode::invalid_argument, "z_max must exceed z_min");
    require(n_bins >= 1, ErrorCode::invalid_argument, "n_bins must be >= 1");
    validate(pc);
    if (pc.empty())
        fail(ErrorCode::empty_cloud, "point cloud has no points");

    double x0 = pc.front().x, y0 = pc.front().y, x1 = x0, y1 = y0;
    for (const auto& p : pc) {
        x0 = std::min(x0, p.x);
        y0 = std::min(y0, p.y);
        x1 = std::max(x1, p.x);
        y1 = std::max(y1, p.y);
    }
    PseudoWaveform out;
    out.cols = static_cast<int>(std::floor((x1 - x0) / cell_size)) + 1;
    out.rows = static_cast<int>(std::floor((y1 - y0) / cell_size)) + 1;

    const double dz = (z_max - z_min) / n_bins;
    struct Accumulator {
        std::vector<double> sum;
        std::vector<int> count;
    };
    std::map<std::pair<int, int>, Accumulator> cells;
    for (const auto& p : pc) {
        if (!(p.z >= z_min && p.z < z_max))
            continue;
        int bin = static_cast<int>(std::floor((p.z - z_min) / dz));
        bin = std::clamp(bin, 0, n_bins - 1);
        const int col = std::min(static_cast<int>(std::floor((p.x - x0) / cell_size)), out.cols - 1);
        const int row = std::min(static_cast<int>(std::floor((p.y - y0) / cell_size)), out.rows - 1);
        auto& acc = cells[{row, col}];
        if (acc.sum.empty()) {
            acc.sum.assign(static_cast<std::size_t>(n_bins), 0.0);
            acc.count.assign(static_cast<std::size_t>(n_bins), 0);
        }
        acc.sum[static_cast<std::size_t>(bin)] += p.intensity;
        ++acc.count[static_cast<std::size_t>(bin)];
    }
    if (cells.empty())
        fail(ErrorCode::empty_cloud, "no point lies inside the elevation range");

    out.raster.id = "waveform";
    out.raster.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cells.size()), n_bins);
    out.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(cells.size()), n_bins);
    Eigen::Index r = 0;
    for (const auto& [cell, acc] : cells) {
        out.cells.push_back(cell);
        for (int b = 0; b < n_bins; ++b) {
            const auto k = static_cast<std::size_t>(b);
            out.counts(r, b) = acc.count[k];
            if (acc.count[k] > 0)
                out.raster.values(r, b) = acc.sum[k] / acc.count[k];
        }
        ++r;
    }
    return out;
}

} // namespace ckada
