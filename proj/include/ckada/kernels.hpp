#pragma once

#include "ckada/dataset.hpp"
#include "ckada/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace ckada {

enum class KernelFamily { rbf, linear };

inline std::string to_string(KernelFamily f) { return f == KernelFamily::rbf ? "rbf" : "linear"; }

inline KernelFamily parse_kernel_family(const std::string& s)
{
    if (s == "rbf")
        return KernelFamily::rbf;
    if (s == "linear")
        return KernelFamily::linear;
    fail(ErrorCode::invalid_argument, "unknown kernel family '" + s + "'");
}

/// RBF kernels use k(a, b) = exp(-|a - b|^2 / (2 sigma^2)).
struct KernelSpec {
    KernelFamily family = KernelFamily::rbf;
    double sigma = 1.0;
};

inline void validate(const KernelSpec& spec)
{
    if (spec.family == KernelFamily::rbf)
        require(std::isfinite(spec.sigma) && spec.sigma > 0.0, ErrorCode::invalid_argument,
                "rbf sigma must be > 0");
}

/// Base kernel per source plus composite mixture weights on the simplex.
struct KernelConfig {
    std::vector<KernelSpec> per_source;
    std::vector<double> alphas;
};

inline void validate_alphas(const std::vector<double>& alphas, std::size_t sources)
{
    if (alphas.size() != sources)
        fail(ErrorCode::invalid_weights, "expected " + std::to_string(sources) + " weights, got "
                                             + std::to_string(alphas.size()));
    double total = 0.0;
    for (double a : alphas) {
        if (!(a >= 0.0) || !std::isfinite(a))
            fail(ErrorCode::invalid_weights, "weights must be finite and non-negative");
        total += a;
    }
    if (std::abs(total - 1.0) > 1e-12)
        fail(ErrorCode::invalid_weights, "weights must sum to 1, got " + std::to_string(total));
}

inline void validate(const KernelConfig& cfg)
{
    require(!cfg.per_source.empty(), ErrorCode::invalid_argument, "kernel config lists no sources");
    for (const auto& s : cfg.per_source)
        validate(s);
    validate_alphas(cfg.alphas, cfg.per_source.size());
}

struct GramMatrix {
    Eigen::MatrixXd values;
    bool symmetric = false;
};

/// Kernel matrix between the rows of a and the rows of b. When a and b hold
/// identical values only the upper triangle is evaluated and mirrored, so the
/// result is exactly symmetric.
inline GramMatrix gram(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelSpec& spec)
{
    validate(spec);
    if (a.cols() != b.cols())
        fail(ErrorCode::dimension_mismatch, "gram inputs have " + std::to_string(a.cols()) + " and "
                                                + std::to_string(b.cols()) + " features");
    const bool same = a.rows() == b.rows() && (&a == &b || a == b);
    // Columns are samples below so each kernel evaluation walks contiguous memory.
    const Eigen::MatrixXd at = a.transpose();
    const Eigen::MatrixXd bt = same ? at : Eigen::MatrixXd(b.transpose());
    GramMatrix g{Eigen::MatrixXd(a.rows(), b.rows()), same};
    const double inv_two_sigma2 = spec.family == KernelFamily::rbf ? 1.0 / (2.0 * spec.sigma * spec.sigma) : 0.0;
    auto entry = [&](Eigen::Index i, Eigen::Index j) {
        if (spec.family == KernelFamily::linear)
            return at.col(i).dot(bt.col(j));
        return std::exp(-(at.col(i) - bt.col(j)).squaredNorm() * inv_two_sigma2);
    };
    for (Eigen::Index j = 0; j < g.values.cols(); ++j) {
        if (same) {
            for (Eigen::Index i = 0; i <= j; ++i)
                g.values(i, j) = g.values(j, i) = entry(i, j);
        } else {
            for (Eigen::Index i = 0; i < g.values.rows(); ++i)
                g.values(i, j) = entry(i, j);
        }
    }
    return g;
}

inline GramMatrix gram(const SourceMatrix& a, const SourceMatrix& b, const KernelSpec& spec)
{
    return gram(a.values, b.values, spec);
}

/// Entrywise sum_m alphas[m] * grams[m], accumulated in source order.
inline GramMatrix composite_gram(const std::vector<GramMatrix>& grams, const std::vector<double>& alphas)
{
    if (grams.empty())
        fail(ErrorCode::shape_mismatch, "no gram matrices to combine");
    validate_alphas(alphas, grams.size());
    const auto rows = grams.front().values.rows();
    const auto cols = grams.front().values.cols();
    GramMatrix out{Eigen::MatrixXd::Zero(rows, cols), true};
    for (std::size_t m = 0; m < grams.size(); ++m) {
        if (grams[m].values.rows() != rows || grams[m].values.cols() != cols)
            fail(ErrorCode::shape_mismatch, "gram " + std::to_string(m) + " has a different shape");
        if (alphas[m] != 0.0)
            out.values += alphas[m] * grams[m].values;
        out.symmetric = out.symmetric && grams[m].symmetric;
    }
    return out;
}

/// Median of all pairwise Euclidean row distances; 1 when that median is
/// below 1e-12.
inline double median_heuristic_sigma(const Eigen::MatrixXd& m)
{
    const auto n = m.rows();
    if (n < 2)
        fail(ErrorCode::too_few_samples, "median heuristic needs at least 2 samples");
    const Eigen::MatrixXd mt = m.transpose();
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index j = 1; j < n; ++j)
        for (Eigen::Index i = 0; i < j; ++i)
            dist.push_back((mt.col(i) - mt.col(j)).norm());
    const std::size_t half = dist.size() / 2;
    std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half), dist.end());
    double median = dist[half];
    if (dist.size() % 2 == 0) {
        const double lower = *std::max_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(half));
        median = 0.5 * (lower + median);
    }
    return median < 1e-12 ? 1.0 : median;
}

inline double median_heuristic_sigma(const SourceMatrix& m) { return median_heuristic_sigma(m.values); }

} // namespace ckada
