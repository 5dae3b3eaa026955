#pragma once

#include "ckada/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

// Angular scatter machinery. Sample matrices are n x d (one unit-norm sample
// per row); the d x n matrix X of the outer-product formulas is their
// transpose.
namespace ckada {

inline int class_count(const std::vector<int>& labels)
{
    require(!labels.empty(), ErrorCode::invalid_argument, "empty label vector");
    const int c = *std::max_element(labels.begin(), labels.end());
    require(*std::min_element(labels.begin(), labels.end()) >= 1, ErrorCode::invalid_argument,
            "labels must be 1..c");
    return c;
}

inline std::vector<int> label_counts(const std::vector<int>& labels, int c)
{
    std::vector<int> counts(static_cast<std::size_t>(c), 0);
    for (int y : labels)
        ++counts[static_cast<std::size_t>(y - 1)];
    for (int l = 0; l < c; ++l)
        require(counts[static_cast<std::size_t>(l)] > 0, ErrorCode::empty_class,
                "class " + std::to_string(l + 1) + " has no samples");
    return counts;
}

struct AffinityMatrix {
    Eigen::MatrixXd values;
    /// Samples whose local scaling hit the 1e-6 floor.
    std::vector<Eigen::Index> degenerate;

    bool degenerate_neighborhood() const { return !degenerate.empty(); }
};

enum class WeightKind { ada, lada, lfda_baseline };

struct WeightPair {
    Eigen::MatrixXd within;
    Eigen::MatrixXd between;
    WeightKind kind = WeightKind::ada;
};

struct OuterProductPair {
    Eigen::MatrixXd within;
    Eigen::MatrixXd between;
};

inline constexpr double local_scale_floor = 1e-6;

/// Normalized class means, d x c (column l-1 is class l).
inline Eigen::MatrixXd class_means(const Eigen::MatrixXd& xn, const std::vector<int>& labels)
{
    const int c = class_count(labels);
    const auto counts = label_counts(labels, c);
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(xn.cols(), c);
    for (std::size_t i = 0; i < labels.size(); ++i)
        means.col(labels[i] - 1) += xn.row(static_cast<Eigen::Index>(i)).transpose();
    for (int l = 0; l < c; ++l)
        means.col(l) /= counts[static_cast<std::size_t>(l)];
    return means;
}

/// Normalized total mean, length d.
inline Eigen::VectorXd total_mean(const Eigen::MatrixXd& xn)
{
    return xn.colwise().mean().transpose();
}

/// Global ADA weights: within(i,j) = 1/n_l for same-class pairs, else 0;
/// between(i,j) = 1/n - 1/n_l for same-class pairs, else 1/n.
inline WeightPair ada_weights(const std::vector<int>& labels)
{
    const int c = class_count(labels);
    const auto counts = label_counts(labels, c);
    const auto n = static_cast<Eigen::Index>(labels.size());
    const double inv_n = 1.0 / static_cast<double>(n);
    WeightPair w{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Constant(n, n, inv_n), WeightKind::ada};
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const int yi = labels[static_cast<std::size_t>(i)];
            if (yi == labels[static_cast<std::size_t>(j)]) {
                const double inv_nl = 1.0 / counts[static_cast<std::size_t>(yi - 1)];
                w.within(i, j) = inv_nl;
                w.between(i, j) = inv_n - inv_nl;
            }
        }
    }
    return w;
}

namespace detail {

// Heat-kernel affinity exp(-dist2(i,j) / (gamma_i gamma_j)) where gamma_i is
// the distance from sample i to its k-th nearest other sample.
inline AffinityMatrix local_scaled_affinity(const Eigen::MatrixXd& dist2, Eigen::Index k_nn)
{
    const auto n = dist2.rows();
    require(k_nn >= 1 && k_nn < n, ErrorCode::invalid_argument,
            "k_nn must satisfy 1 <= k_nn < n (k_nn=" + std::to_string(k_nn) + ", n=" + std::to_string(n) + ")");
    AffinityMatrix aff{Eigen::MatrixXd(n, n), {}};
    Eigen::VectorXd gamma(n);
    std::vector<double> row(static_cast<std::size_t>(n - 1));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::size_t p = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i)
                row[p++] = dist2(i, j);
        std::nth_element(row.begin(), row.begin() + (k_nn - 1), row.end());
        gamma(i) = std::sqrt(row[static_cast<std::size_t>(k_nn - 1)]);
        if (!(gamma(i) >= local_scale_floor)) {
            gamma(i) = local_scale_floor;
            aff.degenerate.push_back(i);
        }
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        aff.values(j, j) = 1.0;
        for (Eigen::Index i = 0; i < j; ++i)
            aff.values(i, j) = aff.values(j, i) = std::exp(-dist2(i, j) / (gamma(i) * gamma(j)));
    }
    return aff;
}

} // namespace detail

/// Angular affinity with local angular scaling:
///   A(i,j) = exp(-(2 - 2 x_i.x_j) / (g_i g_j)),  g_i = sqrt(2 - 2 x_i.x_i^(k)),
/// x_i^(k) being the k_nn-th angular nearest neighbour of x_i. Rows of `xn`
/// must be unit norm.
inline AffinityMatrix angular_affinity(const Eigen::MatrixXd& xn, Eigen::Index k_nn)
{
    Eigen::MatrixXd chord2 = xn * xn.transpose();
    chord2 = (2.0 - 2.0 * chord2.array()).max(0.0).matrix();
    return detail::local_scaled_affinity(chord2, k_nn);
}

/// Euclidean heat-kernel affinity with local scaling, the Euclidean analog of
/// angular_affinity used by the baseline embedding.
inline AffinityMatrix euclidean_affinity(const Eigen::MatrixXd& x, Eigen::Index k_nn)
{
    const auto n = x.rows();
    const Eigen::MatrixXd xt = x.transpose();
    Eigen::MatrixXd dist2(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        dist2(j, j) = 0.0;
        for (Eigen::Index i = 0; i < j; ++i)
            dist2(i, j) = dist2(j, i) = (xt.col(i) - xt.col(j)).squaredNorm();
    }
    return detail::local_scaled_affinity(dist2, k_nn);
}

namespace detail {

inline WeightPair local_weights(const std::vector<int>& labels, const AffinityMatrix& aff, WeightKind kind)
{
    const int c = class_count(labels);
    const auto counts = label_counts(labels, c);
    const auto n = static_cast<Eigen::Index>(labels.size());
    require(aff.values.rows() == n && aff.values.cols() == n, ErrorCode::shape_mismatch,
            "affinity is " + std::to_string(aff.values.rows()) + "x" + std::to_string(aff.values.cols())
                + ", expected " + std::to_string(n) + "x" + std::to_string(n));
    const double inv_n = 1.0 / static_cast<double>(n);
    WeightPair w{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Constant(n, n, inv_n), kind};
    for (Eigen::Index j = 0; j < n; ++j) {
        for (Eigen::Index i = 0; i < n; ++i) {
            const int yi = labels[static_cast<std::size_t>(i)];
            if (yi == labels[static_cast<std::size_t>(j)]) {
                const double inv_nl = 1.0 / counts[static_cast<std::size_t>(yi - 1)];
                w.within(i, j) = aff.values(i, j) * inv_nl;
                w.between(i, j) = aff.values(i, j) * (inv_n - inv_nl);
            }
        }
    }
    return w;
}

} // namespace detail

/// Local (affinity-weighted) ADA weights. Cross-class pairs get within 0 and
/// between 1/n; same-class pairs are the ADA weights scaled by A(i,j).
inline WeightPair lada_weights(const std::vector<int>& labels, const AffinityMatrix& aff)
{
    return detail::local_weights(labels, aff, WeightKind::lada);
}

/// Euclidean locality baseline: the lada_weights skeleton driven by
/// euclidean_affinity on (standardized) raw features.
inline WeightPair lfda_baseline_weights(const std::vector<int>& labels, const Eigen::MatrixXd& x, Eigen::Index k_nn)
{
    return detail::local_weights(labels, euclidean_affinity(x, k_nn), WeightKind::lfda_baseline);
}

/// Weighted combination sum_m alphas[m] * pairs[m].
inline WeightPair mix_weights(const std::vector<WeightPair>& pairs, const std::vector<double>& alphas)
{
    require(!pairs.empty() && pairs.size() == alphas.size(), ErrorCode::invalid_weights,
            "need one weight per weight pair");
    WeightPair out{Eigen::MatrixXd::Zero(pairs[0].within.rows(), pairs[0].within.cols()),
                   Eigen::MatrixXd::Zero(pairs[0].between.rows(), pairs[0].between.cols()), pairs[0].kind};
    for (std::size_t m = 0; m < pairs.size(); ++m) {
        require(pairs[m].within.rows() == out.within.rows(), ErrorCode::shape_mismatch,
                "weight pairs differ in size");
        out.within += alphas[m] * pairs[m].within;
        out.between += alphas[m] * pairs[m].between;
    }
    return out;
}

inline Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& s) { return 0.5 * (s + s.transpose()); }

/// Reformulated outer products X W Xᵀ for a weight pair, symmetrized.
inline OuterProductPair outer_products_from_weights(const Eigen::MatrixXd& xn, const WeightPair& w)
{
    require(w.within.rows() == xn.rows(), ErrorCode::shape_mismatch, "weights do not match sample count");
    return {symmetrized(xn.transpose() * w.within * xn), symmetrized(xn.transpose() * w.between * xn)};
}

/// Outer-product matrices evaluated straight from their sums.
///
/// Without an affinity (ADA):
///   within  = sum_l sum_{i in l} mu_l x_iᵀ,   between = sum_l n_l mu mu_lᵀ.
/// With an affinity (LADA):
///   within  = sum_ij Wlw(i,j) x_i x_jᵀ,       between = sum_ij Wlb(i,j) x_i x_jᵀ.
/// Both results are symmetrized.
inline OuterProductPair outer_products_direct(const Eigen::MatrixXd& xn, const std::vector<int>& labels,
                                              const AffinityMatrix* aff = nullptr)
{
    const auto d = xn.cols();
    require(static_cast<Eigen::Index>(labels.size()) == xn.rows(), ErrorCode::length_mismatch,
            "label count does not match sample count");
    OuterProductPair op{Eigen::MatrixXd::Zero(d, d), Eigen::MatrixXd::Zero(d, d)};
    if (aff == nullptr) {
        const Eigen::MatrixXd means = class_means(xn, labels);
        const Eigen::VectorXd mu = total_mean(xn);
        const auto counts = label_counts(labels, static_cast<int>(means.cols()));
        for (std::size_t i = 0; i < labels.size(); ++i)
            op.within += means.col(labels[i] - 1) * xn.row(static_cast<Eigen::Index>(i));
        for (Eigen::Index l = 0; l < means.cols(); ++l)
            op.between += counts[static_cast<std::size_t>(l)] * mu * means.col(l).transpose();
    } else {
        const auto w = lada_weights(labels, *aff);
        const auto n = xn.rows();
        for (Eigen::Index i = 0; i < n; ++i) {
            Eigen::RowVectorXd wi = Eigen::RowVectorXd::Zero(d);
            Eigen::RowVectorXd bi = Eigen::RowVectorXd::Zero(d);
            for (Eigen::Index j = 0; j < n; ++j) {
                wi += w.within(i, j) * xn.row(j);
                bi += w.between(i, j) * xn.row(j);
            }
            op.within += xn.row(i).transpose() * wi;
            op.between += xn.row(i).transpose() * bi;
        }
    }
    op.within = symmetrized(op.within);
    op.between = symmetrized(op.between);
    return op;
}

} // namespace ckada
