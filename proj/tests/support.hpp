#pragma once

// Random instance generators and brute-force reference computations shared by
// the unit tests and the acceptance suite. The references are written from the
// definitions with plain loops and deliberately avoid the library routines
// they are compared against.

#include "ckada/dataset.hpp"
#include "ckada/error.hpp"
#include "ckada/random.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace support {

/// Code of the ckada::Error thrown by fn, or nullopt when it returns normally.
template <class Fn>
std::optional<ckada::ErrorCode> error_of(Fn&& fn)
{
    try {
        fn();
    } catch (const ckada::Error& e) {
        return e.code();
    }
    return std::nullopt;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("ckada_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// ---------------------------------------------------------------------------
// Generators

/// Labels 1..c, each class at least `min_per_class`, shuffled.
inline std::vector<int> random_labels(ckada::Rng& rng, int n, int c, int min_per_class = 1)
{
    std::vector<int> y;
    for (int l = 1; l <= c; ++l)
        for (int k = 0; k < min_per_class; ++k)
            y.push_back(l);
    while (static_cast<int>(y.size()) < n)
        y.push_back(1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(c))));
    rng.shuffle(y);
    return y;
}

inline Eigen::MatrixXd random_matrix(ckada::Rng& rng, Eigen::Index rows, Eigen::Index cols)
{
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j)
            m(i, j) = rng.normal();
    return m;
}

/// Rows drawn around a per-class center, then scaled to unit norm.
inline Eigen::MatrixXd random_unit_rows(ckada::Rng& rng, const std::vector<int>& y, Eigen::Index d,
                                        double spread = 0.7)
{
    const int c = *std::max_element(y.begin(), y.end());
    const Eigen::MatrixXd centers = random_matrix(rng, c, d);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(y.size()), d);
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j)
            x(static_cast<Eigen::Index>(i), j) = centers(y[i] - 1, j) + spread * rng.normal();
        x.row(static_cast<Eigen::Index>(i)).normalize();
    }
    return x;
}

inline ckada::MultiSourceDataset random_dataset(ckada::Rng& rng, int n, int c, const std::vector<int>& dims,
                                                int min_per_class = 2)
{
    ckada::MultiSourceDataset ds;
    auto y = random_labels(rng, n, c, min_per_class);
    for (std::size_t m = 0; m < dims.size(); ++m) {
        Eigen::MatrixXd x = random_unit_rows(rng, y, dims[m]);
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            x.row(i) *= std::exp(rng.uniform(-1.0, 1.0));
        ds.sources.push_back({"s" + std::to_string(m + 1), x});
    }
    ds.labels = y;
    for (int l = 1; l <= c; ++l)
        ds.label_values.push_back(l);
    return ds;
}

// ---------------------------------------------------------------------------
// Reference computations

/// Per-class mean of unit rows, d x c.
inline Eigen::MatrixXd ref_class_means(const Eigen::MatrixXd& xn, const std::vector<int>& y, int c)
{
    Eigen::MatrixXd mu = Eigen::MatrixXd::Zero(xn.cols(), c);
    std::vector<int> count(static_cast<std::size_t>(c), 0);
    for (std::size_t i = 0; i < y.size(); ++i) {
        for (Eigen::Index k = 0; k < xn.cols(); ++k)
            mu(k, y[i] - 1) += xn(static_cast<Eigen::Index>(i), k);
        ++count[static_cast<std::size_t>(y[i] - 1)];
    }
    for (int l = 0; l < c; ++l)
        mu.col(l) /= count[static_cast<std::size_t>(l)];
    return mu;
}

/// Within-class outer products: sum over classes l, samples i in l, of mu_l x_i^T.
inline Eigen::MatrixXd ref_within(const Eigen::MatrixXd& xn, const std::vector<int>& y, int c)
{
    const auto mu = ref_class_means(xn, y, c);
    const auto d = xn.cols();
    Eigen::MatrixXd o = Eigen::MatrixXd::Zero(d, d);
    for (std::size_t i = 0; i < y.size(); ++i)
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b)
                o(a, b) += mu(a, y[i] - 1) * xn(static_cast<Eigen::Index>(i), b);
    return o;
}

/// Between-class outer products: sum over classes of n_l mu mu_l^T.
inline Eigen::MatrixXd ref_between(const Eigen::MatrixXd& xn, const std::vector<int>& y, int c)
{
    const auto mu_l = ref_class_means(xn, y, c);
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(xn.cols());
    for (Eigen::Index i = 0; i < xn.rows(); ++i)
        mu += xn.row(i).transpose();
    mu /= static_cast<double>(xn.rows());
    std::vector<int> count(static_cast<std::size_t>(c), 0);
    for (int l : y)
        ++count[static_cast<std::size_t>(l - 1)];
    Eigen::MatrixXd o = Eigen::MatrixXd::Zero(xn.cols(), xn.cols());
    for (int l = 0; l < c; ++l)
        o += count[static_cast<std::size_t>(l)] * mu * mu_l.col(l).transpose();
    return o;
}

/// n mu mu^T with mu the grand mean of the unit rows.
inline Eigen::MatrixXd ref_total(const Eigen::MatrixXd& xn)
{
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(xn.cols());
    for (Eigen::Index i = 0; i < xn.rows(); ++i)
        mu += xn.row(i).transpose();
    mu /= static_cast<double>(xn.rows());
    return static_cast<double>(xn.rows()) * mu * mu.transpose();
}

/// Local-scaled angular affinity from its definition; the k-th neighbour is
/// found by sorting all other samples by chordal distance.
inline Eigen::MatrixXd ref_angular_affinity(const Eigen::MatrixXd& xn, int k_nn)
{
    const auto n = xn.rows();
    std::vector<double> gamma(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        std::vector<double> d;
        for (Eigen::Index j = 0; j < n; ++j)
            if (j != i)
                d.push_back(std::max(0.0, 2.0 - 2.0 * xn.row(i).dot(xn.row(j))));
        std::sort(d.begin(), d.end());
        gamma[static_cast<std::size_t>(i)] = std::max(std::sqrt(d[static_cast<std::size_t>(k_nn - 1)]), 1e-6);
    }
    Eigen::MatrixXd a(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            a(i, j) = std::exp(-(2.0 - 2.0 * xn.row(i).dot(xn.row(j)))
                               / (gamma[static_cast<std::size_t>(i)] * gamma[static_cast<std::size_t>(j)]));
    return a;
}

/// Median of all n(n-1)/2 pairwise Euclidean distances.
inline double ref_median_distance(const Eigen::MatrixXd& x)
{
    std::vector<double> d;
    for (Eigen::Index i = 0; i < x.rows(); ++i)
        for (Eigen::Index j = i + 1; j < x.rows(); ++j)
            d.push_back((x.row(i) - x.row(j)).norm());
    std::sort(d.begin(), d.end());
    const auto m = d.size();
    return m % 2 ? d[m / 2] : 0.5 * (d[m / 2 - 1] + d[m / 2]);
}

/// Eigenvalues of b^{-1} a through a general (nonsymmetric) dense solver, sorted.
inline Eigen::VectorXd ref_generalized_eigenvalues(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const Eigen::MatrixXd m = b.fullPivLu().solve(a);
    Eigen::EigenSolver<Eigen::MatrixXd> es(m, false);
    Eigen::VectorXd ev = es.eigenvalues().real();
    std::sort(ev.data(), ev.data() + ev.size());
    return ev;
}

/// Largest principal angle (radians) between the column spans of a and b,
/// computed from the sine side so tiny angles keep their precision.
inline double max_principal_angle(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ()
        * Eigen::MatrixXd::Identity(a.rows(), a.cols());
    const Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ()
        * Eigen::MatrixXd::Identity(b.rows(), b.cols());
    const Eigen::MatrixXd resid = qb - qa * (qa.transpose() * qb);
    const double s = Eigen::JacobiSVD<Eigen::MatrixXd>(resid).singularValues().maxCoeff();
    return std::asin(std::min(1.0, s));
}

inline double rel_frobenius(const Eigen::MatrixXd& got, const Eigen::MatrixXd& want)
{
    const double scale = std::max(want.norm(), 1e-300);
    return (got - want).norm() / scale;
}

/// Random orthogonal matrix via QR of a Gaussian matrix.
inline Eigen::MatrixXd random_orthogonal(ckada::Rng& rng, Eigen::Index n)
{
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rng, n, n));
    Eigen::MatrixXd q = qr.householderQ();
    for (Eigen::Index j = 0; j < n; ++j)
        if (qr.matrixQR()(j, j) < 0)
            q.col(j) = -q.col(j);
    return q;
}

/// Best s-term approximation over an orthonormal dictionary: keep the s
/// largest |D^T y| (ties to the smaller index), zero the rest.
inline Eigen::VectorXd ref_hard_threshold(const Eigen::MatrixXd& d, const Eigen::VectorXd& y, int s)
{
    const Eigen::VectorXd c = d.transpose() * y;
    std::vector<Eigen::Index> order(static_cast<std::size_t>(c.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return std::abs(c(a)) > std::abs(c(b)); });
    Eigen::VectorXd out = Eigen::VectorXd::Zero(c.size());
    for (int k = 0; k < s; ++k)
        out(order[static_cast<std::size_t>(k)]) = c(order[static_cast<std::size_t>(k)]);
    return out;
}

} // namespace support
