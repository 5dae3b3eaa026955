#pragma once

#include "ckada/error.hpp"
#include "ckada/scatter.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

// Classifiers operating on embedding coordinates stored column-wise (r x n).
namespace ckada {

inline void require_labels_match(const Eigen::MatrixXd& coords, const std::vector<int>& labels)
{
    require(static_cast<Eigen::Index>(labels.size()) == coords.cols(), ErrorCode::length_mismatch,
            "have " + std::to_string(labels.size()) + " labels for " + std::to_string(coords.cols()) + " samples");
}

inline void require_query_dims(Eigen::Index expected, const Eigen::MatrixXd& queries)
{
    if (queries.rows() != expected)
        fail(ErrorCode::dimension_mismatch, "queries have dimension " + std::to_string(queries.rows())
                                                + ", model expects " + std::to_string(expected));
}

// ---------------------------------------------------------------------------
// K nearest neighbours

struct KnnModel {
    Eigen::MatrixXd references; // r x n
    std::vector<int> labels;
    int k = 1;
    int classes = 0;
};

inline KnnModel knn_fit(const Eigen::MatrixXd& coords, const std::vector<int>& labels, int k)
{
    require_labels_match(coords, labels);
    require(k >= 1 && k <= coords.cols(), ErrorCode::invalid_argument,
            "knn k=" + std::to_string(k) + " outside 1.." + std::to_string(coords.cols()));
    return {coords, labels, k, class_count(labels)};
}

/// Majority vote over the k Euclidean-nearest references. Distance ties go to
/// the smaller reference index, vote ties to the smaller class.
inline std::vector<int> knn_predict(const KnnModel& model, const Eigen::MatrixXd& queries)
{
    require_query_dims(model.references.rows(), queries);
    const auto n = model.references.cols();
    std::vector<int> out(static_cast<std::size_t>(queries.cols()));
    std::vector<std::pair<double, Eigen::Index>> dist(static_cast<std::size_t>(n));
    std::vector<int> votes(static_cast<std::size_t>(model.classes) + 1);
    for (Eigen::Index q = 0; q < queries.cols(); ++q) {
        for (Eigen::Index i = 0; i < n; ++i)
            dist[static_cast<std::size_t>(i)] = {(model.references.col(i) - queries.col(q)).squaredNorm(), i};
        std::partial_sort(dist.begin(), dist.begin() + model.k, dist.end());
        std::fill(votes.begin(), votes.end(), 0);
        for (int j = 0; j < model.k; ++j)
            ++votes[static_cast<std::size_t>(model.labels[static_cast<std::size_t>(dist[static_cast<std::size_t>(j)].second)])];
        out[static_cast<std::size_t>(q)] =
            static_cast<int>(std::max_element(votes.begin() + 1, votes.end()) - votes.begin());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Gaussian maximum likelihood

struct GaussianMlModel {
    std::vector<Eigen::VectorXd> means;
    std::vector<Eigen::MatrixXd> covariances;
    std::vector<double> log_priors;
    double shrinkage = 0.05;
    bool equal_priors = true;
};

/// Per-class mean and covariance shrunk toward a scaled identity:
///   S_l = (1 - s) Ŝ_l + s (tr(Ŝ_l) / r) I.
/// A small diagonal load is added whenever the result is not numerically PD.
inline GaussianMlModel gaussian_ml_fit(const Eigen::MatrixXd& coords, const std::vector<int>& labels,
                                       double shrinkage, bool equal_priors = true)
{
    require_labels_match(coords, labels);
    require(shrinkage >= 0.0 && shrinkage <= 1.0, ErrorCode::invalid_argument, "shrinkage must be in [0, 1]");
    const int c = class_count(labels);
    const auto r = coords.rows();
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < labels.size(); ++i)
        members[static_cast<std::size_t>(labels[i] - 1)].push_back(static_cast<Eigen::Index>(i));

    GaussianMlModel model;
    model.shrinkage = shrinkage;
    model.equal_priors = equal_priors;
    for (int l = 0; l < c; ++l) {
        const auto& idx = members[static_cast<std::size_t>(l)];
        if (idx.size() < 2)
            fail(ErrorCode::class_too_small, "class " + std::to_string(l + 1) + " has "
                                                 + std::to_string(idx.size()) + " samples, need >= 2");
        Eigen::MatrixXd x(r, static_cast<Eigen::Index>(idx.size()));
        for (std::size_t j = 0; j < idx.size(); ++j)
            x.col(static_cast<Eigen::Index>(j)) = coords.col(idx[j]);
        const Eigen::VectorXd mean = x.rowwise().mean();
        const Eigen::MatrixXd centered = x.colwise() - mean;
        Eigen::MatrixXd cov = centered * centered.transpose() / static_cast<double>(idx.size() - 1);
        const double avg_var = cov.trace() / static_cast<double>(r);
        cov = (1.0 - shrinkage) * cov;
        cov.diagonal().array() += shrinkage * avg_var;
        cov = symmetrized(cov);
        const double load = std::max(1e-10 * avg_var, 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
        if (!(eig.eigenvalues().minCoeff() > load))
            cov.diagonal().array() += load - std::min(eig.eigenvalues().minCoeff(), 0.0);
        model.means.push_back(mean);
        model.covariances.push_back(cov);
        model.log_priors.push_back(equal_priors ? 0.0
                                                : std::log(static_cast<double>(idx.size()) / labels.size()));
    }
    return model;
}

/// Argmax over classes of the Gaussian log-likelihood (plus log prior); ties
/// go to the smaller class.
inline std::vector<int> gaussian_ml_predict(const GaussianMlModel& model, const Eigen::MatrixXd& queries)
{
    require(!model.means.empty(), ErrorCode::invalid_argument, "empty model");
    require_query_dims(model.means.front().size(), queries);
    const auto c = model.means.size();
    std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
    std::vector<double> log_dets;
    for (const auto& cov : model.covariances) {
        factors.emplace_back(cov);
        if (factors.back().info() != Eigen::Success)
            fail(ErrorCode::not_positive_definite, "class covariance is not positive definite");
        log_dets.push_back(2.0 * factors.back().matrixLLT().diagonal().array().log().sum());
    }
    std::vector<int> out(static_cast<std::size_t>(queries.cols()));
    for (Eigen::Index q = 0; q < queries.cols(); ++q) {
        double best = -std::numeric_limits<double>::infinity();
        int arg = 1;
        for (std::size_t l = 0; l < c; ++l) {
            const Eigen::VectorXd diff = queries.col(q) - model.means[l];
            const double maha = diff.dot(factors[l].solve(diff));
            const double score = -0.5 * (log_dets[l] + maha) + model.log_priors[l];
            if (score > best) {
                best = score;
                arg = static_cast<int>(l) + 1;
            }
        }
        out[static_cast<std::size_t>(q)] = arg;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Orthogonal matching pursuit and the sparse representation classifier

struct OmpResult {
    Eigen::VectorXd coefficients;
    std::vector<Eigen::Index> support; // in selection order
    std::vector<double> residual_norms; // after each iteration, starting with |y|
};

inline constexpr double omp_residual_tolerance = 1e-6;

/// Greedy sparse coding of y over unit-norm atoms (columns). Each step adds
/// the atom with the largest |<residual, atom>| (smallest index on ties) and
/// refits all active coefficients by least squares. Stops after s atoms, when
/// the residual norm drops below 1e-6, or when no atom correlates with the
/// residual any more.
inline OmpResult omp(const Eigen::MatrixXd& dictionary, const Eigen::VectorXd& y, int s)
{
    const auto n = dictionary.cols();
    require(y.size() == dictionary.rows(), ErrorCode::dimension_mismatch,
            "target has dimension " + std::to_string(y.size()) + ", dictionary " + std::to_string(dictionary.rows()));
    require(s >= 1 && s <= n, ErrorCode::invalid_argument, "sparsity must be in 1..n");

    OmpResult out;
    out.coefficients = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd residual = y;
    out.residual_norms.push_back(residual.norm());
    const double stall = 1e-12 * std::max(y.norm(), 1e-300);
    std::vector<char> active(static_cast<std::size_t>(n), 0);
    Eigen::VectorXd solution;
    while (static_cast<int>(out.support.size()) < s && residual.norm() >= omp_residual_tolerance) {
        const Eigen::VectorXd corr = dictionary.transpose() * residual;
        Eigen::Index pick = -1;
        double best = 0.0;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (active[static_cast<std::size_t>(j)])
                continue;
            if (pick < 0 || std::abs(corr(j)) > best) {
                best = std::abs(corr(j));
                pick = j;
            }
        }
        if (pick < 0 || best <= stall)
            break;
        active[static_cast<std::size_t>(pick)] = 1;
        out.support.push_back(pick);

        Eigen::MatrixXd sub(dictionary.rows(), static_cast<Eigen::Index>(out.support.size()));
        for (std::size_t j = 0; j < out.support.size(); ++j)
            sub.col(static_cast<Eigen::Index>(j)) = dictionary.col(out.support[j]);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
        if (qr.rank() < sub.cols())
            fail(ErrorCode::numerical_breakdown, "active set of size " + std::to_string(sub.cols()) + " is singular");
        solution = qr.solve(y);
        residual = y - sub * solution;
        out.residual_norms.push_back(residual.norm());
    }
    for (std::size_t j = 0; j < out.support.size(); ++j)
        out.coefficients(out.support[j]) = solution(static_cast<Eigen::Index>(j));
    return out;
}

struct SrcModel {
    Eigen::MatrixXd dictionary; // r x n, unit columns
    std::vector<int> labels;
    int sparsity = 1;
    int classes = 0;
};

/// Dictionary of training embeddings, each column rescaled to unit norm.
inline SrcModel src_fit(const Eigen::MatrixXd& coords, const std::vector<int>& labels, int sparsity)
{
    require_labels_match(coords, labels);
    require(sparsity >= 1 && sparsity <= coords.cols(), ErrorCode::invalid_argument,
            "sparsity must be in 1.." + std::to_string(coords.cols()));
    SrcModel model{coords, labels, sparsity, class_count(labels)};
    for (Eigen::Index j = 0; j < coords.cols(); ++j) {
        const double norm = coords.col(j).norm();
        if (!(norm >= 1e-12))
            fail(ErrorCode::zero_sample, "training embedding " + std::to_string(j) + " has zero norm");
        model.dictionary.col(j) /= norm;
    }
    return model;
}

struct SrcPrediction {
    std::vector<int> labels;
    /// Set when every class residual was equal, e.g. an all-zero code.
    std::vector<char> low_confidence;
};

/// Codes each query with omp and picks the class whose coefficients alone
/// reconstruct it with the smallest residual (ties to the smaller class).
inline SrcPrediction src_predict(const SrcModel& model, const Eigen::MatrixXd& queries)
{
    require_query_dims(model.dictionary.rows(), queries);
    SrcPrediction out;
    out.labels.resize(static_cast<std::size_t>(queries.cols()));
    out.low_confidence.resize(static_cast<std::size_t>(queries.cols()));
    const auto c = static_cast<std::size_t>(model.classes);
    std::vector<Eigen::VectorXd> recon(c);
    for (Eigen::Index q = 0; q < queries.cols(); ++q) {
        const Eigen::VectorXd y = queries.col(q);
        const auto code = omp(model.dictionary, y, model.sparsity);
        for (auto& v : recon)
            v = Eigen::VectorXd::Zero(y.size());
        for (auto j : code.support)
            recon[static_cast<std::size_t>(model.labels[static_cast<std::size_t>(j)] - 1)] +=
                code.coefficients(j) * model.dictionary.col(j);
        double best = std::numeric_limits<double>::infinity();
        double worst = -1.0;
        int arg = 1;
        for (std::size_t l = 0; l < c; ++l) {
            const double res = (y - recon[l]).norm();
            if (res < best) {
                best = res;
                arg = static_cast<int>(l) + 1;
            }
            worst = std::max(worst, res);
        }
        out.labels[static_cast<std::size_t>(q)] = arg;
        out.low_confidence[static_cast<std::size_t>(q)] = worst == best;
    }
    return out;
}

// ---------------------------------------------------------------------------
// Uniform front end

enum class ClassifierKind { knn, ml, src };

inline std::string to_string(ClassifierKind k)
{
    switch (k) {
    case ClassifierKind::knn: return "knn";
    case ClassifierKind::ml: return "ml";
    case ClassifierKind::src: return "src";
    }
    return "?";
}

inline ClassifierKind parse_classifier(const std::string& s)
{
    if (s == "knn")
        return ClassifierKind::knn;
    if (s == "ml")
        return ClassifierKind::ml;
    if (s == "src")
        return ClassifierKind::src;
    fail(ErrorCode::invalid_argument, "unknown classifier '" + s + "'");
}

struct ClassifierParams {
    int k = 5;
    int sparsity = 10;
    double shrinkage = 0.05;
    bool equal_priors = true;
};

struct ClassifierModel {
    ClassifierKind kind = ClassifierKind::knn;
    ClassifierParams params;
    std::variant<KnnModel, GaussianMlModel, SrcModel> model;
};

/// Fits a classifier; k and sparsity are capped at the number of references.
inline ClassifierModel fit_classifier(ClassifierKind kind, const ClassifierParams& params,
                                      const Eigen::MatrixXd& coords, const std::vector<int>& labels)
{
    const int n = static_cast<int>(coords.cols());
    ClassifierModel out{kind, params, KnnModel{}};
    switch (kind) {
    case ClassifierKind::knn:
        out.params.k = std::min(params.k, n);
        out.model = knn_fit(coords, labels, out.params.k);
        break;
    case ClassifierKind::ml:
        out.model = gaussian_ml_fit(coords, labels, params.shrinkage, params.equal_priors);
        break;
    case ClassifierKind::src:
        out.params.sparsity = std::min(params.sparsity, n);
        out.model = src_fit(coords, labels, out.params.sparsity);
        break;
    }
    return out;
}

inline std::vector<int> predict(const ClassifierModel& model, const Eigen::MatrixXd& queries)
{
    switch (model.kind) {
    case ClassifierKind::knn: return knn_predict(std::get<KnnModel>(model.model), queries);
    case ClassifierKind::ml: return gaussian_ml_predict(std::get<GaussianMlModel>(model.model), queries);
    case ClassifierKind::src: return src_predict(std::get<SrcModel>(model.model), queries).labels;
    }
    return {};
}

} // namespace ckada
