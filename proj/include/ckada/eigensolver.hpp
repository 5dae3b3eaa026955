#pragma once

#include "ckada/dataset.hpp"
#include "ckada/error.hpp"
#include "ckada/kernels.hpp"
#include "ckada/scatter.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ckada {

/// r eigenpairs in ascending eigenvalue order; columns of `vectors` are
/// B-orthonormal and signed so their largest-magnitude entry is positive.
struct EigenResult {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;
    double ridge = 0.0;
};

/// Flips each column so its largest-|entry| (first one on ties) is positive.
inline void fix_signs(Eigen::MatrixXd& v)
{
    for (Eigen::Index k = 0; k < v.cols(); ++k) {
        Eigen::Index arg = 0;
        v.col(k).cwiseAbs().maxCoeff(&arg);
        if (v(arg, k) < 0)
            v.col(k) = -v.col(k);
    }
}

inline void require_symmetric(const Eigen::MatrixXd& m, const char* name)
{
    require(m.rows() == m.cols(), ErrorCode::shape_mismatch, std::string(name) + " is not square");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    require((m - m.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * scale, ErrorCode::invalid_argument,
            std::string(name) + " is not symmetric");
}

/// Smallest r eigenpairs of a v = lambda (b + ridge I) v via Cholesky
/// reduction of the regularized b. Throws NotPositiveDefinite if that
/// factorization fails.
inline EigenResult gsep_smallest(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::Index r, double ridge)
{
    require_symmetric(a, "a");
    require_symmetric(b, "b");
    require(a.rows() == b.rows(), ErrorCode::shape_mismatch, "a and b differ in size");
    require(r >= 1 && r <= a.rows(), ErrorCode::invalid_argument,
            "r=" + std::to_string(r) + " outside 1.." + std::to_string(a.rows()));
    require(ridge >= 0.0 && std::isfinite(ridge), ErrorCode::invalid_argument, "ridge must be >= 0");

    Eigen::MatrixXd breg = b;
    breg.diagonal().array() += ridge;
    Eigen::LLT<Eigen::MatrixXd> llt(breg);
    if (llt.info() != Eigen::Success)
        fail(ErrorCode::not_positive_definite,
             "regularized b is not positive definite at ridge " + std::to_string(ridge) + "; use a larger ridge");
    const auto lower = llt.matrixL();
    Eigen::MatrixXd tmp = lower.solve(a);
    Eigen::MatrixXd c = lower.solve(tmp.transpose());
    c = 0.5 * (c + c.transpose());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
    if (eig.info() != Eigen::Success)
        fail(ErrorCode::numerical_breakdown, "symmetric eigensolver did not converge");

    EigenResult out;
    out.ridge = ridge;
    out.values = eig.eigenvalues().head(r);
    out.vectors = llt.matrixU().solve(eig.eigenvectors().leftCols(r));
    fix_signs(out.vectors);
    return out;
}

/// Starting ridge of the default policy: 1e-6 * trace(b) / size.
inline double default_ridge(const Eigen::MatrixXd& b)
{
    const double base = 1e-6 * b.trace() / static_cast<double>(b.rows());
    return base > 0.0 ? base : 1e-12;
}

/// gsep_smallest with the ridge policy: start at `ridge` (or default_ridge
/// when unset), double on NotPositiveDefinite up to ten times. A zero
/// starting ridge that fails continues from default_ridge.
inline EigenResult gsep_smallest_regularized(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, Eigen::Index r,
                                             std::optional<double> ridge = std::nullopt)
{
    double eps = ridge.value_or(default_ridge(b));
    for (int attempt = 0;; ++attempt) {
        try {
            return gsep_smallest(a, b, r, eps);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::not_positive_definite || attempt >= 10)
                throw;
        }
        eps = eps == 0.0 ? default_ridge(b) : 2.0 * eps;
    }
}

/// max_k |a v_k - lambda_k (b + ridge I) v_k| / (|v_k| (|a|_F + |b + ridge I|_F)),
/// the backward error of each pair with the vector scaled to unit length.
inline double relative_residual(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const EigenResult& res)
{
    Eigen::MatrixXd breg = b;
    breg.diagonal().array() += res.ridge;
    const double scale = a.norm() + breg.norm();
    double worst = 0.0;
    for (Eigen::Index k = 0; k < res.vectors.cols(); ++k) {
        const Eigen::VectorXd v = res.vectors.col(k);
        worst = std::max(worst, (a * v - res.values(k) * (breg * v)).norm() / v.norm());
    }
    return scale > 0 ? worst / scale : worst;
}

enum class Method { ckada, cklada, cklfda, kpca, ada, lada };

inline std::string to_string(Method m)
{
    switch (m) {
    case Method::ckada: return "ckada";
    case Method::cklada: return "cklada";
    case Method::cklfda: return "cklfda";
    case Method::kpca: return "kpca";
    case Method::ada: return "ada";
    case Method::lada: return "lada";
    }
    return "?";
}

inline Method parse_method(const std::string& s)
{
    for (auto m : {Method::ckada, Method::cklada, Method::cklfda, Method::kpca, Method::ada, Method::lada})
        if (to_string(m) == s)
            return m;
    if (s == "cklfda_baseline")
        return Method::cklfda;
    fail(ErrorCode::invalid_argument, "unknown method '" + s + "'");
}

inline bool is_kernel_method(Method m) { return m != Method::ada && m != Method::lada; }
inline bool is_angular_method(Method m) { return m != Method::cklfda && m != Method::kpca; }

/// A fitted embedding. Kernel methods keep their (preprocessed) training
/// features so test samples can be embedded through cross-Gram matrices;
/// input-space methods keep the d x r projection.
struct EmbeddingModel {
    Method method = Method::ckada;
    int r = 0;
    /// n x r coefficient bank (kernel methods) or d x r projection (input space).
    Eigen::MatrixXd coefficients;
    Eigen::VectorXd eigenvalues;
    double ridge = 0.0;
    bool rank_warning = false;

    KernelConfig kernels;
    Eigen::Index k_nn = 0;
    std::vector<SourceMatrix> training;
    std::vector<Standardizer> standardizers;
    /// Kernel PCA centering statistics of the training Gram.
    Eigen::VectorXd gram_column_means;
    double gram_mean = 0.0;

    std::vector<Eigen::Index> source_dims;
    std::vector<long long> label_values;
    /// r x n embedding of the training samples.
    Eigen::MatrixXd train_coordinates;
};

/// Input-space ADA/LADA: T holds the generalized eigenvectors of
/// (between, within) with the r smallest eigenvalues, the ratio-trace
/// relaxation of the trace-ratio objective.
inline EmbeddingModel fit_input_space(const OuterProductPair& op, int r, std::optional<double> ridge = std::nullopt)
{
    require(op.within.rows() == op.between.rows(), ErrorCode::shape_mismatch, "outer products differ in size");
    auto res = gsep_smallest_regularized(op.between, op.within, r, ridge);
    EmbeddingModel model;
    model.method = Method::ada;
    model.r = r;
    model.coefficients = std::move(res.vectors);
    model.eigenvalues = std::move(res.values);
    model.ridge = res.ridge;
    return model;
}

/// Number of eigenvalues of a symmetric PSD matrix above 1e-10 * the largest.
inline Eigen::Index effective_rank(const Eigen::MatrixXd& k)
{
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(k, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    const double top = ev.cwiseAbs().maxCoeff();
    if (top <= 0)
        return 0;
    return (ev.array() > 1e-10 * top).count();
}

/// Kernelized discriminant embedding: solves K Wb K phi = lambda K Ww K phi
/// for the r smallest eigenvalues. Ψ (n x r) is stored as the coefficients and
/// Ψᵀ K as the training coordinates.
inline EmbeddingModel fit_kernel_embedding(const GramMatrix& k, const WeightPair& w, int r,
                                           std::optional<double> ridge = std::nullopt)
{
    require(k.values.rows() == k.values.cols(), ErrorCode::shape_mismatch, "gram matrix is not square");
    const auto n = k.values.rows();
    require(w.within.rows() == n && w.between.rows() == n, ErrorCode::shape_mismatch,
            "weight matrices do not match the gram size");
    require(r >= 1, ErrorCode::invalid_argument, "r must be >= 1");
    const int r_eff = static_cast<int>(std::min<Eigen::Index>(r, n));

    const Eigen::MatrixXd& kv = k.values;
    const Eigen::MatrixXd sb = symmetrized(kv * w.between * kv);
    const Eigen::MatrixXd sw = symmetrized(kv * w.within * kv);
    auto res = gsep_smallest_regularized(sb, sw, r_eff, ridge);

    EmbeddingModel model;
    model.method = w.kind == WeightKind::ada ? Method::ckada
        : w.kind == WeightKind::lada         ? Method::cklada
                                             : Method::cklfda;
    model.r = r_eff;
    model.rank_warning = r > n || effective_rank(kv) < r;
    model.coefficients = std::move(res.vectors);
    model.eigenvalues = std::move(res.values);
    model.ridge = res.ridge;
    model.train_coordinates = model.coefficients.transpose() * kv;
    return model;
}

/// Ψᵀ k_cross: column i is the embedding of test sample i. `k_cross` is the
/// n x m Gram between training and test samples.
inline Eigen::MatrixXd embed_out_of_sample(const EmbeddingModel& model, const GramMatrix& k_cross)
{
    if (k_cross.values.rows() != model.coefficients.rows())
        fail(ErrorCode::shape_mismatch, "cross gram has " + std::to_string(k_cross.values.rows())
                                            + " rows, model has " + std::to_string(model.coefficients.rows())
                                            + " training samples");
    if (model.method == Method::kpca) {
        Eigen::MatrixXd centered = k_cross.values;
        centered.colwise() -= model.gram_column_means;
        const Eigen::RowVectorXd col_means = k_cross.values.colwise().mean();
        centered.rowwise() -= col_means;
        centered.array() += model.gram_mean;
        return model.coefficients.transpose() * centered;
    }
    return model.coefficients.transpose() * k_cross.values;
}

/// Kernel PCA on the double-centered Gram of stacked features. Coefficients
/// are u_k / sqrt(lambda_k), so each principal direction has unit norm in
/// feature space and training coordinates equal sqrt(lambda_k) u_k.
inline EmbeddingModel fit_kpca_baseline(const Eigen::MatrixXd& stacked, const KernelSpec& spec, int r)
{
    const auto n = stacked.rows();
    require(r >= 1, ErrorCode::invalid_argument, "r must be >= 1");
    const int r_eff = static_cast<int>(std::min<Eigen::Index>(r, n));
    const GramMatrix k = gram(stacked, stacked, spec);
    EmbeddingModel model;
    model.method = Method::kpca;
    model.r = r_eff;
    model.rank_warning = r > n;
    model.gram_column_means = k.values.colwise().mean().transpose();
    model.gram_mean = model.gram_column_means.mean();

    Eigen::MatrixXd kc = k.values;
    kc.colwise() -= model.gram_column_means;
    kc.rowwise() -= model.gram_column_means.transpose();
    kc.array() += model.gram_mean;
    kc = symmetrized(kc);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(kc);
    if (eig.info() != Eigen::Success)
        fail(ErrorCode::numerical_breakdown, "kernel PCA eigensolver did not converge");
    const double top = std::max(eig.eigenvalues().maxCoeff(), 0.0);
    model.eigenvalues.resize(r_eff);
    model.coefficients.resize(n, r_eff);
    for (int j = 0; j < r_eff; ++j) {
        const Eigen::Index src = n - 1 - j;
        const double lambda = eig.eigenvalues()(src);
        model.eigenvalues(j) = lambda;
        if (lambda > 1e-12 * top && lambda > 0) {
            model.coefficients.col(j) = eig.eigenvectors().col(src) / std::sqrt(lambda);
        } else {
            model.coefficients.col(j).setZero();
            model.rank_warning = true;
        }
    }
    fix_signs(model.coefficients);
    model.train_coordinates = model.coefficients.transpose() * kc;
    return model;
}

} // namespace ckada
