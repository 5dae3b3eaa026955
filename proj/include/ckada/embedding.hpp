#pragma once

#include "ckada/dataset.hpp"
#include "ckada/eigensolver.hpp"
#include "ckada/kernels.hpp"
#include "ckada/scatter.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

namespace ckada {

/// Everything needed to fit one embedding on a multi-source training set.
struct EmbeddingOptions {
    Method method = Method::cklada;
    KernelFamily family = KernelFamily::rbf;
    /// Absolute per-source kernel widths; empty means median heuristic times
    /// `sigma_multipliers` (default 1). KPCA uses a single width.
    std::vector<double> sigmas;
    std::vector<double> sigma_multipliers;
    /// Composite weights; empty means uniform.
    std::vector<double> alphas;
    /// Embedding dimension; <= 0 means c - 1 (at least 1).
    int r = 0;
    Eigen::Index k_nn = 7;
    std::optional<double> ridge;
};

namespace detail {

// Features each method works on: unit-normalized rows for the angular
// methods, z-scored columns for the Euclidean baseline, and z-scored sources
// stacked side by side for kernel PCA.
inline std::vector<SourceMatrix> preprocess(const EmbeddingModel& model, const MultiSourceDataset& ds)
{
    std::vector<SourceMatrix> out;
    if (is_angular_method(model.method)) {
        for (const auto& s : ds.sources)
            out.push_back(unit_normalize(s));
    } else {
        Eigen::Index total = 0;
        for (std::size_t m = 0; m < ds.sources.size(); ++m) {
            out.push_back({ds.sources[m].id, model.standardizers[m].apply(ds.sources[m].values)});
            total += ds.sources[m].features();
        }
        if (model.method == Method::kpca) {
            SourceMatrix stacked{"stacked", Eigen::MatrixXd(ds.samples(), total)};
            Eigen::Index offset = 0;
            for (const auto& s : out) {
                stacked.values.middleCols(offset, s.features()) = s.values;
                offset += s.features();
            }
            out = {std::move(stacked)};
        }
    }
    return out;
}

// Input-space angular methods work on [sqrt(a_1) x_1, ..., sqrt(a_M) x_M]:
// the rows stay unit norm and their inner products equal the composite
// linear kernel.
inline Eigen::MatrixXd weighted_stack(const std::vector<SourceMatrix>& sources, const std::vector<double>& alphas)
{
    Eigen::Index total = 0;
    for (const auto& s : sources)
        total += s.features();
    Eigen::MatrixXd out(sources.front().samples(), total);
    Eigen::Index offset = 0;
    for (std::size_t m = 0; m < sources.size(); ++m) {
        out.middleCols(offset, sources[m].features()) = std::sqrt(alphas[m]) * sources[m].values;
        offset += sources[m].features();
    }
    return out;
}

} // namespace detail

/// Fits the requested embedding on a labelled training set.
inline EmbeddingModel fit_embedding(const MultiSourceDataset& train, const EmbeddingOptions& opt)
{
    validate(train);
    const auto n = train.samples();
    const auto sources = train.sources.size();
    require(n >= 2, ErrorCode::too_few_samples, "need at least 2 training samples");

    EmbeddingModel model;
    model.method = opt.method;
    for (const auto& s : train.sources)
        model.source_dims.push_back(s.features());
    model.label_values = train.label_values;
    const int r = opt.r > 0 ? opt.r : std::max(1, train.classes() - 1);
    model.k_nn = std::min<Eigen::Index>(opt.k_nn, n - 1);

    model.kernels.alphas = opt.alphas.empty() ? std::vector<double>(sources, 1.0 / static_cast<double>(sources))
                                              : opt.alphas;
    if (opt.method != Method::kpca)
        validate_alphas(model.kernels.alphas, sources);

    if (!is_angular_method(opt.method))
        for (const auto& s : train.sources)
            model.standardizers.push_back(Standardizer::fit(s.values));
    auto features = detail::preprocess(model, train);

    auto width = [&](std::size_t m) {
        if (!opt.sigmas.empty()) {
            require(m < opt.sigmas.size(), ErrorCode::invalid_argument, "missing sigma for source " + std::to_string(m));
            return opt.sigmas[m];
        }
        const double mult = opt.sigma_multipliers.empty() ? 1.0
            : opt.sigma_multipliers[std::min(m, opt.sigma_multipliers.size() - 1)];
        return mult * median_heuristic_sigma(features[m].values);
    };
    for (std::size_t m = 0; m < features.size(); ++m)
        model.kernels.per_source.push_back({opt.family, opt.family == KernelFamily::rbf ? width(m) : 1.0});

    const auto& labels = train.labels;
    switch (opt.method) {
    case Method::kpca: {
        auto fitted = fit_kpca_baseline(features[0].values, model.kernels.per_source[0], r);
        fitted.kernels = model.kernels;
        fitted.kernels.alphas = {1.0};
        fitted.standardizers = std::move(model.standardizers);
        fitted.label_values = model.label_values;
        fitted.source_dims = model.source_dims;
        fitted.training = std::move(features);
        return fitted;
    }
    case Method::ada:
    case Method::lada: {
        const Eigen::MatrixXd xs = detail::weighted_stack(features, model.kernels.alphas);
        OuterProductPair op;
        // ADA uses the W^(b) between form here too: same eigenvectors as the
        // direct outer products, but the c-1 informative directions no longer
        // share eigenvalue 0 with the within-class null space.
        if (opt.method == Method::ada) {
            op = outer_products_from_weights(xs, ada_weights(labels));
        } else {
            std::vector<WeightPair> pairs;
            for (const auto& f : features)
                pairs.push_back(lada_weights(labels, angular_affinity(f.values, model.k_nn)));
            op = outer_products_from_weights(xs, mix_weights(pairs, model.kernels.alphas));
        }
        auto fitted = fit_input_space(op, static_cast<int>(std::min<Eigen::Index>(r, xs.cols())), opt.ridge);
        fitted.method = opt.method;
        fitted.kernels = model.kernels;
        fitted.k_nn = model.k_nn;
        fitted.label_values = model.label_values;
        fitted.source_dims = model.source_dims;
        fitted.train_coordinates = fitted.coefficients.transpose() * xs.transpose();
        return fitted;
    }
    default:
        break;
    }

    std::vector<GramMatrix> grams;
    std::vector<WeightPair> pairs;
    for (std::size_t m = 0; m < sources; ++m) {
        grams.push_back(gram(features[m].values, features[m].values, model.kernels.per_source[m]));
        if (opt.method == Method::cklada)
            pairs.push_back(lada_weights(labels, angular_affinity(features[m].values, model.k_nn)));
        else if (opt.method == Method::cklfda)
            pairs.push_back(lfda_baseline_weights(labels, features[m].values, model.k_nn));
    }
    const auto k = composite_gram(grams, model.kernels.alphas);
    const auto w = opt.method == Method::ckada ? ada_weights(labels) : mix_weights(pairs, model.kernels.alphas);
    auto fitted = fit_kernel_embedding(k, w, r, opt.ridge);
    fitted.method = opt.method;
    fitted.kernels = model.kernels;
    fitted.k_nn = model.k_nn;
    fitted.standardizers = std::move(model.standardizers);
    fitted.label_values = model.label_values;
    fitted.source_dims = model.source_dims;
    fitted.training = std::move(features);
    return fitted;
}

/// Embeds every sample of `ds` with a fitted model; returns r x m coordinates.
inline Eigen::MatrixXd transform(const EmbeddingModel& model, const MultiSourceDataset& ds)
{
    validate(ds, false);
    if (ds.sources.size() != model.source_dims.size())
        fail(ErrorCode::dimension_mismatch, "model expects " + std::to_string(model.source_dims.size())
                                                + " sources, got " + std::to_string(ds.sources.size()));
    for (std::size_t m = 0; m < ds.sources.size(); ++m)
        if (ds.sources[m].features() != model.source_dims[m])
            fail(ErrorCode::dimension_mismatch, "source '" + ds.sources[m].id + "' has "
                                                    + std::to_string(ds.sources[m].features())
                                                    + " features, model expects "
                                                    + std::to_string(model.source_dims[m]));
    const auto features = detail::preprocess(model, ds);
    if (!is_kernel_method(model.method)) {
        const Eigen::MatrixXd xs = detail::weighted_stack(features, model.kernels.alphas);
        return model.coefficients.transpose() * xs.transpose();
    }
    std::vector<GramMatrix> grams;
    for (std::size_t m = 0; m < features.size(); ++m)
        grams.push_back(gram(model.training[m].values, features[m].values, model.kernels.per_source[m]));
    const auto k_cross = composite_gram(grams, model.kernels.alphas);
    return embed_out_of_sample(model, k_cross);
}

} // namespace ckada
