#pragma once

#include "ckada/classifiers.hpp"
#include "ckada/dataset.hpp"
#include "ckada/embedding.hpp"
#include "ckada/error.hpp"
#include "ckada/parallel.hpp"
#include "ckada/random.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

namespace ckada {

// ---------------------------------------------------------------------------
// Metrics

struct Metrics {
    double oa = 0.0; // percent
    double aa = 0.0; // percent, over classes present in the truth
    /// Percent correct per class; NaN for a class with no true samples.
    std::vector<double> per_class;
    /// confusion(t - 1, p - 1) counts samples of true class t predicted as p.
    Eigen::MatrixXi confusion;
};

/// `classes` <= 0 means the largest label seen in either vector.
inline Metrics evaluate(const std::vector<int>& predicted, const std::vector<int>& truth, int classes = 0)
{
    require(predicted.size() == truth.size(), ErrorCode::length_mismatch,
            "have " + std::to_string(predicted.size()) + " predictions for " + std::to_string(truth.size())
                + " true labels");
    require(!truth.empty(), ErrorCode::invalid_argument, "nothing to evaluate");
    int c = classes;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        require(truth[i] >= 1 && predicted[i] >= 1, ErrorCode::invalid_argument, "labels must be >= 1");
        if (classes <= 0)
            c = std::max({c, truth[i], predicted[i]});
        else
            require(truth[i] <= c && predicted[i] <= c, ErrorCode::invalid_argument,
                    "label exceeds class count " + std::to_string(c));
    }

    Metrics m;
    m.confusion = Eigen::MatrixXi::Zero(c, c);
    for (std::size_t i = 0; i < truth.size(); ++i)
        ++m.confusion(truth[i] - 1, predicted[i] - 1);
    m.oa = 100.0 * m.confusion.trace() / static_cast<double>(truth.size());
    m.per_class.assign(static_cast<std::size_t>(c), std::numeric_limits<double>::quiet_NaN());
    double sum = 0.0;
    int present = 0;
    for (int l = 0; l < c; ++l) {
        const int total = m.confusion.row(l).sum();
        if (total == 0)
            continue;
        m.per_class[static_cast<std::size_t>(l)] = 100.0 * m.confusion(l, l) / total;
        sum += m.per_class[static_cast<std::size_t>(l)];
        ++present;
    }
    m.aa = sum / present;
    return m;
}

struct MeanStd {
    double mean = 0.0;
    double std = 0.0; // sample standard deviation; 0 for a single value
};

inline MeanStd mean_std(const std::vector<double>& values)
{
    require(!values.empty(), ErrorCode::invalid_argument, "no values");
    MeanStd out;
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values)
            ss += (v - out.mean) * (v - out.mean);
        out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Stratified folds

struct Fold {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> validation;
};

/// Each class is shuffled with its own stream and dealt round-robin into the
/// folds. Index lists come back sorted.
inline std::vector<Fold> kfold_stratified(const std::vector<int>& labels, int folds, std::uint64_t seed)
{
    require(folds >= 2, ErrorCode::invalid_argument, "need at least 2 folds");
    const int c = class_count(labels);
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(c));
    for (std::size_t i = 0; i < labels.size(); ++i)
        members[static_cast<std::size_t>(labels[i] - 1)].push_back(static_cast<Eigen::Index>(i));

    std::vector<std::vector<char>> in_fold(static_cast<std::size_t>(folds),
                                           std::vector<char>(labels.size(), 0));
    for (int l = 0; l < c; ++l) {
        auto& idx = members[static_cast<std::size_t>(l)];
        if (static_cast<int>(idx.size()) < folds)
            fail(ErrorCode::class_too_small, "class " + std::to_string(l + 1) + " has " + std::to_string(idx.size())
                                                 + " samples, fewer than " + std::to_string(folds) + " folds");
        auto rng = Rng::derive(seed, static_cast<std::uint64_t>(l + 1));
        rng.shuffle(idx);
        for (std::size_t j = 0; j < idx.size(); ++j)
            in_fold[j % static_cast<std::size_t>(folds)][static_cast<std::size_t>(idx[j])] = 1;
    }
    std::vector<Fold> out(static_cast<std::size_t>(folds));
    for (std::size_t f = 0; f < out.size(); ++f)
        for (std::size_t i = 0; i < labels.size(); ++i)
            (in_fold[f][i] ? out[f].validation : out[f].train).push_back(static_cast<Eigen::Index>(i));
    return out;
}

/// Requested fold count, reduced to the smallest class size (never below 2).
inline int effective_folds(const std::vector<int>& labels, int requested)
{
    const auto counts = label_counts(labels, class_count(labels));
    const int smallest = *std::min_element(counts.begin(), counts.end());
    const int folds = std::min(requested, smallest);
    if (folds < 2)
        fail(ErrorCode::class_too_small, "cross-validation needs at least 2 samples in every class");
    return folds;
}

// ---------------------------------------------------------------------------
// Grid search

inline std::vector<double> default_sigma_multipliers() { return {0.125, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0}; }

struct GridSpec {
    /// Candidate multipliers of each source's median-heuristic width; the grid
    /// takes their cartesian product over sources.
    std::vector<double> sigma_multipliers = default_sigma_multipliers();
    /// Explicit composite weights; empty means the simplex lattice with
    /// `alpha_step`.
    std::vector<std::vector<double>> alphas;
    double alpha_step = 0.1;
    /// Embedding dimensions; empty means {c - 1}.
    std::vector<int> r;
    std::vector<int> knn_k = {1, 3, 5, 7, 9};
    std::vector<int> src_sparsity = {5, 10, 20};
    std::vector<double> ml_shrinkage = {0.01, 0.05, 0.1, 0.3};
};

/// All weight vectors with entries in {0, step, 2 step, ...} summing to 1, in
/// lexicographic order.
inline std::vector<std::vector<double>> simplex_lattice(std::size_t sources, double step)
{
    require(sources >= 1, ErrorCode::invalid_argument, "need at least one source");
    require(step > 0.0 && step <= 1.0, ErrorCode::invalid_argument, "alpha_step must be in (0, 1]");
    const auto parts = static_cast<int>(std::lround(1.0 / step));
    require(std::abs(parts * step - 1.0) < 1e-9, ErrorCode::invalid_argument, "1 / alpha_step must be an integer");
    std::vector<std::vector<double>> out;
    std::vector<int> k(sources, 0);
    auto rec = [&](auto&& self, std::size_t m, int left) -> void {
        if (m + 1 == sources) {
            k[m] = left;
            std::vector<double> a(sources);
            for (std::size_t j = 0; j < sources; ++j)
                a[j] = static_cast<double>(k[j]) / parts;
            out.push_back(std::move(a));
            return;
        }
        for (int v = 0; v <= left; ++v) {
            k[m] = v;
            self(self, m + 1, left - v);
        }
    };
    rec(rec, 0, parts);
    return out;
}

struct GridPoint {
    std::vector<double> sigma_multipliers;
    std::vector<double> alphas;
    int r = 1;
    ClassifierParams classifier;

    friend bool operator<(const GridPoint& a, const GridPoint& b)
    {
        return std::tie(a.sigma_multipliers, a.alphas, a.r, a.classifier.k, a.classifier.sparsity,
                        a.classifier.shrinkage)
            < std::tie(b.sigma_multipliers, b.alphas, b.r, b.classifier.k, b.classifier.sparsity,
                       b.classifier.shrinkage);
    }
};

struct GridScore {
    GridPoint point;
    double mean_oa = 0.0;
    double std_oa = 0.0;
};

struct GridResult {
    GridPoint best;
    double best_mean_oa = 0.0;
    int folds = 0;
    std::vector<GridScore> table; // enumeration order
};

/// Options `base` with the point's widths, weights and dimension applied.
inline EmbeddingOptions apply(const EmbeddingOptions& base, const GridPoint& p)
{
    EmbeddingOptions opt = base;
    opt.sigmas.clear();
    opt.sigma_multipliers = p.sigma_multipliers;
    opt.alphas = p.alphas;
    opt.r = p.r;
    return opt;
}

namespace detail {

inline std::vector<std::vector<double>> cartesian(const std::vector<double>& values, std::size_t times)
{
    std::vector<std::vector<double>> out{{}};
    for (std::size_t t = 0; t < times; ++t) {
        std::vector<std::vector<double>> next;
        for (const auto& prefix : out)
            for (double v : values) {
                next.push_back(prefix);
                next.back().push_back(v);
            }
        out = std::move(next);
    }
    return out;
}

inline std::vector<ClassifierParams> classifier_grid(ClassifierKind kind, const GridSpec& grid)
{
    std::vector<ClassifierParams> out;
    switch (kind) {
    case ClassifierKind::knn:
        for (int k : grid.knn_k)
            out.push_back({.k = k});
        break;
    case ClassifierKind::src:
        for (int s : grid.src_sparsity)
            out.push_back({.sparsity = s});
        break;
    case ClassifierKind::ml:
        for (double l : grid.ml_shrinkage)
            out.push_back({.shrinkage = l});
        break;
    }
    return out;
}

// Keeps the first r embedding coordinates (the r smallest eigenvalues, or the
// r leading kernel principal components).
inline Eigen::MatrixXd leading(const Eigen::MatrixXd& coords, int r)
{
    return coords.topRows(std::min<Eigen::Index>(r, coords.rows()));
}

} // namespace detail

/// Exhaustive stratified k-fold search. Each (widths, weights, fold) is fitted
/// once at the largest r candidate; smaller r reuse its leading coordinates.
/// Best = highest mean validation OA, ties to the smallest GridPoint.
inline GridResult grid_search(const MultiSourceDataset& train, const EmbeddingOptions& base, ClassifierKind kind,
                              const GridSpec& grid, int folds = 5, std::uint64_t seed = 0, int threads = 1)
{
    validate(train);
    const std::size_t sources = train.sources.size();
    const bool single_width = base.method == Method::kpca;
    require(!grid.sigma_multipliers.empty(), ErrorCode::invalid_argument, "empty sigma multiplier grid");
    for (double s : grid.sigma_multipliers)
        require(s > 0.0, ErrorCode::invalid_argument, "sigma multipliers must be > 0");

    auto sigma_grid = base.family == KernelFamily::linear
        ? std::vector<std::vector<double>>{std::vector<double>(single_width ? 1 : sources, 1.0)}
        : detail::cartesian(grid.sigma_multipliers, single_width ? 1 : sources);
    auto alpha_grid = single_width ? std::vector<std::vector<double>>{{1.0}}
        : !grid.alphas.empty()     ? grid.alphas
                                   : simplex_lattice(sources, grid.alpha_step);
    if (!single_width)
        for (const auto& a : alpha_grid)
            validate_alphas(a, sources);
    std::vector<int> r_grid = grid.r;
    if (r_grid.empty())
        r_grid = {std::max(1, train.classes() - 1)};
    for (int r : r_grid)
        require(r >= 1, ErrorCode::invalid_argument, "r candidates must be >= 1");
    const int r_max = *std::max_element(r_grid.begin(), r_grid.end());
    const auto clf_grid = detail::classifier_grid(kind, grid);
    require(!clf_grid.empty(), ErrorCode::invalid_argument, "empty classifier grid");

    GridResult out;
    out.folds = effective_folds(train.labels, folds);
    const auto splits = kfold_stratified(train.labels, out.folds, seed);
    std::vector<MultiSourceDataset> fold_train, fold_valid;
    for (const auto& f : splits) {
        fold_train.push_back(subset(train, f.train));
        fold_valid.push_back(subset(train, f.validation));
    }

    const std::size_t n_fit = sigma_grid.size() * alpha_grid.size();
    const std::size_t n_inner = r_grid.size() * clf_grid.size();
    const auto n_folds = static_cast<std::size_t>(out.folds);
    // scores[(fit * folds + fold) * inner + (r, clf)]
    std::vector<double> scores(n_fit * n_folds * n_inner);
    parallel_for(n_fit * n_folds, static_cast<unsigned>(std::max(threads, 1)), [&](std::size_t task) {
        const std::size_t fit = task / n_folds, fold = task % n_folds;
        GridPoint p{sigma_grid[fit / alpha_grid.size()], alpha_grid[fit % alpha_grid.size()], r_max, {}};
        if (single_width)
            p.alphas.clear();
        const auto model = fit_embedding(fold_train[fold], apply(base, p));
        const Eigen::MatrixXd z_valid = transform(model, fold_valid[fold]);
        for (std::size_t ri = 0; ri < r_grid.size(); ++ri) {
            const Eigen::MatrixXd zt = detail::leading(model.train_coordinates, r_grid[ri]);
            const Eigen::MatrixXd zv = detail::leading(z_valid, r_grid[ri]);
            for (std::size_t ci = 0; ci < clf_grid.size(); ++ci) {
                const auto clf = fit_classifier(kind, clf_grid[ci], zt, fold_train[fold].labels);
                const auto m = evaluate(predict(clf, zv), fold_valid[fold].labels, train.classes());
                scores[task * n_inner + ri * clf_grid.size() + ci] = m.oa;
            }
        }
    });

    bool have_best = false;
    for (std::size_t fit = 0; fit < n_fit; ++fit)
        for (std::size_t ri = 0; ri < r_grid.size(); ++ri)
            for (std::size_t ci = 0; ci < clf_grid.size(); ++ci) {
                GridScore row;
                row.point = {sigma_grid[fit / alpha_grid.size()], alpha_grid[fit % alpha_grid.size()], r_grid[ri],
                             clf_grid[ci]};
                if (single_width)
                    row.point.alphas.clear();
                std::vector<double> per_fold;
                for (std::size_t f = 0; f < n_folds; ++f)
                    per_fold.push_back(scores[(fit * n_folds + f) * n_inner + ri * clf_grid.size() + ci]);
                const auto ms = mean_std(per_fold);
                row.mean_oa = ms.mean;
                row.std_oa = ms.std;
                if (!have_best || row.mean_oa > out.best_mean_oa
                    || (row.mean_oa == out.best_mean_oa && row.point < out.best)) {
                    out.best = row.point;
                    out.best_mean_oa = row.mean_oa;
                    have_best = true;
                }
                out.table.push_back(std::move(row));
            }
    return out;
}

/// CSV view of the score table: one column per source width multiplier and
/// weight, then r, the classifier parameter, mean_oa and std_oa.
inline std::string format_score_table(const GridResult& result, ClassifierKind kind,
                                      const std::vector<std::string>& source_ids)
{
    std::string out;
    const auto& first = result.table.front().point;
    for (std::size_t m = 0; m < first.sigma_multipliers.size(); ++m)
        out += "sigma_mult_" + (first.sigma_multipliers.size() == 1 && source_ids.size() != 1 ? "stacked" : source_ids[m]) + ",";
    for (std::size_t m = 0; m < first.alphas.size(); ++m)
        out += "alpha_" + source_ids[m] + ",";
    const char* param = kind == ClassifierKind::knn ? "k" : kind == ClassifierKind::src ? "sparsity" : "shrinkage";
    out += std::string("r,") + param + ",mean_oa,std_oa\n";
    for (const auto& row : result.table) {
        for (double v : row.point.sigma_multipliers) {
            csv::append_double(out, v);
            out += ',';
        }
        for (double v : row.point.alphas) {
            csv::append_double(out, v);
            out += ',';
        }
        out += std::to_string(row.point.r) + ',';
        if (kind == ClassifierKind::knn)
            out += std::to_string(row.point.classifier.k);
        else if (kind == ClassifierKind::src)
            out += std::to_string(row.point.classifier.sparsity);
        else
            csv::append_double(out, row.point.classifier.shrinkage);
        out += ',';
        csv::append_double(out, row.mean_oa);
        out += ',';
        csv::append_double(out, row.std_oa);
        out += '\n';
    }
    return out;
}

} // namespace ckada
