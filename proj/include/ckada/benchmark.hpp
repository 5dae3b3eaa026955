#pragma once

#include "ckada/classifiers.hpp"
#include "ckada/dataset.hpp"
#include "ckada/embedding.hpp"
#include "ckada/model_selection.hpp"
#include "ckada/parallel.hpp"
#include "ckada/random.hpp"

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace ckada {

struct BenchmarkConfig {
    std::vector<Method> methods = {Method::cklada, Method::ckada, Method::cklfda, Method::kpca};
    std::vector<ClassifierKind> classifiers = {ClassifierKind::knn};
    std::vector<int> train_sizes = {20};
    int trials = 10;
    std::uint64_t seed = 0;
    /// Fixed settings; with a grid, its widths, weights and r are overridden
    /// per trial by cross-validation.
    EmbeddingOptions embedding;
    ClassifierParams classifier;
    std::optional<GridSpec> grid;
    int folds = 5;
    /// Train size whose per-class accuracies are tabulated; 0 means the last.
    int per_class_size = 0;
};

inline void validate(const BenchmarkConfig& cfg)
{
    require(!cfg.methods.empty() && !cfg.classifiers.empty() && !cfg.train_sizes.empty(),
            ErrorCode::invalid_argument, "benchmark needs methods, classifiers and train sizes");
    require(cfg.trials >= 1, ErrorCode::invalid_argument, "trials must be >= 1");
    for (int n : cfg.train_sizes)
        require(n >= 1, ErrorCode::invalid_argument, "train sizes must be positive");
    require(cfg.per_class_size == 0
                || std::find(cfg.train_sizes.begin(), cfg.train_sizes.end(), cfg.per_class_size)
                    != cfg.train_sizes.end(),
            ErrorCode::invalid_argument, "per_class_size must be one of the train sizes");
}

struct BenchmarkCell {
    Method method = Method::cklada;
    ClassifierKind classifier = ClassifierKind::knn;
    int train_size = 0;
    std::vector<Metrics> trials; // trial order
    std::vector<GridPoint> chosen; // per trial, when grid search ran

    std::vector<double> oa() const
    {
        std::vector<double> v;
        for (const auto& m : trials)
            v.push_back(m.oa);
        return v;
    }
    std::vector<double> aa() const
    {
        std::vector<double> v;
        for (const auto& m : trials)
            v.push_back(m.aa);
        return v;
    }
};

struct BenchmarkResult {
    std::vector<BenchmarkCell> cells; // size-major, then method, then classifier
    int per_class_size = 0;
    int classes = 0;
    std::vector<std::string> class_names;

    const BenchmarkCell& cell(Method m, ClassifierKind k, int size) const
    {
        for (const auto& c : cells)
            if (c.method == m && c.classifier == k && c.train_size == size)
                return c;
        fail(ErrorCode::invalid_argument, "no such benchmark cell");
    }
};

/// Seed for one (train size, trial) pair; every method and classifier in the
/// trial sees the same split.
inline std::uint64_t trial_seed(std::uint64_t seed, int train_size, int trial)
{
    return Rng::derive(seed, (static_cast<std::uint64_t>(train_size) << 32) | static_cast<std::uint32_t>(trial))
        .next_u64();
}

/// Methods x classifiers x train sizes, repeated over seeded stratified
/// splits. Trials run concurrently; results land in trial order.
inline BenchmarkResult run_benchmark(const MultiSourceDataset& ds, const BenchmarkConfig& cfg, int threads = 1)
{
    validate(cfg);
    validate(ds);
    BenchmarkResult out;
    out.classes = ds.classes();
    out.class_names = ds.class_names;
    out.per_class_size = cfg.per_class_size > 0 ? cfg.per_class_size : cfg.train_sizes.back();
    for (int size : cfg.train_sizes)
        for (auto m : cfg.methods)
            for (auto k : cfg.classifiers) {
                BenchmarkCell cell{m, k, size, std::vector<Metrics>(static_cast<std::size_t>(cfg.trials)), {}};
                if (cfg.grid)
                    cell.chosen.resize(static_cast<std::size_t>(cfg.trials));
                out.cells.push_back(std::move(cell));
            }

    const std::size_t per_size = cfg.methods.size() * cfg.classifiers.size();
    const auto trials = static_cast<std::size_t>(cfg.trials);
    parallel_for(cfg.train_sizes.size() * trials, static_cast<unsigned>(std::max(threads, 1)), [&](std::size_t task) {
        const std::size_t si = task / trials, t = task % trials;
        const int size = cfg.train_sizes[si];
        const auto seed = trial_seed(cfg.seed, size, static_cast<int>(t));
        const auto [train, test] = stratified_split(ds, size, seed);
        for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
            EmbeddingOptions base = cfg.embedding;
            base.method = cfg.methods[mi];
            std::optional<EmbeddingModel> shared;
            for (std::size_t ki = 0; ki < cfg.classifiers.size(); ++ki) {
                auto& cell = out.cells[si * per_size + mi * cfg.classifiers.size() + ki];
                const auto kind = cfg.classifiers[ki];
                if (cfg.grid) {
                    const auto gs = grid_search(train, base, kind, *cfg.grid, cfg.folds, seed);
                    const auto model = fit_embedding(train, apply(base, gs.best));
                    const auto clf = fit_classifier(kind, gs.best.classifier, model.train_coordinates, train.labels);
                    cell.trials[t] = evaluate(predict(clf, transform(model, test)), test.labels, ds.classes());
                    cell.chosen[t] = gs.best;
                } else {
                    if (!shared)
                        shared = fit_embedding(train, base);
                    const auto clf = fit_classifier(kind, cfg.classifier, shared->train_coordinates, train.labels);
                    cell.trials[t] = evaluate(predict(clf, transform(*shared, test)), test.labels, ds.classes());
                }
            }
        }
    });
    return out;
}

namespace detail {

inline std::string fixed(double v, int digits = 1)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string cell_label(const BenchmarkCell& c) { return to_string(c.method) + "-" + to_string(c.classifier); }

inline std::string pad(std::string s, std::size_t width)
{
    if (s.size() < width)
        s.append(width - s.size(), ' ');
    return s;
}

} // namespace detail

/// One CSV row per cell: mean and sample std of OA and AA over trials.
inline std::string format_results_csv(const BenchmarkResult& r)
{
    std::string out = "method,classifier,train_size,trials,mean_oa,std_oa,mean_aa,std_aa\n";
    for (const auto& c : r.cells) {
        const auto oa = mean_std(c.oa());
        const auto aa = mean_std(c.aa());
        out += to_string(c.method) + "," + to_string(c.classifier) + "," + std::to_string(c.train_size) + ","
            + std::to_string(c.trials.size());
        for (double v : {oa.mean, oa.std, aa.mean, aa.std}) {
            out += ',';
            csv::append_double(out, v);
        }
        out += '\n';
    }
    return out;
}

/// Per-class accuracy (mean over trials) at the per-class train size, one
/// column per method-classifier pair, followed by OA and AA rows.
inline std::string format_per_class_csv(const BenchmarkResult& r)
{
    std::vector<const BenchmarkCell*> cols;
    for (const auto& c : r.cells)
        if (c.train_size == r.per_class_size)
            cols.push_back(&c);
    std::string out = "class";
    for (const auto* c : cols)
        out += "," + detail::cell_label(*c);
    out += '\n';
    for (int l = 0; l < r.classes; ++l) {
        out += static_cast<std::size_t>(l) < r.class_names.size() ? r.class_names[static_cast<std::size_t>(l)]
                                                                  : std::to_string(l + 1);
        for (const auto* c : cols) {
            std::vector<double> acc;
            for (const auto& m : c->trials)
                if (!std::isnan(m.per_class[static_cast<std::size_t>(l)]))
                    acc.push_back(m.per_class[static_cast<std::size_t>(l)]);
            out += ',';
            if (!acc.empty())
                csv::append_double(out, mean_std(acc).mean);
        }
        out += '\n';
    }
    for (const char* row : {"OA", "AA"}) {
        out += row;
        for (const auto* c : cols) {
            out += ',';
            csv::append_double(out, mean_std(std::string(row) == "OA" ? c->oa() : c->aa()).mean);
        }
        out += '\n';
    }
    return out;
}

/// Human-readable view: rows are method-classifier pairs, columns train sizes,
/// entries "mean ± std" OA.
inline std::string format_results_table(const BenchmarkResult& r)
{
    std::vector<int> sizes;
    std::vector<std::string> labels;
    for (const auto& c : r.cells) {
        if (std::find(sizes.begin(), sizes.end(), c.train_size) == sizes.end())
            sizes.push_back(c.train_size);
        if (std::find(labels.begin(), labels.end(), detail::cell_label(c)) == labels.end())
            labels.push_back(detail::cell_label(c));
    }
    std::size_t width = 6;
    for (const auto& l : labels)
        width = std::max(width, l.size() + 2);
    std::string out = detail::pad("OA (%)", width);
    for (int s : sizes)
        out += detail::pad(std::to_string(s) + "/class", 14);
    out += '\n';
    for (const auto& l : labels) {
        out += detail::pad(l, width);
        for (int s : sizes)
            for (const auto& c : r.cells)
                if (c.train_size == s && detail::cell_label(c) == l) {
                    const auto ms = mean_std(c.oa());
                    out += detail::pad(detail::fixed(ms.mean) + " ± " + detail::fixed(ms.std), 14 + 1);
                }
        out += '\n';
    }
    return out;
}

} // namespace ckada
