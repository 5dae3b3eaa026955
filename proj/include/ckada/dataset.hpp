#pragma once

#include "ckada/csv.hpp"
#include "ckada/error.hpp"
#include "ckada/random.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

namespace ckada {

/// One feature source: n samples (rows) by d features (columns).
struct SourceMatrix {
    std::string id;
    Eigen::MatrixXd values;

    Eigen::Index samples() const { return values.rows(); }
    Eigen::Index features() const { return values.cols(); }
};

inline void validate(const SourceMatrix& m)
{
    require(m.samples() >= 1, ErrorCode::invalid_argument, "source '" + m.id + "' has no samples");
    require(m.features() >= 1, ErrorCode::invalid_argument, "source '" + m.id + "' has no features");
    require(m.values.allFinite(), ErrorCode::invalid_argument,
            "source '" + m.id + "' contains non-finite values");
}

/// Aligned feature sources sharing one sample axis and one label vector.
///
/// Labels are always contiguous 1..c. `label_values[l-1]` records the
/// original label that class l was remapped from.
struct MultiSourceDataset {
    std::vector<SourceMatrix> sources;
    std::vector<int> labels;
    std::vector<long long> label_values;
    std::vector<std::string> class_names;

    Eigen::Index samples() const { return sources.empty() ? 0 : sources.front().samples(); }
    int classes() const { return static_cast<int>(label_values.size()); }
    std::size_t source_count() const { return sources.size(); }

    std::vector<int> class_counts() const
    {
        std::vector<int> counts(static_cast<std::size_t>(classes()), 0);
        for (int y : labels)
            ++counts[static_cast<std::size_t>(y - 1)];
        return counts;
    }

    const SourceMatrix& source(const std::string& id) const
    {
        for (const auto& s : sources)
            if (s.id == id)
                return s;
        fail(ErrorCode::invalid_argument, "no source named '" + id + "'");
    }
};

/// Checks the structural invariants. With `labelled` false the label vector
/// may be empty (unlabelled data for transform).
inline void validate(const MultiSourceDataset& ds, bool labelled = true)
{
    require(!ds.sources.empty(), ErrorCode::invalid_argument, "dataset has no sources");
    for (const auto& s : ds.sources) {
        validate(s);
        if (s.samples() != ds.samples())
            fail(ErrorCode::sample_count_mismatch,
                 "source '" + s.id + "' has " + std::to_string(s.samples()) + " samples, expected "
                     + std::to_string(ds.samples()));
    }
    if (!labelled && ds.labels.empty())
        return;
    require(static_cast<Eigen::Index>(ds.labels.size()) == ds.samples(),
            ErrorCode::sample_count_mismatch,
            "label vector has " + std::to_string(ds.labels.size()) + " entries, expected "
                + std::to_string(ds.samples()));
    const int c = ds.classes();
    for (int y : ds.labels)
        require(y >= 1 && y <= c, ErrorCode::invalid_argument, "label out of range 1..c");
    const auto counts = ds.class_counts();
    for (std::size_t l = 0; l < counts.size(); ++l)
        if (counts[l] == 0)
            fail(ErrorCode::empty_class, "class " + std::to_string(ds.label_values[l]) + " has no samples");
}

/// Scales each row to unit Euclidean norm. Throws ZeroSample(row) when a row
/// norm is below 1e-12.
inline SourceMatrix unit_normalize(const SourceMatrix& m)
{
    SourceMatrix out{m.id, m.values};
    for (Eigen::Index i = 0; i < out.values.rows(); ++i) {
        const double norm = out.values.row(i).norm();
        if (!(norm >= 1e-12))
            fail(ErrorCode::zero_sample, "row " + std::to_string(i) + " of source '" + m.id
                                             + "' has norm below 1e-12");
        out.values.row(i) /= norm;
    }
    return out;
}

/// Per-feature z-scoring fitted on training data; constant features get scale 1.
struct Standardizer {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd scale;

    static Standardizer fit(const Eigen::MatrixXd& x)
    {
        Standardizer s;
        s.mean = x.colwise().mean();
        s.scale.resize(x.cols());
        for (Eigen::Index j = 0; j < x.cols(); ++j) {
            const double var = (x.col(j).array() - s.mean(j)).square().sum()
                / static_cast<double>(std::max<Eigen::Index>(x.rows(), 1));
            const double sd = std::sqrt(var);
            s.scale(j) = sd > 1e-12 ? sd : 1.0;
        }
        return s;
    }

    Eigen::MatrixXd apply(const Eigen::MatrixXd& x) const
    {
        require(x.cols() == mean.cols(), ErrorCode::dimension_mismatch,
                "standardizer fitted on " + std::to_string(mean.cols()) + " features, got "
                    + std::to_string(x.cols()));
        return ((x.rowwise() - mean).array().rowwise() / scale.array()).matrix();
    }
};

inline SourceMatrix load_source_csv(const std::string& path, bool header = false,
                                    const std::string& id = {})
{
    SourceMatrix m{id.empty() ? std::filesystem::path(path).stem().string() : id,
                   csv::parse_matrix(csv::read_file(path), header)};
    require(m.samples() >= 1, ErrorCode::parse, "'" + path + "' contains no data rows");
    validate(m);
    return m;
}

inline std::vector<long long> parse_labels(std::string_view text)
{
    std::vector<long long> out;
    for (const auto& [line_no, line] : csv::lines(text)) {
        if (line.empty())
            fail(ErrorCode::parse, "line " + std::to_string(line_no) + ": empty label");
        out.push_back(csv::parse_integer(line, line_no, 1));
    }
    return out;
}

inline std::vector<long long> load_labels_csv(const std::string& path)
{
    return parse_labels(csv::read_file(path));
}

/// Remaps arbitrary integer labels onto 1..c. When `classes` is non-empty it
/// fixes the class order and every listed class must occur (EmptyClass);
/// labels outside the list are rejected.
inline void assign_labels(MultiSourceDataset& ds, const std::vector<long long>& raw,
                          std::vector<long long> classes = {})
{
    if (classes.empty()) {
        classes = raw;
        std::sort(classes.begin(), classes.end());
        classes.erase(std::unique(classes.begin(), classes.end()), classes.end());
    }
    std::map<long long, int> index;
    for (std::size_t l = 0; l < classes.size(); ++l)
        index[classes[l]] = static_cast<int>(l) + 1;
    ds.labels.clear();
    ds.labels.reserve(raw.size());
    for (long long v : raw) {
        auto it = index.find(v);
        if (it == index.end())
            fail(ErrorCode::invalid_argument, "label " + std::to_string(v) + " is not a known class");
        ds.labels.push_back(it->second);
    }
    ds.label_values = std::move(classes);
    std::vector<int> counts(ds.label_values.size(), 0);
    for (int y : ds.labels)
        ++counts[static_cast<std::size_t>(y - 1)];
    for (std::size_t l = 0; l < counts.size(); ++l)
        if (counts[l] == 0)
            fail(ErrorCode::empty_class, "class " + std::to_string(ds.label_values[l]) + " has no samples");
}

/// Loads a manifest:
///   {"sources": [{"id": "hsi", "path": "hsi.csv", "header": false}, ...],
///    "labels": "labels.csv", "classes": [3, 7], "names": ["a", "b"]}
/// Relative paths resolve against the manifest's directory. "classes" and
/// "names" are optional; "labels" may be omitted only when `require_labels`
/// is false.
inline MultiSourceDataset load_manifest(const std::string& path, bool require_labels = true)
{
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(csv::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse, "manifest '" + path + "': " + e.what());
    }
    const auto base = std::filesystem::path(path).parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path fp(p);
        return (fp.is_absolute() ? fp : base / fp).string();
    };
    require(doc.contains("sources") && doc["sources"].is_array() && !doc["sources"].empty(),
            ErrorCode::parse, "manifest '" + path + "' needs a non-empty 'sources' array");

    MultiSourceDataset ds;
    try {
        for (const auto& entry : doc["sources"]) {
            const auto id = entry.at("id").get<std::string>();
            const bool header = entry.value("header", false);
            ds.sources.push_back(load_source_csv(resolve(entry.at("path").get<std::string>()), header, id));
        }
        for (const auto& s : ds.sources)
            if (s.samples() != ds.sources.front().samples())
                fail(ErrorCode::sample_count_mismatch,
                     "source '" + s.id + "' has " + std::to_string(s.samples()) + " rows, source '"
                         + ds.sources.front().id + "' has " + std::to_string(ds.sources.front().samples()));
        if (doc.contains("labels")) {
            auto raw = load_labels_csv(resolve(doc["labels"].get<std::string>()));
            if (static_cast<Eigen::Index>(raw.size()) != ds.samples())
                fail(ErrorCode::sample_count_mismatch,
                     "labels has " + std::to_string(raw.size()) + " rows, sources have "
                         + std::to_string(ds.samples()));
            std::vector<long long> classes;
            if (doc.contains("classes"))
                classes = doc["classes"].get<std::vector<long long>>();
            assign_labels(ds, raw, classes);
        } else if (require_labels) {
            fail(ErrorCode::parse, "manifest '" + path + "' has no 'labels' entry");
        }
        if (doc.contains("names"))
            ds.class_names = doc["names"].get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse, "manifest '" + path + "': " + e.what());
    }
    validate(ds, require_labels);
    return ds;
}

/// Writes each source and the original labels next to a manifest in `dir`.
inline void save_manifest(const MultiSourceDataset& ds, const std::string& dir)
{
    std::filesystem::create_directories(dir);
    nlohmann::json doc;
    doc["sources"] = nlohmann::json::array();
    for (const auto& s : ds.sources) {
        const auto file = s.id + ".csv";
        csv::write_matrix((std::filesystem::path(dir) / file).string(), s.values);
        doc["sources"].push_back({{"id", s.id}, {"path", file}});
    }
    if (!ds.labels.empty()) {
        std::string text;
        for (int y : ds.labels)
            text += std::to_string(ds.label_values[static_cast<std::size_t>(y - 1)]) + "\n";
        csv::write_file((std::filesystem::path(dir) / "labels.csv").string(), text);
        doc["labels"] = "labels.csv";
        doc["classes"] = ds.label_values;
    }
    if (!ds.class_names.empty())
        doc["names"] = ds.class_names;
    csv::write_file((std::filesystem::path(dir) / "manifest.json").string(), doc.dump(2) + "\n");
}

/// Rows `indices` of every source, with labels and class metadata carried over.
inline MultiSourceDataset subset(const MultiSourceDataset& ds, const std::vector<Eigen::Index>& indices)
{
    MultiSourceDataset out;
    out.label_values = ds.label_values;
    out.class_names = ds.class_names;
    for (const auto& s : ds.sources) {
        SourceMatrix m{s.id, Eigen::MatrixXd(static_cast<Eigen::Index>(indices.size()), s.features())};
        for (std::size_t i = 0; i < indices.size(); ++i)
            m.values.row(static_cast<Eigen::Index>(i)) = s.values.row(indices[i]);
        out.sources.push_back(std::move(m));
    }
    if (!ds.labels.empty())
        for (auto i : indices)
            out.labels.push_back(ds.labels[static_cast<std::size_t>(i)]);
    return out;
}

struct SplitIndices {
    std::vector<Eigen::Index> train;
    std::vector<Eigen::Index> test;
};

/// Per class, a seeded shuffle picks `n_train_per_class` training samples; the
/// rest form the test set. Both index lists are returned in ascending order.
inline SplitIndices stratified_split_indices(const std::vector<int>& labels, int classes,
                                             int n_train_per_class, std::uint64_t seed)
{
    require(n_train_per_class >= 1, ErrorCode::invalid_argument, "n_train_per_class must be >= 1");
    std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(classes));
    for (std::size_t i = 0; i < labels.size(); ++i)
        members[static_cast<std::size_t>(labels[i] - 1)].push_back(static_cast<Eigen::Index>(i));
    SplitIndices split;
    for (int l = 1; l <= classes; ++l) {
        auto& idx = members[static_cast<std::size_t>(l - 1)];
        if (static_cast<int>(idx.size()) <= n_train_per_class)
            fail(ErrorCode::insufficient_class,
                 "class " + std::to_string(l) + " has " + std::to_string(idx.size())
                     + " samples, need more than " + std::to_string(n_train_per_class));
        auto rng = Rng::derive(seed, static_cast<std::uint64_t>(l));
        rng.shuffle(idx);
        split.train.insert(split.train.end(), idx.begin(), idx.begin() + n_train_per_class);
        split.test.insert(split.test.end(), idx.begin() + n_train_per_class, idx.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

inline std::pair<MultiSourceDataset, MultiSourceDataset>
stratified_split(const MultiSourceDataset& ds, int n_train_per_class, std::uint64_t seed)
{
    validate(ds);
    const auto split = stratified_split_indices(ds.labels, ds.classes(), n_train_per_class, seed);
    return {subset(ds, split.train), subset(ds, split.test)};
}

/// Parameters of the synthetic angular multi-source generator.
struct SynthSpec {
    int classes = 5;
    int samples_per_class = 100;
    std::vector<int> dims{30, 12};   // one entry per source
    std::vector<std::string> ids;    // defaults to source1..sourceM
    double separation = 25.0 * std::numbers::pi / 180.0; // radians between class mean directions
    double jitter = 8.0 * std::numbers::pi / 180.0;      // RMS within-class angle, radians
    double scale_min = 0.2;          // per-sample multiplicative scale range, log-uniform
    double scale_max = 5.0;
};

inline void validate(const SynthSpec& spec)
{
    require(spec.classes >= 1, ErrorCode::invalid_argument, "classes must be >= 1");
    require(spec.samples_per_class >= 1, ErrorCode::invalid_argument, "samples_per_class must be >= 1");
    require(!spec.dims.empty(), ErrorCode::invalid_argument, "dims must list at least one source");
    for (int d : spec.dims)
        require(d >= 1, ErrorCode::invalid_argument, "dims entries must be >= 1");
    require(spec.ids.empty() || spec.ids.size() == spec.dims.size(), ErrorCode::invalid_argument,
            "ids must match dims in length");
    require(std::isfinite(spec.separation) && spec.separation >= 0.0, ErrorCode::invalid_argument,
            "separation must be >= 0");
    require(std::isfinite(spec.jitter) && spec.jitter >= 0.0, ErrorCode::invalid_argument,
            "jitter must be >= 0");
    require(spec.scale_min > 0.0 && spec.scale_max > 0.0 && spec.scale_min <= spec.scale_max,
            ErrorCode::invalid_argument, "scale_min/scale_max must be positive with scale_min <= scale_max");
}

namespace detail {

// Unit directions (columns, d x c) whose pairwise angles are all >= theta.
// d >= c: tilted regular simplex, every pair exactly theta apart, feasible up
// to the simplex bound arccos(-1/(c-1)). Otherwise points on a great circle
// spaced theta apart, or the +-e_i cross-polytope for theta <= 90 degrees.
inline Eigen::MatrixXd separated_directions(int d, int c, double theta)
{
    constexpr double tol = 1e-12;
    Eigen::MatrixXd u = Eigen::MatrixXd::Zero(d, c);
    if (c == 1) {
        u(0, 0) = 1.0;
        return u;
    }
    const double cos_theta = std::cos(theta);
    if (d >= c && cos_theta >= -1.0 / (c - 1) - tol) {
        const double cos2_beta = std::clamp(((c - 1) * cos_theta + 1.0) / c, 0.0, 1.0);
        const double cb = std::sqrt(cos2_beta);
        const double sb = std::sqrt(1.0 - cos2_beta);
        const double inv_sqrt_c = 1.0 / std::sqrt(static_cast<double>(c));
        const double vertex_norm = std::sqrt((c - 1.0) / c);
        for (int k = 0; k < c; ++k) {
            for (int j = 0; j < c; ++j) {
                const double vertex = ((j == k ? 1.0 : 0.0) - 1.0 / c) / vertex_norm;
                u(j, k) = cb * inv_sqrt_c + sb * vertex;
            }
        }
        return u;
    }
    if (d >= 2 && c * theta <= 2.0 * std::numbers::pi + tol) {
        for (int k = 0; k < c; ++k) {
            u(0, k) = std::cos(k * theta);
            u(1, k) = std::sin(k * theta);
        }
        return u;
    }
    if (d == 1 && c == 2 && theta <= std::numbers::pi + tol) {
        u(0, 0) = 1.0;
        u(0, 1) = -1.0;
        return u;
    }
    if (d >= 2 && c <= 2 * d && theta <= std::numbers::pi / 2 + tol) {
        for (int k = 0; k < c; ++k)
            u(k / 2, k) = (k % 2 == 0) ? 1.0 : -1.0;
        return u;
    }
    fail(ErrorCode::infeasible_separation,
         std::to_string(c) + " directions with separation " + std::to_string(theta)
             + " rad do not fit in dimension " + std::to_string(d));
}

inline Eigen::MatrixXd random_rotation(int d, Rng& rng)
{
    Eigen::MatrixXd g(d, d);
    for (int j = 0; j < d; ++j)
        for (int i = 0; i < d; ++i)
            g(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ();
    // Fix the sign ambiguity of QR so the rotation is a function of g alone.
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < d; ++j)
        if (r(j, j) < 0)
            q.col(j) = -q.col(j);
    return q;
}

} // namespace detail

/// Synthetic multi-source data where classes differ only in direction and every
/// sample carries an independent random scale. Classes are emitted in order,
/// `samples_per_class` rows each.
inline MultiSourceDataset synth_multisource(const SynthSpec& spec, std::uint64_t seed)
{
    validate(spec);
    const int c = spec.classes;
    const int per = spec.samples_per_class;
    const auto n = static_cast<Eigen::Index>(c) * per;
    MultiSourceDataset ds;
    for (int l = 1; l <= c; ++l) {
        ds.label_values.push_back(l);
        for (int i = 0; i < per; ++i)
            ds.labels.push_back(l);
    }
    const double log_lo = std::log(spec.scale_min);
    const double log_hi = std::log(spec.scale_max);
    for (std::size_t m = 0; m < spec.dims.size(); ++m) {
        const int d = spec.dims[m];
        auto geometry_rng = Rng::derive(seed, 1000003ULL * (m + 1));
        const Eigen::MatrixXd means = detail::random_rotation(d, geometry_rng)
            * detail::separated_directions(d, c, spec.separation);
        SourceMatrix src{spec.ids.empty() ? "source" + std::to_string(m + 1) : spec.ids[m],
                         Eigen::MatrixXd(n, d)};
        for (int l = 0; l < c; ++l) {
            auto rng = Rng::derive(seed, 1000003ULL * (m + 1) + static_cast<std::uint64_t>(l + 1));
            const Eigen::VectorXd mu = means.col(l);
            for (int i = 0; i < per; ++i) {
                Eigen::VectorXd w(d);
                for (int j = 0; j < d; ++j)
                    w(j) = rng.normal();
                w -= mu.dot(w) * mu;
                const double angle = spec.jitter * std::abs(rng.normal());
                const double wn = w.norm();
                Eigen::VectorXd x = mu;
                if (wn > 1e-12)
                    x = std::cos(angle) * mu + std::sin(angle) * (w / wn);
                const double scale = std::exp(rng.uniform(log_lo, log_hi));
                src.values.row(static_cast<Eigen::Index>(l) * per + i) = (scale * x).transpose();
            }
        }
        ds.sources.push_back(std::move(src));
    }
    return ds;
}

} // namespace ckada
