#pragma once

#include "ckada/classifiers.hpp"
#include "ckada/csv.hpp"
#include "ckada/eigensolver.hpp"
#include "ckada/error.hpp"

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include <bit>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

// Model files:
//   8 bytes   magic "CKADAMDL"
//   8 bytes   header length L, unsigned little-endian
//   L bytes   UTF-8 JSON header; header["blocks"] lists {name, rows, cols}
//   blocks    in header order, each rows*cols little-endian float64, row-major
namespace ckada::model_io {

inline constexpr std::string_view magic = "CKADAMDL";
inline constexpr int format_version = 1;

struct Block {
    std::string name;
    Eigen::MatrixXd values;
};

struct Container {
    nlohmann::json header;
    std::vector<Block> blocks;

    const Eigen::MatrixXd& block(const std::string& name) const
    {
        for (const auto& b : blocks)
            if (b.name == name)
                return b.values;
        fail(ErrorCode::parse, "model file has no block '" + name + "'");
    }
};

namespace detail {

inline void put_u64(std::string& out, std::uint64_t v)
{
    for (int i = 0; i < 8; ++i)
        out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint64_t get_u64(std::string_view in, std::size_t at)
{
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)])) << (8 * i);
    return v;
}

} // namespace detail

inline std::string serialize(Container c)
{
    c.header["blocks"] = nlohmann::json::array();
    for (const auto& b : c.blocks)
        c.header["blocks"].push_back({{"name", b.name}, {"rows", b.values.rows()}, {"cols", b.values.cols()}});
    const std::string header = c.header.dump();
    std::string out(magic);
    detail::put_u64(out, header.size());
    out += header;
    for (const auto& b : c.blocks)
        for (Eigen::Index i = 0; i < b.values.rows(); ++i)
            for (Eigen::Index j = 0; j < b.values.cols(); ++j)
                detail::put_u64(out, std::bit_cast<std::uint64_t>(b.values(i, j)));
    return out;
}

inline Container deserialize(std::string_view bytes, const std::string& what = "model")
{
    auto bad = [&](const std::string& msg) { fail(ErrorCode::parse, what + ": " + msg); };
    if (bytes.size() < 16 || bytes.substr(0, 8) != magic)
        bad("not a model file (bad magic)");
    const auto len = detail::get_u64(bytes, 8);
    if (len > bytes.size() - 16)
        bad("truncated header");
    Container c;
    try {
        c.header = nlohmann::json::parse(bytes.substr(16, static_cast<std::size_t>(len)));
        std::size_t at = 16 + static_cast<std::size_t>(len);
        for (const auto& entry : c.header.at("blocks")) {
            const auto rows = entry.at("rows").get<std::int64_t>();
            const auto cols = entry.at("cols").get<std::int64_t>();
            if (rows < 0 || cols < 0)
                bad("negative block size");
            const auto count = static_cast<std::uint64_t>(rows) * static_cast<std::uint64_t>(cols);
            if (count > (bytes.size() - at) / 8)
                bad("truncated block '" + entry.at("name").get<std::string>() + "'");
            Block b{entry.at("name").get<std::string>(), Eigen::MatrixXd(rows, cols)};
            for (Eigen::Index i = 0; i < rows; ++i)
                for (Eigen::Index j = 0; j < cols; ++j, at += 8)
                    b.values(i, j) = std::bit_cast<double>(detail::get_u64(bytes, at));
            c.blocks.push_back(std::move(b));
        }
        if (at != bytes.size())
            bad("trailing bytes after the last block");
    } catch (const nlohmann::json::exception& e) {
        bad(std::string("bad header: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Embedding models

inline Eigen::MatrixXd row_of(const Eigen::VectorXd& v) { return v.transpose(); }

inline Container to_container(const EmbeddingModel& m)
{
    Container c;
    auto& h = c.header;
    h["format_version"] = format_version;
    h["kind"] = "embedding";
    h["method"] = to_string(m.method);
    h["r"] = m.r;
    h["ridge"] = m.ridge;
    h["rank_warning"] = m.rank_warning;
    h["k_nn"] = m.k_nn;
    h["source_dims"] = m.source_dims;
    h["label_values"] = m.label_values;
    h["gram_mean"] = m.gram_mean;
    nlohmann::json kernels = nlohmann::json::array();
    for (std::size_t i = 0; i < m.kernels.per_source.size(); ++i)
        kernels.push_back({{"source", i < m.training.size() ? m.training[i].id : ""},
                           {"family", to_string(m.kernels.per_source[i].family)},
                           {"sigma", m.kernels.per_source[i].sigma}});
    h["kernel_config"] = {{"kernels", kernels}, {"alphas", m.kernels.alphas}};
    nlohmann::json ids = nlohmann::json::array();
    for (const auto& s : m.training)
        ids.push_back(s.id);
    h["training_ids"] = ids;

    for (const auto& s : m.training)
        c.blocks.push_back({"features/" + s.id, s.values});
    for (std::size_t i = 0; i < m.standardizers.size(); ++i) {
        c.blocks.push_back({"standardizer/" + std::to_string(i) + "/mean", Eigen::MatrixXd(m.standardizers[i].mean)});
        c.blocks.push_back({"standardizer/" + std::to_string(i) + "/scale", Eigen::MatrixXd(m.standardizers[i].scale)});
    }
    c.blocks.push_back({"coefficients", m.coefficients});
    c.blocks.push_back({"eigenvalues", row_of(m.eigenvalues)});
    if (m.method == Method::kpca)
        c.blocks.push_back({"gram_column_means", row_of(m.gram_column_means)});
    c.blocks.push_back({"train_coordinates", m.train_coordinates});
    return c;
}

inline EmbeddingModel embedding_from_container(const Container& c)
{
    EmbeddingModel m;
    try {
        const auto& h = c.header;
        if (h.at("kind").get<std::string>() != "embedding")
            fail(ErrorCode::parse, "model file holds a '" + h.at("kind").get<std::string>() + "', not an embedding");
        m.method = parse_method(h.at("method").get<std::string>());
        m.r = h.at("r").get<int>();
        m.ridge = h.at("ridge").get<double>();
        m.rank_warning = h.at("rank_warning").get<bool>();
        m.k_nn = h.at("k_nn").get<Eigen::Index>();
        m.source_dims = h.at("source_dims").get<std::vector<Eigen::Index>>();
        m.label_values = h.at("label_values").get<std::vector<long long>>();
        m.gram_mean = h.at("gram_mean").get<double>();
        for (const auto& k : h.at("kernel_config").at("kernels"))
            m.kernels.per_source.push_back(
                {parse_kernel_family(k.at("family").get<std::string>()), k.at("sigma").get<double>()});
        m.kernels.alphas = h.at("kernel_config").at("alphas").get<std::vector<double>>();
        for (const auto& id : h.at("training_ids").get<std::vector<std::string>>())
            m.training.push_back({id, c.block("features/" + id)});
        if (!is_angular_method(m.method))
            for (std::size_t i = 0; i < m.source_dims.size(); ++i) {
                Standardizer s;
                s.mean = c.block("standardizer/" + std::to_string(i) + "/mean");
                s.scale = c.block("standardizer/" + std::to_string(i) + "/scale");
                m.standardizers.push_back(std::move(s));
            }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse, std::string("bad model header: ") + e.what());
    }
    m.coefficients = c.block("coefficients");
    m.eigenvalues = c.block("eigenvalues").transpose();
    if (m.method == Method::kpca)
        m.gram_column_means = c.block("gram_column_means").transpose();
    m.train_coordinates = c.block("train_coordinates");
    require(m.coefficients.cols() == m.r, ErrorCode::parse, "coefficient block does not match r");
    return m;
}

inline void save(const EmbeddingModel& m, const std::string& path)
{
    csv::write_file(path, serialize(to_container(m)));
}

inline EmbeddingModel load_embedding(const std::string& path)
{
    return embedding_from_container(deserialize(csv::read_file(path), "'" + path + "'"));
}

// ---------------------------------------------------------------------------
// Classifier models

namespace detail {

inline Eigen::MatrixXd labels_row(const std::vector<int>& labels)
{
    Eigen::MatrixXd out(1, static_cast<Eigen::Index>(labels.size()));
    for (std::size_t i = 0; i < labels.size(); ++i)
        out(0, static_cast<Eigen::Index>(i)) = labels[i];
    return out;
}

inline std::vector<int> labels_from(const Eigen::MatrixXd& row)
{
    std::vector<int> out(static_cast<std::size_t>(row.size()));
    for (Eigen::Index i = 0; i < row.size(); ++i)
        out[static_cast<std::size_t>(i)] = static_cast<int>(row(i));
    return out;
}

} // namespace detail

inline Container to_container(const ClassifierModel& m)
{
    Container c;
    auto& h = c.header;
    h["format_version"] = format_version;
    h["kind"] = "classifier";
    h["classifier"] = to_string(m.kind);
    h["params"] = {{"k", m.params.k},
                   {"sparsity", m.params.sparsity},
                   {"shrinkage", m.params.shrinkage},
                   {"equal_priors", m.params.equal_priors}};
    switch (m.kind) {
    case ClassifierKind::knn: {
        const auto& k = std::get<KnnModel>(m.model);
        h["classes"] = k.classes;
        c.blocks.push_back({"references", k.references});
        c.blocks.push_back({"labels", detail::labels_row(k.labels)});
        break;
    }
    case ClassifierKind::ml: {
        const auto& g = std::get<GaussianMlModel>(m.model);
        h["classes"] = g.means.size();
        h["log_priors"] = g.log_priors;
        for (std::size_t l = 0; l < g.means.size(); ++l) {
            c.blocks.push_back({"mean/" + std::to_string(l + 1), row_of(g.means[l])});
            c.blocks.push_back({"covariance/" + std::to_string(l + 1), g.covariances[l]});
        }
        break;
    }
    case ClassifierKind::src: {
        const auto& s = std::get<SrcModel>(m.model);
        h["classes"] = s.classes;
        c.blocks.push_back({"dictionary", s.dictionary});
        c.blocks.push_back({"labels", detail::labels_row(s.labels)});
        break;
    }
    }
    return c;
}

inline ClassifierModel classifier_from_container(const Container& c)
{
    ClassifierModel m;
    try {
        const auto& h = c.header;
        if (h.at("kind").get<std::string>() != "classifier")
            fail(ErrorCode::parse, "model file holds a '" + h.at("kind").get<std::string>() + "', not a classifier");
        m.kind = parse_classifier(h.at("classifier").get<std::string>());
        const auto& p = h.at("params");
        m.params = {p.at("k").get<int>(), p.at("sparsity").get<int>(), p.at("shrinkage").get<double>(),
                    p.at("equal_priors").get<bool>()};
        const int classes = h.at("classes").get<int>();
        switch (m.kind) {
        case ClassifierKind::knn:
            m.model = KnnModel{c.block("references"), detail::labels_from(c.block("labels")), m.params.k, classes};
            break;
        case ClassifierKind::ml: {
            GaussianMlModel g;
            g.shrinkage = m.params.shrinkage;
            g.equal_priors = m.params.equal_priors;
            g.log_priors = h.at("log_priors").get<std::vector<double>>();
            for (int l = 1; l <= classes; ++l) {
                g.means.push_back(c.block("mean/" + std::to_string(l)).transpose());
                g.covariances.push_back(c.block("covariance/" + std::to_string(l)));
            }
            m.model = std::move(g);
            break;
        }
        case ClassifierKind::src:
            m.model = SrcModel{c.block("dictionary"), detail::labels_from(c.block("labels")), m.params.sparsity, classes};
            break;
        }
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::parse, std::string("bad classifier header: ") + e.what());
    }
    return m;
}

inline void save(const ClassifierModel& m, const std::string& path)
{
    csv::write_file(path, serialize(to_container(m)));
}

inline ClassifierModel load_classifier(const std::string& path)
{
    return classifier_from_container(deserialize(csv::read_file(path), "'" + path + "'"));
}

} // namespace ckada::model_io
