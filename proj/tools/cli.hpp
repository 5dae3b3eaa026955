#pragma once

// Command-line front end. Kept in a header so tests can drive run() in-process.

#include "ckada/ckada.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace ckada::cli {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

inline void check_keys(const json& obj, const std::string& where, const std::set<std::string>& allowed)
{
    require(obj.is_object(), ErrorCode::invalid_argument, "'" + where + "' must be a JSON object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.contains(key))
            fail(ErrorCode::invalid_argument, "unknown key '" + key + "' in " + where);
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& where)
{
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception&) {
        fail(ErrorCode::invalid_argument, "'" + key + "' in " + where + " is missing or has the wrong type");
    }
}

template <class T>
void get_to(const json& obj, const std::string& key, const std::string& where, T& out)
{
    if (obj.contains(key) && !obj[key].is_null())
        out = get<T>(obj, key, where);
}

} // namespace detail

inline SynthSpec parse_synth(const json& j)
{
    detail::check_keys(j, "synth",
                       {"classes", "samples_per_class", "dims", "ids", "separation", "jitter", "scale_min", "scale_max"});
    SynthSpec s;
    detail::get_to(j, "classes", "synth", s.classes);
    detail::get_to(j, "samples_per_class", "synth", s.samples_per_class);
    detail::get_to(j, "dims", "synth", s.dims);
    detail::get_to(j, "ids", "synth", s.ids);
    double sep = 25.0, jit = 8.0;
    detail::get_to(j, "separation", "synth", sep);
    detail::get_to(j, "jitter", "synth", jit);
    s.separation = sep * std::numbers::pi / 180.0;
    s.jitter = jit * std::numbers::pi / 180.0;
    detail::get_to(j, "scale_min", "synth", s.scale_min);
    detail::get_to(j, "scale_max", "synth", s.scale_max);
    validate(s);
    return s;
}

inline EmbeddingOptions parse_embedding(const json& j)
{
    detail::check_keys(j, "embedding",
                       {"method", "kernel", "sigmas", "sigma_multipliers", "alphas", "r", "k_nn", "ridge"});
    EmbeddingOptions o;
    if (j.contains("method"))
        o.method = parse_method(detail::get<std::string>(j, "method", "embedding"));
    if (j.contains("kernel"))
        o.family = parse_kernel_family(detail::get<std::string>(j, "kernel", "embedding"));
    detail::get_to(j, "sigmas", "embedding", o.sigmas);
    detail::get_to(j, "sigma_multipliers", "embedding", o.sigma_multipliers);
    detail::get_to(j, "alphas", "embedding", o.alphas);
    detail::get_to(j, "r", "embedding", o.r);
    long long k_nn = o.k_nn;
    detail::get_to(j, "k_nn", "embedding", k_nn);
    require(k_nn >= 1, ErrorCode::invalid_argument, "k_nn in embedding must be >= 1");
    o.k_nn = k_nn;
    if (j.contains("ridge") && !j["ridge"].is_null()) {
        o.ridge = detail::get<double>(j, "ridge", "embedding");
        require(*o.ridge >= 0.0, ErrorCode::invalid_argument, "ridge in embedding must be >= 0");
    }
    for (double s : o.sigmas)
        require(s > 0.0, ErrorCode::invalid_argument, "sigmas in embedding must be > 0");
    for (double s : o.sigma_multipliers)
        require(s > 0.0, ErrorCode::invalid_argument, "sigma_multipliers in embedding must be > 0");
    return o;
}

struct ClassifierChoice {
    ClassifierKind kind = ClassifierKind::knn;
    ClassifierParams params;
};

inline ClassifierChoice parse_classifier_config(const json& j)
{
    detail::check_keys(j, "classifier", {"kind", "k", "sparsity", "shrinkage", "equal_priors"});
    ClassifierChoice c;
    if (j.contains("kind"))
        c.kind = parse_classifier(detail::get<std::string>(j, "kind", "classifier"));
    detail::get_to(j, "k", "classifier", c.params.k);
    detail::get_to(j, "sparsity", "classifier", c.params.sparsity);
    detail::get_to(j, "shrinkage", "classifier", c.params.shrinkage);
    detail::get_to(j, "equal_priors", "classifier", c.params.equal_priors);
    require(c.params.k >= 1, ErrorCode::invalid_argument, "k in classifier must be >= 1");
    require(c.params.sparsity >= 1, ErrorCode::invalid_argument, "sparsity in classifier must be >= 1");
    require(c.params.shrinkage >= 0.0 && c.params.shrinkage <= 1.0, ErrorCode::invalid_argument,
            "shrinkage in classifier must be in [0, 1]");
    return c;
}

struct GridChoice {
    GridSpec spec;
    int folds = 5;
};

inline GridChoice parse_grid(const json& j)
{
    detail::check_keys(j, "grid",
                       {"sigma_multipliers", "alphas", "alpha_step", "r", "knn_k", "src_sparsity", "ml_shrinkage", "folds"});
    GridChoice g;
    detail::get_to(j, "sigma_multipliers", "grid", g.spec.sigma_multipliers);
    detail::get_to(j, "alphas", "grid", g.spec.alphas);
    detail::get_to(j, "alpha_step", "grid", g.spec.alpha_step);
    detail::get_to(j, "r", "grid", g.spec.r);
    detail::get_to(j, "knn_k", "grid", g.spec.knn_k);
    detail::get_to(j, "src_sparsity", "grid", g.spec.src_sparsity);
    detail::get_to(j, "ml_shrinkage", "grid", g.spec.ml_shrinkage);
    detail::get_to(j, "folds", "grid", g.folds);
    require(!g.spec.sigma_multipliers.empty() && !g.spec.knn_k.empty() && !g.spec.src_sparsity.empty()
                && !g.spec.ml_shrinkage.empty(),
            ErrorCode::invalid_argument, "grid lists must be non-empty");
    for (int k : g.spec.knn_k)
        require(k >= 1, ErrorCode::invalid_argument, "knn_k in grid must be >= 1");
    for (int s : g.spec.src_sparsity)
        require(s >= 1, ErrorCode::invalid_argument, "src_sparsity in grid must be >= 1");
    for (double l : g.spec.ml_shrinkage)
        require(l >= 0.0 && l <= 1.0, ErrorCode::invalid_argument, "ml_shrinkage in grid must be in [0, 1]");
    require(g.folds >= 2, ErrorCode::invalid_argument, "folds in grid must be >= 2");
    return g;
}

inline json load_config(const std::string& path)
{
    if (path.empty())
        return json::object();
    try {
        auto j = json::parse(csv::read_file(path));
        require(j.is_object(), ErrorCode::parse, "config '" + path + "' must be a JSON object");
        detail::check_keys(j, "config",
                           {"seed", "out", "threads", "manifest", "synth", "embedding", "classifier", "grid", "fit",
                            "benchmark", "transform", "classify", "render", "waveform"});
        return j;
    } catch (const json::exception& e) {
        fail(ErrorCode::parse, "config '" + path + "': " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Commands

struct Globals {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::optional<int> threads;

    json config;

    std::uint64_t seed_value() const
    {
        if (seed)
            return *seed;
        return config.contains("seed") ? detail::get<std::uint64_t>(config, "seed", "config") : 0;
    }
    std::filesystem::path out_dir() const
    {
        std::string dir = out;
        if (dir.empty() && config.contains("out"))
            dir = detail::get<std::string>(config, "out", "config");
        if (dir.empty())
            dir = ".";
        std::filesystem::create_directories(dir);
        return dir;
    }
    int thread_count() const
    {
        int t = threads ? *threads : config.contains("threads") ? detail::get<int>(config, "threads", "config") : 1;
        require(t >= 1, ErrorCode::invalid_argument, "threads must be >= 1");
        return t;
    }
    /// Command-line value, else config[section][key], else config[key].
    std::string path(const std::string& flag_value, const std::string& section, const std::string& key) const
    {
        if (!flag_value.empty())
            return flag_value;
        if (config.contains(section) && config[section].contains(key))
            return detail::get<std::string>(config[section], key, section);
        if (config.contains(key) && config[key].is_string())
            return config[key].get<std::string>();
        fail(ErrorCode::invalid_argument, "no " + key + " given (flag or config '" + section + "." + key + "')");
    }
    json section(const std::string& name) const { return config.contains(name) ? config[name] : json::object(); }
};

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    csv::write_file(p.string(), text);
    std::cout << "wrote " << p.string() << "\n";
}

inline void write_coordinates(const std::filesystem::path& p, const Eigen::MatrixXd& coords)
{
    write_text(p, csv::format_matrix(coords));
}

inline std::string labels_text(const std::vector<int>& labels, const std::vector<long long>& values)
{
    std::string out;
    for (int y : labels)
        out += std::to_string(values[static_cast<std::size_t>(y - 1)]) + "\n";
    return out;
}

inline json metrics_json(const Metrics& m, const std::vector<long long>& values)
{
    json per_class = json::array();
    for (double a : m.per_class)
        per_class.push_back(std::isnan(a) ? json(nullptr) : json(a));
    json confusion = json::array();
    for (Eigen::Index i = 0; i < m.confusion.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.confusion.cols(); ++j)
            row.push_back(m.confusion(i, j));
        confusion.push_back(row);
    }
    return {{"oa", m.oa}, {"aa", m.aa}, {"classes", values}, {"per_class", per_class}, {"confusion", confusion}};
}

inline int cmd_synth(const Globals& g)
{
    const auto spec = parse_synth(g.section("synth"));
    const auto ds = synth_multisource(spec, g.seed_value());
    const auto dir = g.out_dir();
    save_manifest(ds, dir.string());
    const auto check = load_manifest((dir / "manifest.json").string());
    require(check.samples() == ds.samples() && check.classes() == ds.classes(), ErrorCode::io,
            "written manifest does not reload");
    std::cout << "wrote " << (dir / "manifest.json").string() << " (" << ds.samples() << " samples, "
              << ds.classes() << " classes, " << ds.sources.size() << " sources)\n";
    return 0;
}

inline int cmd_fit(const Globals& g, const std::string& manifest_flag)
{
    const auto ds = load_manifest(g.path(manifest_flag, "fit", "manifest"));
    auto opt = parse_embedding(g.section("embedding"));
    auto clf = parse_classifier_config(g.section("classifier"));
    const auto dir = g.out_dir();
    if (g.config.contains("grid")) {
        const auto grid = parse_grid(g.config["grid"]);
        const auto result = grid_search(ds, opt, clf.kind, grid.spec, grid.folds, g.seed_value(), g.thread_count());
        std::vector<std::string> ids;
        for (const auto& s : ds.sources)
            ids.push_back(s.id);
        write_text(dir / "cv_scores.csv", format_score_table(result, clf.kind, ids));
        opt = apply(opt, result.best);
        clf.params = result.best.classifier;
        std::cout << "cross-validation (" << result.folds << " folds): best mean OA " << result.best_mean_oa << "\n";
    }
    const auto model = fit_embedding(ds, opt);
    if (model.rank_warning)
        std::cerr << "warning: requested r exceeds the effective rank of the training Gram\n";
    const auto classifier = fit_classifier(clf.kind, clf.params, model.train_coordinates, ds.labels);

    const auto model_path = dir / "embedding.ckm";
    const auto clf_path = dir / "classifier.ckm";
    model_io::save(model, model_path.string());
    model_io::save(classifier, clf_path.string());
    // Reload both so a zero exit means the files are usable.
    const auto back = model_io::load_embedding(model_path.string());
    require(back.coefficients == model.coefficients, ErrorCode::io, "embedding model did not round-trip");
    (void)model_io::load_classifier(clf_path.string());
    std::cout << "wrote " << model_path.string() << "\nwrote " << clf_path.string() << "\n";
    write_coordinates(dir / "train_coordinates.csv", model.train_coordinates);
    return 0;
}

inline int cmd_transform(const Globals& g, const std::string& model_flag, const std::string& manifest_flag)
{
    const auto model = model_io::load_embedding(g.path(model_flag, "transform", "model"));
    const auto ds = load_manifest(g.path(manifest_flag, "transform", "manifest"), false);
    write_coordinates(g.out_dir() / "coordinates.csv", transform(model, ds));
    return 0;
}

inline int cmd_classify(const Globals& g, const std::string& model_flag, const std::string& clf_flag,
                        const std::string& manifest_flag)
{
    const auto model = model_io::load_embedding(g.path(model_flag, "classify", "model"));
    const auto clf = model_io::load_classifier(g.path(clf_flag, "classify", "classifier"));
    const auto ds = load_manifest(g.path(manifest_flag, "classify", "manifest"), false);
    const auto predicted = predict(clf, transform(model, ds));
    const auto dir = g.out_dir();
    write_text(dir / "predictions.csv", labels_text(predicted, model.label_values));
    if (!ds.labels.empty()) {
        // Map the dataset's labels onto the model's class indices via the
        // original label values.
        std::vector<int> truth;
        for (int y : ds.labels) {
            const auto raw = ds.label_values[static_cast<std::size_t>(y - 1)];
            const auto it = std::find(model.label_values.begin(), model.label_values.end(), raw);
            require(it != model.label_values.end(), ErrorCode::invalid_argument,
                    "label " + std::to_string(raw) + " was not seen in training");
            truth.push_back(static_cast<int>(it - model.label_values.begin()) + 1);
        }
        const auto m = evaluate(predicted, truth, static_cast<int>(model.label_values.size()));
        write_text(dir / "metrics.json", metrics_json(m, model.label_values).dump(2) + "\n");
        std::cout << "OA " << m.oa << "  AA " << m.aa << "\n";
    }
    return 0;
}

inline BenchmarkConfig parse_benchmark(const Globals& g)
{
    const auto j = g.section("benchmark");
    detail::check_keys(j, "benchmark",
                       {"methods", "classifiers", "train_sizes", "trials", "per_class_size", "cross_validate"});
    BenchmarkConfig cfg;
    if (j.contains("methods")) {
        cfg.methods.clear();
        for (const auto& m : detail::get<std::vector<std::string>>(j, "methods", "benchmark"))
            cfg.methods.push_back(parse_method(m));
    }
    if (j.contains("classifiers")) {
        cfg.classifiers.clear();
        for (const auto& k : detail::get<std::vector<std::string>>(j, "classifiers", "benchmark"))
            cfg.classifiers.push_back(parse_classifier(k));
    }
    detail::get_to(j, "train_sizes", "benchmark", cfg.train_sizes);
    detail::get_to(j, "trials", "benchmark", cfg.trials);
    detail::get_to(j, "per_class_size", "benchmark", cfg.per_class_size);
    cfg.seed = g.seed_value();
    cfg.embedding = parse_embedding(g.section("embedding"));
    cfg.classifier = parse_classifier_config(g.section("classifier")).params;
    const bool cv = j.value("cross_validate", g.config.contains("grid"));
    if (cv) {
        const auto grid = parse_grid(g.section("grid"));
        cfg.grid = grid.spec;
        cfg.folds = grid.folds;
    }
    validate(cfg);
    return cfg;
}

inline int cmd_benchmark(const Globals& g, const std::string& manifest_flag)
{
    const auto cfg = parse_benchmark(g);
    MultiSourceDataset ds;
    if (!manifest_flag.empty() || g.config.contains("manifest"))
        ds = load_manifest(g.path(manifest_flag, "benchmark", "manifest"));
    else if (g.config.contains("synth"))
        ds = synth_multisource(parse_synth(g.config["synth"]), g.seed_value());
    else
        fail(ErrorCode::invalid_argument, "benchmark needs a manifest or a synth section");
    const auto result = run_benchmark(ds, cfg, g.thread_count());
    const auto dir = g.out_dir();
    write_text(dir / "results.csv", format_results_csv(result));
    write_text(dir / "per_class.csv", format_per_class_csv(result));
    const auto table = format_results_table(result);
    write_text(dir / "results.txt", table);
    std::cout << table;
    return 0;
}

struct RenderArgs {
    std::string coords;
    std::optional<int> rows, cols;
    std::vector<int> channels;
    std::optional<double> low, high;
};

inline int cmd_render(const Globals& g, const RenderArgs& a)
{
    const auto j = g.section("render");
    detail::check_keys(j, "render", {"coords", "rows", "cols", "channels", "low", "high"});
    RenderSpec spec;
    detail::get_to(j, "rows", "render", spec.rows);
    detail::get_to(j, "cols", "render", spec.cols);
    std::vector<int> channels = {0, 1, 2};
    detail::get_to(j, "channels", "render", channels);
    detail::get_to(j, "low", "render", spec.low);
    detail::get_to(j, "high", "render", spec.high);
    if (a.rows)
        spec.rows = *a.rows;
    if (a.cols)
        spec.cols = *a.cols;
    if (!a.channels.empty())
        channels = a.channels;
    if (a.low)
        spec.low = *a.low;
    if (a.high)
        spec.high = *a.high;
    require(channels.size() == 3, ErrorCode::invalid_argument, "render needs exactly 3 channels");
    spec.channels = {channels[0], channels[1], channels[2]};
    const auto coords = csv::parse_matrix(csv::read_file(g.path(a.coords, "render", "coords")), false);
    const auto img = render_false_color(coords, spec);
    write_text(g.out_dir() / "false_color.ppm", encode_ppm(img));
    return 0;
}

struct WaveformArgs {
    std::string points;
    std::optional<double> cell_size, z_min, z_max;
    std::optional<int> bins;
};

inline int cmd_waveform(const Globals& g, const WaveformArgs& a)
{
    const auto j = g.section("waveform");
    detail::check_keys(j, "waveform", {"points", "header", "cell_size", "z_min", "z_max", "bins"});
    double cell = 1.0, z0 = 0.0, z1 = 30.0;
    int bins = 30;
    bool header = false;
    detail::get_to(j, "cell_size", "waveform", cell);
    detail::get_to(j, "z_min", "waveform", z0);
    detail::get_to(j, "z_max", "waveform", z1);
    detail::get_to(j, "bins", "waveform", bins);
    detail::get_to(j, "header", "waveform", header);
    cell = a.cell_size.value_or(cell);
    z0 = a.z_min.value_or(z0);
    z1 = a.z_max.value_or(z1);
    bins = a.bins.value_or(bins);
    const auto pc = load_point_cloud_csv(g.path(a.points, "waveform", "points"), header);
    const auto wf = build_pseudo_waveform(pc, cell, z0, z1, bins);
    const auto dir = g.out_dir();
    write_coordinates(dir / "waveform.csv", wf.raster.values);
    std::string cells = "row,col\n";
    for (const auto& [r, c] : wf.cells)
        cells += std::to_string(r) + "," + std::to_string(c) + "\n";
    write_text(dir / "cells.csv", cells);
    std::cout << wf.cells.size() << " occupied cells of a " << wf.rows << "x" << wf.cols << " grid\n";
    return 0;
}

// ---------------------------------------------------------------------------

/// Parses arguments and runs one command. Returns the process exit code.
inline int run(int argc, const char* const* argv)
{
    CLI::App app{"Composite-kernel angular discriminant analysis"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    int threads = 1;
    app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
    auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides config)");
    app.add_option("--out", g.out, "output directory (overrides config)");
    auto* threads_opt = app.add_option("--threads", threads, "worker threads (overrides config)");

    auto* synth = app.add_subcommand("synth", "generate a synthetic multi-source dataset");
    synth->fallthrough();

    std::string manifest, model, classifier;
    auto* fit = app.add_subcommand("fit", "fit an embedding and a classifier");
    fit->add_option("--manifest", manifest, "training manifest");
    fit->fallthrough();

    auto* tr = app.add_subcommand("transform", "embed samples with a fitted model");
    tr->add_option("--model", model, "embedding model file");
    tr->add_option("--manifest", manifest, "manifest of samples to embed");
    tr->fallthrough();

    auto* cl = app.add_subcommand("classify", "embed and classify samples");
    cl->add_option("--model", model, "embedding model file");
    cl->add_option("--classifier", classifier, "classifier model file");
    cl->add_option("--manifest", manifest, "manifest of samples to classify");
    cl->fallthrough();

    auto* bench = app.add_subcommand("benchmark", "repeated-split benchmark over methods and classifiers");
    bench->add_option("--manifest", manifest, "dataset manifest (else the config's synth section)");
    bench->fallthrough();

    RenderArgs ra;
    auto* render = app.add_subcommand("render", "false-color PPM from three embedding dimensions");
    render->add_option("--coords", ra.coords, "coordinates CSV (r rows x m columns)");
    render->add_option("--rows", ra.rows, "image rows");
    render->add_option("--cols", ra.cols, "image columns");
    render->add_option("--channels", ra.channels, "three embedding dimensions (0-based)")->expected(3);
    render->add_option("--low", ra.low, "lower stretch percentile");
    render->add_option("--high", ra.high, "upper stretch percentile");
    render->fallthrough();

    WaveformArgs wa;
    auto* wave = app.add_subcommand("waveform", "rasterize a LiDAR point cloud into pseudo-waveforms");
    wave->add_option("--points", wa.points, "point cloud CSV (x,y,z,intensity)");
    wave->add_option("--cell-size", wa.cell_size, "grid cell size in meters");
    wave->add_option("--z-min", wa.z_min, "lowest elevation");
    wave->add_option("--z-max", wa.z_max, "elevation upper bound (exclusive)");
    wave->add_option("--bins", wa.bins, "number of elevation bins");
    wave->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_code(ErrorCode::invalid_argument);
    }
    if (*seed_opt)
        g.seed = seed;
    if (*threads_opt)
        g.threads = threads;

    try {
        g.config = load_config(g.config_path);
        if (*synth)
            return cmd_synth(g);
        if (*fit)
            return cmd_fit(g, manifest);
        if (*tr)
            return cmd_transform(g, model, manifest);
        if (*cl)
            return cmd_classify(g, model, classifier, manifest);
        if (*bench)
            return cmd_benchmark(g, manifest);
        if (*render)
            return cmd_render(g, ra);
        if (*wave)
            return cmd_waveform(g, wa);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const std::filesystem::filesystem_error& e) {
        std::cerr << "error: IOError: " << e.what() << "\n";
        return exit_code(ErrorCode::io);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

} // namespace ckada::cli
