// cgrid: train, evaluate and render counting-grid models from .cgc corpora.
//
// Exit codes: 0 success, 2 configuration error, 3 data error.
// Reports go to stdout as TSV; progress goes to stderr; every command
// writes <out>/manifest.json describing the resolved run.

#include <CLI11.hpp>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include <json.hpp>

#include "cg/corpus.hpp"
#include "cg/errors.hpp"
#include "cg/eval.hpp"
#include "cg/model_io.hpp"

using json = nlohmann::ordered_json;

namespace {

constexpr const char* kVersion = "cgrid 1.0.0";

struct Dims {
    int x = 0;
    int y = 0;
};

Dims parse_dims(const std::string& text, const char* what) {
    const auto pos = text.find('x');
    Dims d;
    try {
        if (pos == std::string::npos) throw std::invalid_argument("no x");
        d.x = std::stoi(text.substr(0, pos));
        d.y = std::stoi(text.substr(pos + 1));
    } catch (const std::exception&) {
        throw cg::GeometryError(std::string("bad ") + what + " '" + text + "', expected WxH");
    }
    if (d.x < 1 || d.y < 1)
        throw cg::GeometryError(std::string("bad ") + what + " '" + text + "', dims must be >= 1");
    return d;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t pos = text.find(',', start);
        const std::string tok = text.substr(start, pos == std::string::npos ? pos : pos - start);
        try {
            out.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            throw cg::GeometryError(std::string("bad ") + what + " list '" + text + "'");
        }
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

/// Flags shared by every training-backed command.
struct TrainOpts {
    std::string grid;
    std::string window;
    std::string tess;
    std::string variant = "plain";
    std::string prior = "smoothed";
    double eta = 1e-2;
    double tol = 1e-5;
    int iters = 200;
    int restarts = 3;
    std::uint64_t seed = 0;
    double init_noise = 1e-2;
    int threads = 0;  // 0 = available parallelism
};

void add_train_flags(CLI::App* cmd, TrainOpts& opts, bool grid_required = true) {
    auto* grid = cmd->add_option("--grid", opts.grid, "grid extent, e.g. 8x8");
    if (grid_required) grid->required();
    cmd->add_option("--window", opts.window, "window size, e.g. 4x4");
    cmd->add_option("--tess", opts.tess, "tessellation, e.g. 2x2");
    cmd->add_option("--variant", opts.variant, "model variant")
        ->check(CLI::IsMember({"plain", "tessellated", "epitome", "hybrid", "mixture",
                               "mixture_unigrams", "spatial_bow", "spatial-bow"}));
    cmd->add_option("--prior", opts.prior, "prior update rule")
        ->check(CLI::IsMember({"counts", "smoothed", "uniform"}));
    cmd->add_option("--eta", opts.eta, "Dirichlet pseudocount");
    cmd->add_option("--tol", opts.tol, "relative bound-change convergence threshold");
    cmd->add_option("--iters", opts.iters, "maximum EM iterations");
    cmd->add_option("--restarts", opts.restarts, "independent seeded restarts");
    cmd->add_option("--seed", opts.seed, "random seed");
    cmd->add_option("--init-noise", opts.init_noise, "initialization noise scale");
    cmd->add_option("--threads", opts.threads, "parallelism cap (default: hardware)");
}

cg::TrainConfig to_config(const TrainOpts& opts) {
    cg::TrainConfig cfg;
    cfg.eta = opts.eta;
    cfg.tol = opts.tol;
    cfg.max_iters = opts.iters;
    cfg.restarts = opts.restarts;
    cfg.seed = opts.seed;
    cfg.init_noise = opts.init_noise;
    cfg.threads = opts.threads > 0
                      ? opts.threads
                      : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (opts.prior == "counts") cfg.prior_update = cg::PriorUpdate::counts;
    else if (opts.prior == "uniform") cfg.prior_update = cg::PriorUpdate::fixed_uniform;
    else cfg.prior_update = cg::PriorUpdate::smoothed;
    if (cfg.max_iters < 1 || cfg.restarts < 1 || cfg.tol <= 0 || cfg.eta < 0)
        throw cg::GeometryError("iters/restarts must be >= 1, tol > 0, eta >= 0");
    return cfg;
}

cg::FitGeometry to_geometry(const TrainOpts& opts) {
    cg::FitGeometry geom;
    const Dims g = parse_dims(opts.grid, "grid");
    geom.ex = g.x;
    geom.ey = g.y;
    if (!opts.window.empty()) {
        const Dims w = parse_dims(opts.window, "window");
        geom.window = cg::WindowSpec{w.x, w.y};
    }
    if (!opts.tess.empty()) {
        const Dims s = parse_dims(opts.tess, "tessellation");
        geom.tess = cg::TessellationSpec{s.x, s.y};
    }
    return geom;
}

json config_json(const TrainOpts& opts, const cg::TrainConfig& cfg) {
    return json{{"grid", opts.grid},
                {"window", opts.window},
                {"tess", opts.tess},
                {"variant", opts.variant},
                {"prior", opts.prior},
                {"eta", cfg.eta},
                {"tol", cfg.tol},
                {"iters", cfg.max_iters},
                {"restarts", cfg.restarts},
                {"seed", cfg.seed},
                {"init_noise", cfg.init_noise},
                {"threads", cfg.threads}};
}

class ManifestWriter {
public:
    ManifestWriter(std::string command, std::string out_dir)
        : start_(std::chrono::steady_clock::now()), out_dir_(std::move(out_dir)) {
        std::filesystem::create_directories(out_dir_);
        doc_["tool"] = kVersion;
        doc_["command"] = std::move(command);
    }

    std::string path(const std::string& name) const {
        return (std::filesystem::path(out_dir_) / name).string();
    }

    json& doc() { return doc_; }

    void finish() {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        doc_["wall_clock_sec"] =
            std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count();
        std::ofstream out(path("manifest.json"));
        if (!out) throw cg::DataError("cannot write manifest to " + out_dir_);
        out << doc_.dump(2) << '\n';
    }

private:
    std::chrono::steady_clock::time_point start_;
    std::string out_dir_;
    json doc_;
};

cg::ClassifierModel train_by_class(const cg::Corpus& corpus, cg::VariantKind kind,
                                   const cg::FitGeometry& geom, const cg::TrainConfig& cfg) {
    return cg::train_classifier(cg::split_by_label(corpus), kind, geom, cfg);
}

int class_index(const cg::ClassifierModel& model, const std::string& label) {
    for (int c = 0; c < model.classes(); ++c)
        if (model.labels[static_cast<std::size_t>(c)] == label) return c;
    return -1;
}

// --- train ------------------------------------------------------------

int cmd_train(const std::string& corpus_path, const TrainOpts& opts,
              const std::string& out_dir) {
    const cg::TrainConfig cfg = to_config(opts);
    const cg::FitGeometry geom = to_geometry(opts);
    const cg::VariantKind kind = cg::variant_from_string(opts.variant);
    ManifestWriter manifest("train", out_dir);

    const cg::Corpus corpus = cg::load_corpus(corpus_path);
    std::cerr << "loaded " << corpus.size() << " samples, Z=" << corpus.vocab << "\n";
    const cg::VariantFitResult res = cg::fit_corpus(kind, corpus, geom, cfg);

    const std::string model_path = manifest.path("model.cgrd");
    cg::save_model(res.model, model_path);
    cg::write_model_text_header(res.model, manifest.path("model.txt"));

    std::cout << "#iter\tbound\n";
    for (std::size_t i = 0; i < res.report.bound_trace.size(); ++i)
        std::cout << i + 1 << '\t' << res.report.bound_trace[i] << '\n';
    std::cerr << (res.report.converged ? "converged" : "iteration limit reached") << " after "
              << res.report.iterations_used << " iterations (restart "
              << res.report.chosen_restart << ")\n";

    manifest.doc()["config"] = config_json(opts, cfg);
    manifest.doc()["inputs"] = {corpus_path};
    manifest.doc()["outputs"] = {model_path, manifest.path("model.txt")};
    manifest.doc()["metrics"] = {{"final_bound", res.report.bound_trace.back()},
                                 {"iterations", res.report.iterations_used},
                                 {"converged", res.report.converged},
                                 {"chosen_restart", res.report.chosen_restart}};
    manifest.finish();
    return 0;
}

// --- classify ----------------------------------------------------------

int cmd_classify(const std::string& train_path, const std::string& test_path,
                 const TrainOpts& opts, const std::string& out_dir) {
    const cg::TrainConfig cfg = to_config(opts);
    const cg::FitGeometry geom = to_geometry(opts);
    const cg::VariantKind kind = cg::variant_from_string(opts.variant);
    ManifestWriter manifest("classify", out_dir);

    const cg::Corpus train = cg::load_corpus(train_path);
    const cg::Corpus test = cg::load_corpus(test_path);
    const cg::ClassifierModel model = train_by_class(train, kind, geom, cfg);

    std::vector<std::string> outputs;
    for (int c = 0; c < model.classes(); ++c) {
        const std::string path = manifest.path("class_" + std::to_string(c) + ".cgrd");
        cg::save_model(model.models[static_cast<std::size_t>(c)], path);
        outputs.push_back(path);
    }

    std::cout << "#id\tlabel\tpredicted";
    for (const std::string& label : model.labels) std::cout << "\tfe_" << label;
    std::cout << '\n';

    int correct = 0, labeled = 0;
    for (int i = 0; i < test.size(); ++i) {
        const cg::Classification c = cg::classify(model, test, i);
        const auto& sample = test.samples[static_cast<std::size_t>(i)];
        std::cout << sample.id << '\t' << sample.label << '\t'
                  << model.labels[static_cast<std::size_t>(c.best)];
        for (double fe : c.free_energies) std::cout << '\t' << fe;
        std::cout << '\n';
        if (!sample.label.empty()) {
            ++labeled;
            correct += class_index(model, sample.label) == c.best;
        }
    }
    manifest.doc()["config"] = config_json(opts, cfg);
    manifest.doc()["inputs"] = {train_path, test_path};
    manifest.doc()["outputs"] = outputs;
    json metrics = {{"test_samples", test.size()}};
    if (labeled > 0) {
        const double accuracy = static_cast<double>(correct) / labeled;
        std::cout << "#accuracy\t" << accuracy << '\n';
        metrics["accuracy"] = accuracy;
    }
    manifest.doc()["metrics"] = metrics;
    manifest.finish();
    return 0;
}

// --- sweep -------------------------------------------------------------

int cmd_sweep(const std::string& corpus_path, const std::string& grids_text,
              const std::string& windows_text, int folds, const TrainOpts& opts,
              const std::string& out_dir) {
    const cg::TrainConfig cfg = to_config(opts);
    const cg::VariantKind kind = cg::variant_from_string(opts.variant);
    ManifestWriter manifest("sweep", out_dir);

    const cg::Corpus corpus = cg::load_corpus(corpus_path);
    const std::vector<int> grids = grids_text.empty() ? cg::default_grid_ladder()
                                                      : parse_int_list(grids_text, "grid");
    int max_grid = 0;
    for (int g : grids) max_grid = std::max(max_grid, g);
    const std::vector<int> windows = windows_text.empty()
                                         ? cg::default_window_ladder(max_grid)
                                         : parse_int_list(windows_text, "window");

    const auto rows = cg::sweep(corpus, grids, windows, kind, cfg, folds);
    const char* metric = rows.empty() || !rows[0].supervised ? "heldout_free_energy" : "accuracy";
    std::cout << "#grid\twindow\tkappa\t" << metric << '\n';
    for (const cg::SweepRow& row : rows)
        std::cout << row.grid_size << '\t' << row.window_size << '\t' << row.kappa << '\t'
                  << row.score << '\n';

    manifest.doc()["config"] = config_json(opts, cfg);
    manifest.doc()["config"]["folds"] = folds;
    manifest.doc()["inputs"] = {corpus_path};
    manifest.doc()["outputs"] = json::array();
    manifest.doc()["metrics"] = {{"candidates", rows.size()},
                                 {"best_grid", rows[0].grid_size},
                                 {"best_window", rows[0].window_size},
                                 {"best_kappa", rows[0].kappa},
                                 {"best_score", rows[0].score}};
    manifest.finish();
    return 0;
}

// --- filter ------------------------------------------------------------

int cmd_filter(const std::string& train_path, const std::string& sequence_path, double gamma,
               const std::string& trans_mode, const TrainOpts& opts,
               const std::string& out_dir) {
    const cg::TrainConfig cfg = to_config(opts);
    const cg::FitGeometry geom = to_geometry(opts);
    const cg::VariantKind kind = cg::variant_from_string(opts.variant);
    if (gamma < 0) throw cg::GeometryError("gamma must be nonnegative");
    ManifestWriter manifest("filter", out_dir);

    const cg::Corpus train = cg::load_corpus(train_path);
    const cg::Corpus sequence = cg::load_corpus(sequence_path);
    const cg::ClassifierModel model = train_by_class(train, kind, geom, cfg);
    const int classes = model.classes();

    cg::TransitionModel tm = cg::TransitionModel::uniform(classes, gamma);
    if (trans_mode == "bigram") {
        // supervised bigram estimate from the training corpus sample order
        std::vector<int> labels;
        for (const auto& sample : train.samples) {
            const int c = class_index(model, sample.label);
            if (c < 0) throw cg::DataError("unlabeled training sample in bigram mode");
            labels.push_back(c);
        }
        tm = cg::estimate_transitions({labels}, classes, gamma);
    } else if (trans_mode == "bw") {
        std::vector<std::vector<double>> loglik;
        for (int t = 0; t < sequence.size(); ++t) {
            const cg::Classification c = cg::classify(model, sequence, t);
            std::vector<double> row(c.free_energies.size());
            for (std::size_t j = 0; j < row.size(); ++j) row[j] = -c.free_energies[j];
            loglik.push_back(std::move(row));
        }
        const cg::BaumWelchResult bw =
            cg::estimate_transitions_baum_welch({loglik}, classes, gamma);
        tm = bw.model;
        std::cerr << "Baum-Welch " << (bw.converged ? "converged" : "hit the iteration cap")
                  << " after " << bw.loglik_trace.size() << " iterations\n";
    }

    const auto posteriors = cg::hmm_filter(model, tm, sequence);
    std::cout << "#t\tid\tlabel\tpredicted";
    for (const std::string& label : model.labels) std::cout << "\tp_" << label;
    std::cout << '\n';
    int correct = 0, labeled = 0;
    for (int t = 0; t < sequence.size(); ++t) {
        const auto& row = posteriors[static_cast<std::size_t>(t)];
        int best = 0;
        for (int c = 1; c < classes; ++c)
            if (row[static_cast<std::size_t>(c)] > row[static_cast<std::size_t>(best)]) best = c;
        const auto& sample = sequence.samples[static_cast<std::size_t>(t)];
        std::cout << t << '\t' << sample.id << '\t' << sample.label << '\t'
                  << model.labels[static_cast<std::size_t>(best)];
        for (double p : row) std::cout << '\t' << p;
        std::cout << '\n';
        if (!sample.label.empty()) {
            ++labeled;
            correct += class_index(model, sample.label) == best;
        }
    }

    manifest.doc()["config"] = config_json(opts, cfg);
    manifest.doc()["config"]["gamma"] = gamma;
    manifest.doc()["config"]["trans"] = trans_mode;
    manifest.doc()["inputs"] = {train_path, sequence_path};
    manifest.doc()["outputs"] = json::array();
    json metrics = {{"steps", sequence.size()}};
    if (labeled > 0) {
        const double accuracy = static_cast<double>(correct) / labeled;
        std::cout << "#accuracy\t" << accuracy << '\n';
        metrics["accuracy"] = accuracy;
    }
    manifest.doc()["metrics"] = metrics;
    manifest.finish();
    return 0;
}

// --- cluster -----------------------------------------------------------

int cmd_cluster(const std::string& train_path, const std::string& test_path,
                const TrainOpts& opts, const std::string& out_dir) {
    const cg::TrainConfig cfg = to_config(opts);
    const cg::FitGeometry geom = to_geometry(opts);
    const cg::VariantKind kind = cg::variant_from_string(opts.variant);
    ManifestWriter manifest("cluster", out_dir);

    const cg::Corpus train = cg::load_corpus(train_path);
    const cg::Corpus test = cg::load_corpus(test_path);
    // one unsupervised model over all training samples; labels only pick
    // the nearest mapped neighbor afterwards
    const cg::VariantFitResult res = cg::fit_corpus(kind, train, geom, cfg);
    const auto labels = cg::nearest_map_labels(res.model, train, res.posteriors, test);

    const std::string model_path = manifest.path("model.cgrd");
    cg::save_model(res.model, model_path);

    std::cout << "#id\tlabel\tpredicted\n";
    int correct = 0, labeled = 0;
    for (int i = 0; i < test.size(); ++i) {
        const auto& sample = test.samples[static_cast<std::size_t>(i)];
        std::cout << sample.id << '\t' << sample.label << '\t'
                  << labels[static_cast<std::size_t>(i)] << '\n';
        if (!sample.label.empty()) {
            ++labeled;
            correct += sample.label == labels[static_cast<std::size_t>(i)];
        }
    }
    manifest.doc()["config"] = config_json(opts, cfg);
    manifest.doc()["inputs"] = {train_path, test_path};
    manifest.doc()["outputs"] = {model_path};
    json metrics = {{"test_samples", test.size()}};
    if (labeled > 0) {
        const double accuracy = static_cast<double>(correct) / labeled;
        std::cout << "#accuracy\t" << accuracy << '\n';
        metrics["accuracy"] = accuracy;
    }
    manifest.doc()["metrics"] = metrics;
    manifest.finish();
    return 0;
}

// --- reconstruct -------------------------------------------------------

int cmd_reconstruct(const std::string& layout_path, const std::string& patch_text, int samples,
                    int heldout, int scale, const TrainOpts& opts, const std::string& out_dir) {
    TrainOpts resolved = opts;
    if (resolved.variant == "plain" && !resolved.tess.empty()) resolved.variant = "tessellated";
    const cg::VariantKind kind = cg::variant_from_string(resolved.variant);
    if (samples < 1) throw cg::GeometryError("--samples must be at least 1");
    if (heldout < 0) throw cg::GeometryError("--heldout must be nonnegative");
    if (scale < 1) throw cg::GeometryError("--scale must be at least 1");
    const Dims patch = parse_dims(patch_text, "patch");
    ManifestWriter manifest("reconstruct", out_dir);

    const cg::Corpus layout_corpus = cg::load_corpus(layout_path);
    if (layout_corpus.kind != cg::Representation::maps || layout_corpus.size() < 1)
        throw cg::DataError("reconstruct needs a maps corpus with at least one sample");
    const cg::FeatureMap& layout = std::get<cg::FeatureMap>(layout_corpus.samples[0].data);

    cg::TessellationSpec tess{1, 1};
    if (!resolved.tess.empty()) {
        const Dims s = parse_dims(resolved.tess, "tessellation");
        tess = cg::TessellationSpec{s.x, s.y};
    }

    // layout reconstruction defaults: fixed-uniform prior, grid = layout extent
    cg::TrainConfig cfg = to_config(resolved);
    if (opts.prior == "smoothed") cfg.prior_update = cg::PriorUpdate::fixed_uniform;
    cg::FitGeometry geom;
    if (resolved.grid.empty()) {
        geom.ex = layout.nx;
        geom.ey = layout.ny;
    } else {
        const Dims g = parse_dims(resolved.grid, "grid");
        geom.ex = g.x;
        geom.ey = g.y;
    }
    geom.window = cg::WindowSpec{patch.x, patch.y};
    if (kind == cg::VariantKind::tessellated || kind == cg::VariantKind::spatial_bow)
        geom.tess = tess;
    if (kind == cg::VariantKind::epitome || kind == cg::VariantKind::hybrid)
        geom.window.reset();  // forced to the map extent

    const cg::LayoutCorpus data = cg::generate_layout_corpus(
        layout, layout_corpus.vocab, patch.x, patch.y, samples, cfg.seed, tess);
    const cg::LayoutCorpus held = cg::generate_layout_corpus(
        layout, layout_corpus.vocab, patch.x, patch.y, std::max(heldout, 1),
        cg::mix_seed(cfg.seed, 0x4f3a), tess);

    const cg::Corpus& train = kind == cg::VariantKind::plain
                                  ? data.bags
                                  : (kind == cg::VariantKind::epitome ||
                                     kind == cg::VariantKind::hybrid)
                                        ? data.maps
                                        : data.sectioned;
    const cg::VariantFitResult res = cg::fit_corpus(kind, train, geom, cfg);

    const cg::CgModel truth{
        cg::VariantKind::plain,
        cg::layout_to_grid(layout, layout_corpus.vocab, cg::WindowSpec{patch.x, patch.y}),
        {1, 1},
        cg::LocationPrior::uniform(layout.nx, layout.ny)};

    json metrics = {{"final_bound", res.report.bound_trace.back()},
                    {"iterations", res.report.iterations_used}};
    std::cout << "#metric\tvalue\n";
    std::cout << "final_bound\t" << res.report.bound_trace.back() << '\n';
    if (res.model.grid.ex == layout.nx && res.model.grid.ey == layout.ny) {
        const cg::ReconstructionMetrics score =
            cg::reconstruction_score(res.model, truth, held.bags);
        std::cout << "kl_aligned\t" << score.kl_aligned << '\n'
                  << "heldout_ll_learned\t" << score.heldout_ll_learned << '\n'
                  << "heldout_ll_truth\t" << score.heldout_ll_truth << '\n';
        metrics["kl_aligned"] = score.kl_aligned;
        metrics["heldout_ll_learned"] = score.heldout_ll_learned;
        metrics["heldout_ll_truth"] = score.heldout_ll_truth;
        metrics["best_transform"] = score.best_transform;
        metrics["best_shift"] = {score.best_shift_x, score.best_shift_y};
    } else {
        std::cerr << "grid extent differs from the layout; skipping the KL alignment score\n";
    }

    const cg::Palette palette = cg::default_palette(layout_corpus.vocab);
    const std::string model_path = manifest.path("model.cgrd");
    const std::string render_path = manifest.path("grid.ppm");
    const std::string truth_path = manifest.path("truth.ppm");
    cg::save_model(res.model, model_path);
    cg::write_ppm(cg::render_grid(res.model.grid, palette), render_path, scale);
    cg::write_ppm(cg::render_grid(truth.grid, palette), truth_path, scale);

    manifest.doc()["config"] = config_json(resolved, cfg);
    manifest.doc()["config"]["patch"] = patch_text;
    manifest.doc()["config"]["samples"] = samples;
    manifest.doc()["config"]["heldout"] = heldout;
    manifest.doc()["config"]["scale"] = scale;
    manifest.doc()["inputs"] = {layout_path};
    manifest.doc()["outputs"] = {model_path, render_path, truth_path};
    manifest.doc()["metrics"] = metrics;
    manifest.finish();
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"counting-grid models: training, evaluation and layout reconstruction"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    // train
    auto* train = app.add_subcommand("train", "fit a model to a corpus");
    std::string train_corpus, train_out;
    TrainOpts train_opts;
    train->add_option("--corpus", train_corpus, "input .cgc corpus")->required();
    train->add_option("--out", train_out, "output directory")->required();
    add_train_flags(train, train_opts);

    // classify
    auto* classify = app.add_subcommand("classify", "train per class and label a test corpus");
    std::string cls_train, cls_test, cls_out;
    TrainOpts cls_opts;
    classify->add_option("--train", cls_train, "labeled training corpus")->required();
    classify->add_option("--test", cls_test, "test corpus")->required();
    classify->add_option("--out", cls_out, "output directory")->required();
    add_train_flags(classify, cls_opts);

    // sweep
    auto* sweep = app.add_subcommand("sweep", "cross-validated capacity sweep");
    std::string sw_corpus, sw_out, sw_grids, sw_windows;
    int sw_folds = 3;
    TrainOpts sw_opts;
    sweep->add_option("--corpus", sw_corpus, "input corpus")->required();
    sweep->add_option("--out", sw_out, "output directory")->required();
    sweep->add_option("--grids", sw_grids, "comma-separated square grid sizes");
    sweep->add_option("--windows", sw_windows, "comma-separated square window sizes");
    sweep->add_option("--folds", sw_folds, "cross-validation folds");
    add_train_flags(sweep, sw_opts, /*grid_required=*/false);

    // filter
    auto* filter = app.add_subcommand("filter", "HMM-filter a sample sequence");
    std::string fl_train, fl_seq, fl_out, fl_trans = "uniform";
    double fl_gamma = 1.0;
    TrainOpts fl_opts;
    filter->add_option("--train", fl_train, "labeled training corpus")->required();
    filter->add_option("--sequence", fl_seq, "time-ordered test corpus")->required();
    filter->add_option("--out", fl_out, "output directory")->required();
    filter->add_option("--gamma", fl_gamma, "likelihood scale");
    filter->add_option("--trans", fl_trans, "transition source")
        ->check(CLI::IsMember({"uniform", "bigram", "bw"}));
    add_train_flags(filter, fl_opts);

    // cluster
    auto* cluster = app.add_subcommand("cluster", "unsupervised fit + nearest-map labels");
    std::string cl_train, cl_test, cl_out;
    TrainOpts cl_opts;
    cluster->add_option("--train", cl_train, "labeled training corpus")->required();
    cluster->add_option("--test", cl_test, "test corpus")->required();
    cluster->add_option("--out", cl_out, "output directory")->required();
    add_train_flags(cluster, cl_opts);

    // reconstruct
    auto* reconstruct =
        app.add_subcommand("reconstruct", "learn a layout from random patches and render it");
    std::string rc_layout, rc_out, rc_patch = "16x16";
    int rc_samples = 50, rc_heldout = 20, rc_scale = 8;
    TrainOpts rc_opts;
    reconstruct->add_option("--layout", rc_layout, "maps corpus; first sample is the layout")
        ->required();
    reconstruct->add_option("--out", rc_out, "output directory")->required();
    reconstruct->add_option("--patch", rc_patch, "patch size, e.g. 16x16");
    reconstruct->add_option("--samples", rc_samples, "number of training patches");
    reconstruct->add_option("--heldout", rc_heldout, "held-out patches for scoring");
    reconstruct->add_option("--scale", rc_scale, "render upscale factor");
    add_train_flags(reconstruct, rc_opts, /*grid_required=*/false);

    try {
        app.parse(argc, argv);
        if (*train) return cmd_train(train_corpus, train_opts, train_out);
        if (*classify) return cmd_classify(cls_train, cls_test, cls_opts, cls_out);
        if (*sweep) return cmd_sweep(sw_corpus, sw_grids, sw_windows, sw_folds, sw_opts, sw_out);
        if (*filter) return cmd_filter(fl_train, fl_seq, fl_gamma, fl_trans, fl_opts, fl_out);
        if (*cluster) return cmd_cluster(cl_train, cl_test, cl_opts, cl_out);
        if (*reconstruct)
            return cmd_reconstruct(rc_layout, rc_patch, rc_samples, rc_heldout, rc_scale,
                                   rc_opts, rc_out);
        return 2;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        app.exit(e);
        return 2;
    } catch (const cg::GeometryError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const cg::Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 3;
    }
}
