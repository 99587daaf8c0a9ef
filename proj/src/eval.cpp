#include "cg/eval.hpp"

#include <algorithm>
#include <cmath>

#include "cg/errors.hpp"
#include "cg/numeric.hpp"

namespace cg {

namespace {

Bag sample_as_bag(const Corpus& corpus, int index) {
    const auto& data = corpus.samples[static_cast<std::size_t>(index)].data;
    if (const Bag* bag = std::get_if<Bag>(&data)) return *bag;
    if (const SectionedBag* sb = std::get_if<SectionedBag>(&data)) return sb->pooled();
    return map_histogram(std::get<FeatureMap>(data), corpus.vocab);
}

SectionedBag sample_as_sectioned(const Corpus& corpus, int index, TessellationSpec tess) {
    const auto& data = corpus.samples[static_cast<std::size_t>(index)].data;
    if (const SectionedBag* sb = std::get_if<SectionedBag>(&data)) {
        if (!(sb->tess == tess))
            throw DataError("sample tessellation does not match the model");
        return *sb;
    }
    if (const FeatureMap* fm = std::get_if<FeatureMap>(&data))
        return tessellate_feature_map(*fm, tess, corpus.vocab);
    throw DataError("a tessellated model needs sectioned bags or feature maps");
}

const FeatureMap& sample_as_map(const Corpus& corpus, int index) {
    const auto& data = corpus.samples[static_cast<std::size_t>(index)].data;
    if (const FeatureMap* fm = std::get_if<FeatureMap>(&data)) return *fm;
    throw DataError("an epitome model needs feature maps");
}

void check_vocab(const CgModel& model, const Corpus& corpus) {
    if (model.grid.vocab != corpus.vocab)
        throw DataError("corpus vocabulary does not match the model");
}

Corpus corpus_subset(const Corpus& corpus, const std::vector<int>& indices) {
    Corpus out;
    out.kind = corpus.kind;
    out.vocab = corpus.vocab;
    out.tess = corpus.tess;
    out.map_nx = corpus.map_nx;
    out.map_ny = corpus.map_ny;
    out.samples.reserve(indices.size());
    for (int i : indices) out.samples.push_back(corpus.samples[static_cast<std::size_t>(i)]);
    return out;
}

}  // namespace

ClassifierModel train_classifier(const std::vector<std::pair<std::string, Corpus>>& by_class,
                                 VariantKind kind, const FitGeometry& geom,
                                 const TrainConfig& cfg) {
    if (by_class.size() < 2) throw DataError("classifier needs at least two classes");
    ClassifierModel out;
    for (const auto& [label, corpus] : by_class) {
        if (corpus.size() == 0) throw DataError("class '" + label + "' has no samples");
        if (corpus.vocab != by_class[0].second.vocab)
            throw DataError("classes disagree on vocabulary size");
        out.labels.push_back(label);
        out.models.push_back(fit_corpus(kind, corpus, geom, cfg).model);
    }
    return out;
}

double sample_free_energy(const CgModel& model, const Corpus& corpus, int index) {
    check_vocab(model, corpus);
    switch (model.kind) {
        case VariantKind::plain:
        case VariantKind::mixture_unigrams:
        case VariantKind::hybrid:
            return free_energy(model.grid, model.prior, sample_as_bag(corpus, index));
        case VariantKind::tessellated:
        case VariantKind::spatial_bow:
            return free_energy_tessellated(model.grid, model.prior,
                                           sample_as_sectioned(corpus, index, model.tess));
        case VariantKind::epitome:
            return free_energy_epitome(model.grid, model.prior, sample_as_map(corpus, index));
    }
    throw DataError("unknown variant kind");
}

LocationPosterior sample_posterior(const CgModel& model, const Corpus& corpus, int index) {
    check_vocab(model, corpus);
    switch (model.kind) {
        case VariantKind::plain:
        case VariantKind::mixture_unigrams:
        case VariantKind::hybrid:
            return e_step(model.grid, model.prior, sample_as_bag(corpus, index));
        case VariantKind::tessellated:
        case VariantKind::spatial_bow:
            return e_step_tessellated(model.grid, model.prior,
                                      sample_as_sectioned(corpus, index, model.tess));
        case VariantKind::epitome:
            return e_step_epitome(model.grid, model.prior, sample_as_map(corpus, index));
    }
    throw DataError("unknown variant kind");
}

Classification classify(const ClassifierModel& model, const Corpus& corpus, int index) {
    Classification out;
    out.free_energies.reserve(model.models.size());
    for (const CgModel& m : model.models)
        out.free_energies.push_back(sample_free_energy(m, corpus, index));
    out.best = 0;
    for (int c = 1; c < model.classes(); ++c)
        if (out.free_energies[static_cast<std::size_t>(c)] <
            out.free_energies[static_cast<std::size_t>(out.best)])
            out.best = c;
    return out;
}

double capacity(int ex, int ey, int wx, int wy) {
    if (ex < 1 || ey < 1 || wx < 1 || wy < 1) throw GeometryError("capacity needs positive dims");
    return static_cast<double>(ex) * ey / (static_cast<double>(wx) * wy);
}

std::vector<int> default_grid_ladder() {
    return {2, 3, 4, 5, 6, 7, 8, 9, 10, 15, 20, 25, 30, 35, 40};
}

std::vector<int> default_window_ladder(int max_size) {
    std::vector<int> out;
    for (int w = 2; w <= max_size; w += 2) out.push_back(w);
    return out;
}

std::vector<std::pair<int, int>> admissible_configs(std::span<const int> grid_sizes,
                                                    std::span<const int> window_sizes, int t) {
    std::vector<std::pair<int, int>> out;
    for (int e : grid_sizes) {
        for (int w : window_sizes) {
            if (w > e) continue;
            const double kappa = capacity(e, e, w, w);
            if (kappa >= 1.5 && kappa <= t / 2.0) out.emplace_back(e, w);
        }
    }
    return out;
}

std::vector<SweepRow> sweep(const Corpus& corpus, std::span<const int> grid_sizes,
                            std::span<const int> window_sizes, VariantKind kind,
                            const TrainConfig& cfg, int folds) {
    if (folds < 2) throw DataError("sweep needs at least 2 folds");
    if (corpus.size() < folds) throw DataError("sweep needs at least one sample per fold");
    const auto candidates = admissible_configs(grid_sizes, window_sizes, corpus.size());
    if (candidates.empty()) throw DataError("no admissible (grid, window) configuration");
    const bool supervised = corpus.labeled();

    std::vector<SweepRow> rows;
    for (const auto& [e, w] : candidates) {
        if ((kind == VariantKind::tessellated || kind == VariantKind::spatial_bow) &&
            (w % corpus.tess.sx != 0 || w % corpus.tess.sy != 0))
            continue;

        double score_sum = 0.0;
        int scored_folds = 0;
        for (int f = 0; f < folds; ++f) {
            std::vector<int> train_idx, test_idx;
            for (int i = 0; i < corpus.size(); ++i)
                (i % folds == f ? test_idx : train_idx).push_back(i);
            if (train_idx.empty() || test_idx.empty()) continue;
            const Corpus train = corpus_subset(corpus, train_idx);
            const Corpus test = corpus_subset(corpus, test_idx);

            FitGeometry geom;
            geom.ex = e;
            geom.ey = e;
            geom.window = WindowSpec{w, w};
            if (corpus.kind == Representation::sectioned) geom.tess = corpus.tess;

            if (supervised) {
                const auto by_class = split_by_label(train);
                if (by_class.size() < 2) continue;  // fold lost a class
                const ClassifierModel cls = train_classifier(by_class, kind, geom, cfg);
                int correct = 0;
                for (int i = 0; i < test.size(); ++i) {
                    const Classification c = classify(cls, test, i);
                    if (cls.labels[static_cast<std::size_t>(c.best)] ==
                        test.samples[static_cast<std::size_t>(i)].label)
                        ++correct;
                }
                score_sum += static_cast<double>(correct) / test.size();
            } else {
                const VariantFitResult res = fit_corpus(kind, train, geom, cfg);
                double fe = 0.0;
                for (int i = 0; i < test.size(); ++i)
                    fe += sample_free_energy(res.model, test, i);
                score_sum += fe / test.size();
            }
            ++scored_folds;
        }
        if (scored_folds == 0) continue;
        rows.push_back(SweepRow{e, w, capacity(e, e, w, w), score_sum / scored_folds, supervised});
    }

    std::sort(rows.begin(), rows.end(), [supervised](const SweepRow& a, const SweepRow& b) {
        if (a.score != b.score) return supervised ? a.score > b.score : a.score < b.score;
        if (a.kappa != b.kappa) return a.kappa < b.kappa;
        return a.grid_size < b.grid_size;
    });
    return rows;
}

TransitionModel TransitionModel::uniform(int classes, double gamma) {
    return TransitionModel{classes,
                           std::vector<double>(static_cast<std::size_t>(classes) * classes,
                                               1.0 / classes),
                           gamma};
}

TransitionModel TransitionModel::identity(int classes, double gamma) {
    TransitionModel tm{classes,
                       std::vector<double>(static_cast<std::size_t>(classes) * classes, 0.0),
                       gamma};
    for (int c = 0; c < classes; ++c) tm.prob[static_cast<std::size_t>(c) * classes + c] = 1.0;
    return tm;
}

namespace {

void check_transitions(const TransitionModel& tm) {
    if (tm.classes < 1 || tm.prob.size() != static_cast<std::size_t>(tm.classes) * tm.classes)
        throw DataError("transition matrix storage does not match class count");
    if (!(tm.gamma >= 0.0)) throw DataError("likelihood scale gamma must be nonnegative");
    for (int i = 0; i < tm.classes; ++i) {
        double row = 0.0;
        for (int j = 0; j < tm.classes; ++j) row += tm.at(i, j);
        if (std::abs(row - 1.0) > 1e-9)
            throw DataError("transition matrix row " + std::to_string(i) + " does not sum to 1");
    }
}

std::vector<double> log_matrix(const std::vector<double>& m) {
    std::vector<double> out(m.size());
    for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] > 0.0 ? std::log(m[i]) : kNegInf;
    return out;
}

}  // namespace

std::vector<std::vector<double>> hmm_filter_loglik(
    const std::vector<std::vector<double>>& loglik, const TransitionModel& tm) {
    check_transitions(tm);
    if (loglik.empty()) throw DataError("hmm_filter: empty sequence");
    const int c = tm.classes;
    const std::vector<double> ltrans = log_matrix(tm.prob);

    std::vector<std::vector<double>> posteriors;
    posteriors.reserve(loglik.size());
    std::vector<double> alpha(static_cast<std::size_t>(c));
    std::vector<double> prev(static_cast<std::size_t>(c));
    std::vector<double> terms(static_cast<std::size_t>(c));
    for (std::size_t t = 0; t < loglik.size(); ++t) {
        if (static_cast<int>(loglik[t].size()) != c)
            throw DataError("hmm_filter: log-likelihood row has the wrong class count");
        for (int j = 0; j < c; ++j) {
            double chain;
            if (t == 0) {
                chain = -std::log(static_cast<double>(c));  // uniform initial distribution
            } else {
                for (int i = 0; i < c; ++i)
                    terms[static_cast<std::size_t>(i)] =
                        prev[static_cast<std::size_t>(i)] +
                        ltrans[static_cast<std::size_t>(i) * c + j];
                chain = log_sum_exp(terms);
            }
            alpha[static_cast<std::size_t>(j)] = chain + tm.gamma * loglik[t][static_cast<std::size_t>(j)];
        }
        const double norm = log_sum_exp(alpha);
        if (norm == kNegInf) throw ModelError("hmm_filter: zero posterior mass at step " +
                                              std::to_string(t));
        std::vector<double> post(static_cast<std::size_t>(c));
        for (int j = 0; j < c; ++j) {
            alpha[static_cast<std::size_t>(j)] -= norm;
            post[static_cast<std::size_t>(j)] = std::exp(alpha[static_cast<std::size_t>(j)]);
        }
        posteriors.push_back(std::move(post));
        prev = alpha;
    }
    return posteriors;
}

std::vector<std::vector<double>> hmm_filter(const ClassifierModel& model,
                                            const TransitionModel& tm, const Corpus& sequence) {
    if (tm.classes != model.classes())
        throw DataError("transition matrix class count does not match the classifier");
    std::vector<std::vector<double>> loglik(static_cast<std::size_t>(sequence.size()));
    for (int t = 0; t < sequence.size(); ++t) {
        const Classification c = classify(model, sequence, t);
        std::vector<double> row(c.free_energies.size());
        for (std::size_t j = 0; j < row.size(); ++j) row[j] = -c.free_energies[j];
        loglik[static_cast<std::size_t>(t)] = std::move(row);
    }
    return hmm_filter_loglik(loglik, tm);
}

TransitionModel estimate_transitions(const std::vector<std::vector<int>>& label_sequences,
                                     int classes, double gamma) {
    if (label_sequences.empty()) throw DataError("transition estimate needs sequences");
    std::vector<double> counts(static_cast<std::size_t>(classes) * classes, 1.0);  // add-one
    for (const auto& seq : label_sequences) {
        for (std::size_t t = 0; t + 1 < seq.size(); ++t) {
            const int a = seq[t], b = seq[t + 1];
            if (a < 0 || a >= classes || b < 0 || b >= classes)
                throw DataError("label index out of range in sequence");
            counts[static_cast<std::size_t>(a) * classes + b] += 1.0;
        }
    }
    for (int i = 0; i < classes; ++i) {
        double row = 0.0;
        for (int j = 0; j < classes; ++j) row += counts[static_cast<std::size_t>(i) * classes + j];
        for (int j = 0; j < classes; ++j) counts[static_cast<std::size_t>(i) * classes + j] /= row;
    }
    return TransitionModel{classes, std::move(counts), gamma};
}

BaumWelchResult estimate_transitions_baum_welch(
    const std::vector<std::vector<std::vector<double>>>& loglik_sequences, int classes,
    double gamma, double tol, int max_iters) {
    if (loglik_sequences.empty()) throw DataError("transition estimate needs sequences");
    const int c = classes;
    BaumWelchResult res;
    res.model = TransitionModel::uniform(c, gamma);

    for (int iter = 0; iter < max_iters; ++iter) {
        const std::vector<double> ltrans = log_matrix(res.model.prob);
        std::vector<double> xi(static_cast<std::size_t>(c) * c, 0.0);
        double total_ll = 0.0;

        for (const auto& seq : loglik_sequences) {
            const int steps = static_cast<int>(seq.size());
            if (steps == 0) continue;
            std::vector<std::vector<double>> s(seq.size());
            for (int t = 0; t < steps; ++t) {
                if (static_cast<int>(seq[static_cast<std::size_t>(t)].size()) != c)
                    throw DataError("log-likelihood row has the wrong class count");
                s[static_cast<std::size_t>(t)].resize(static_cast<std::size_t>(c));
                for (int j = 0; j < c; ++j)
                    s[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] =
                        gamma * seq[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
            }
            std::vector<std::vector<double>> alpha(seq.size(),
                                                   std::vector<double>(static_cast<std::size_t>(c)));
            std::vector<std::vector<double>> beta(seq.size(),
                                                  std::vector<double>(static_cast<std::size_t>(c)));
            std::vector<double> terms(static_cast<std::size_t>(c));
            for (int j = 0; j < c; ++j)
                alpha[0][static_cast<std::size_t>(j)] =
                    -std::log(static_cast<double>(c)) + s[0][static_cast<std::size_t>(j)];
            for (int t = 1; t < steps; ++t) {
                for (int j = 0; j < c; ++j) {
                    for (int i = 0; i < c; ++i)
                        terms[static_cast<std::size_t>(i)] =
                            alpha[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(i)] +
                            ltrans[static_cast<std::size_t>(i) * c + j];
                    alpha[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] =
                        log_sum_exp(terms) + s[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
                }
            }
            const double seq_ll = log_sum_exp(alpha[static_cast<std::size_t>(steps - 1)]);
            total_ll += seq_ll;

            for (int j = 0; j < c; ++j) beta[static_cast<std::size_t>(steps - 1)][static_cast<std::size_t>(j)] = 0.0;
            for (int t = steps - 2; t >= 0; --t) {
                for (int i = 0; i < c; ++i) {
                    for (int j = 0; j < c; ++j)
                        terms[static_cast<std::size_t>(j)] =
                            ltrans[static_cast<std::size_t>(i) * c + j] +
                            s[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(j)] +
                            beta[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(j)];
                    beta[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] = log_sum_exp(terms);
                }
            }
            for (int t = 0; t + 1 < steps; ++t) {
                for (int i = 0; i < c; ++i) {
                    for (int j = 0; j < c; ++j) {
                        const double w =
                            alpha[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)] +
                            ltrans[static_cast<std::size_t>(i) * c + j] +
                            s[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(j)] +
                            beta[static_cast<std::size_t>(t + 1)][static_cast<std::size_t>(j)] - seq_ll;
                        if (w != kNegInf) xi[static_cast<std::size_t>(i) * c + j] += std::exp(w);
                    }
                }
            }
        }

        res.loglik_trace.push_back(total_ll);
        if (res.loglik_trace.size() >= 2) {
            const double prev = res.loglik_trace[res.loglik_trace.size() - 2];
            if (std::abs(total_ll - prev) / (1.0 + std::abs(prev)) <= tol) {
                res.converged = true;
                break;
            }
        }

        for (int i = 0; i < c; ++i) {
            double row = 0.0;
            for (int j = 0; j < c; ++j) row += xi[static_cast<std::size_t>(i) * c + j];
            if (row > 0.0)
                for (int j = 0; j < c; ++j)
                    res.model.prob[static_cast<std::size_t>(i) * c + j] =
                        xi[static_cast<std::size_t>(i) * c + j] / row;
            // rows with no expected visits keep their previous values
        }
    }
    return res;
}

int toroidal_distance2(int ex, int ey, int cell_a, int cell_b) {
    const int ax = cell_a / ey, ay = cell_a % ey;
    const int bx = cell_b / ey, by = cell_b % ey;
    int dx = std::abs(ax - bx);
    dx = std::min(dx, ex - dx);
    int dy = std::abs(ay - by);
    dy = std::min(dy, ey - dy);
    return dx * dx + dy * dy;
}

std::vector<std::string> nearest_map_labels(const CgModel& model, const Corpus& train,
                                            std::span<const LocationPosterior> train_posteriors,
                                            const Corpus& test) {
    if (!train.labeled()) throw DataError("training corpus must be labeled");
    if (train_posteriors.size() != static_cast<std::size_t>(train.size()))
        throw DataError("posteriors not aligned with the training corpus");
    struct Mapped {
        int cell;
        const std::string* id;
        const std::string* label;
    };
    std::vector<Mapped> mapped;
    mapped.reserve(train_posteriors.size());
    for (int i = 0; i < train.size(); ++i)
        mapped.push_back(Mapped{train_posteriors[static_cast<std::size_t>(i)].argmax_cell(),
                                &train.samples[static_cast<std::size_t>(i)].id,
                                &train.samples[static_cast<std::size_t>(i)].label});

    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(test.size()));
    for (int t = 0; t < test.size(); ++t) {
        const int cell = sample_posterior(model, test, t).argmax_cell();
        int best = 0;
        int best_d = toroidal_distance2(model.grid.ex, model.grid.ey, cell, mapped[0].cell);
        for (int i = 1; i < static_cast<int>(mapped.size()); ++i) {
            const int d = toroidal_distance2(model.grid.ex, model.grid.ey, cell,
                                             mapped[static_cast<std::size_t>(i)].cell);
            if (d < best_d ||
                (d == best_d && *mapped[static_cast<std::size_t>(i)].id < *mapped[static_cast<std::size_t>(best)].id)) {
                best = i;
                best_d = d;
            }
        }
        out.push_back(*mapped[static_cast<std::size_t>(best)].label);
    }
    return out;
}

CountingGrid layout_to_grid(const FeatureMap& layout, int vocab, WindowSpec w) {
    for (int v : layout.z)
        if (v < 0 || v >= vocab) throw DataError("feature index out of range");
    CountingGrid g{layout.nx, layout.ny, vocab, w, {}};
    check_window(w, g.ex, g.ey);
    g.pi.assign(static_cast<std::size_t>(g.cells()) * vocab, 0.0);
    for (int k = 0; k < g.cells(); ++k)
        g.pi[static_cast<std::size_t>(k) * vocab + layout.z[static_cast<std::size_t>(k)]] = 1.0;
    return g;
}

CountingGrid transform_grid(const CountingGrid& g, int transform) {
    if (transform < 0 || transform > 7) throw GeometryError("transform must be in 0..7");
    const bool transpose = transform & 4;
    if (transpose && g.ex != g.ey)
        throw GeometryError("transpose symmetries need a square grid");
    CountingGrid out = g;
    for (int ix = 0; ix < g.ex; ++ix) {
        for (int iy = 0; iy < g.ey; ++iy) {
            int ax = ix, ay = iy;
            if (transform & 1) ax = g.ex - 1 - ax;
            if (transform & 2) ay = g.ey - 1 - ay;
            if (transpose) std::swap(ax, ay);
            const std::size_t dst = (static_cast<std::size_t>(ix) * g.ey + iy) * g.vocab;
            const std::size_t src = (static_cast<std::size_t>(ax) * g.ey + ay) * g.vocab;
            for (int z = 0; z < g.vocab; ++z) out.pi[dst + z] = g.pi[src + z];
        }
    }
    return out;
}

ReconstructionMetrics reconstruction_score(const CgModel& learned, const CgModel& truth,
                                           const Corpus& heldout) {
    if (learned.grid.vocab != truth.grid.vocab)
        throw DataError("learned and truth models disagree on vocabulary size");
    if (learned.grid.ex != truth.grid.ex || learned.grid.ey != truth.grid.ey)
        throw GeometryError("learned and truth grids must share an extent");
    if (!(learned.grid.window == truth.grid.window))
        throw GeometryError("learned and truth grids must share a window");

    ReconstructionMetrics metrics;
    if (heldout.size() > 0) {
        const Corpus bags = to_bags(heldout);
        double ll_learned = 0.0, ll_truth = 0.0;
        for (int i = 0; i < bags.size(); ++i) {
            const Bag bag = std::get<Bag>(bags.samples[static_cast<std::size_t>(i)].data);
            ll_learned += -free_energy(learned.grid, learned.prior, bag);
            ll_truth += -free_energy(truth.grid, truth.prior, bag);
        }
        metrics.heldout_ll_learned = ll_learned / bags.size();
        metrics.heldout_ll_truth = ll_truth / bags.size();
    }

    const int ex = truth.grid.ex, ey = truth.grid.ey, vocab = truth.grid.vocab;
    const int cells = ex * ey;
    const std::vector<double> h_truth = window_histograms(truth.grid);

    const bool allow_transpose =
        ex == ey && truth.grid.window.wx == truth.grid.window.wy;
    double best = std::numeric_limits<double>::infinity();
    for (int tr = 0; tr < 8; ++tr) {
        if ((tr & 4) && !allow_transpose) continue;
        const CountingGrid gt = transform_grid(learned.grid, tr);
        std::vector<double> logh = window_histograms(gt);
        for (double& v : logh) v = v > 0.0 ? std::log(v) : kNegInf;

        for (int dx = 0; dx < ex; ++dx) {
            for (int dy = 0; dy < ey; ++dy) {
                double total = 0.0;
                for (int kx = 0; kx < ex && total < best * cells; ++kx) {
                    const int sx = kx + dx < ex ? kx + dx : kx + dx - ex;
                    for (int ky = 0; ky < ey; ++ky) {
                        const int sy = ky + dy < ey ? ky + dy : ky + dy - ey;
                        const double* t = h_truth.data() +
                                          (static_cast<std::size_t>(kx) * ey + ky) * vocab;
                        const double* l = logh.data() +
                                          (static_cast<std::size_t>(sx) * ey + sy) * vocab;
                        for (int z = 0; z < vocab; ++z) {
                            if (t[z] <= 0.0) continue;
                            total += t[z] * (std::log(t[z]) - l[z]);
                        }
                    }
                }
                const double mean = total / cells;
                if (mean < best) {
                    best = mean;
                    metrics.best_transform = tr;
                    metrics.best_shift_x = dx;
                    metrics.best_shift_y = dy;
                }
            }
        }
    }
    metrics.kl_aligned = best;
    return metrics;
}

}  // namespace cg
