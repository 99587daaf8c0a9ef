#include "cg/variants.hpp"

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <memory>
#include <mutex>
#include <string>

#include "cg/errors.hpp"
#include "cg/numeric.hpp"
#include "cg/parallel.hpp"

namespace cg {

namespace {

void check_sectioned(const CountingGrid& g, const SectionedBag& sb) {
    if (sb.vocab != g.vocab) throw DataError("sectioned bag vocabulary does not match grid");
    check_tessellation(g.window, sb.tess);
    if (sb.counts.size() != static_cast<std::size_t>(sb.tess.sectors()) * sb.vocab)
        throw DataError("sectioned bag storage does not match its tessellation");
}

void check_map(const CountingGrid& g, const FeatureMap& fm) {
    if (fm.nx != g.window.wx || fm.ny != g.window.wy)
        throw GeometryError("feature map extent must equal the model window");
    if (fm.nx > g.ex || fm.ny > g.ey)
        throw GeometryError("feature map larger than the grid");
}

void check_map_features(const FeatureMap& fm, int vocab) {
    if (fm.z.size() != static_cast<std::size_t>(fm.pixels()))
        throw DataError("feature map storage does not match its extent");
    for (int v : fm.z)
        if (v < 0 || v >= vocab) throw DataError("feature index out of range");
}

void add_sectioned_scores(const std::vector<std::vector<double>>& logh_sec, int cells, int vocab,
                          const SectionedBag& sb, std::vector<double>& s) {
    // cell-major traversal with per-sector nonzero lists keeps the reads
    // streaming through each histogram row
    for (int sec = 0; sec < sb.tess.sectors(); ++sec) {
        std::vector<int> zs;
        std::vector<double> cs;
        for (int z = 0; z < vocab; ++z) {
            const double c = sb.counts[static_cast<std::size_t>(sec) * vocab + z];
            if (c == 0.0) continue;
            zs.push_back(z);
            cs.push_back(c);
        }
        if (zs.empty()) continue;
        const std::vector<double>& logh = logh_sec[static_cast<std::size_t>(sec)];
        for (int k = 0; k < cells; ++k) {
            const double* row = logh.data() + static_cast<std::size_t>(k) * vocab;
            double acc = 0.0;
            for (std::size_t j = 0; j < zs.size(); ++j) acc += cs[j] * row[zs[j]];
            s[static_cast<std::size_t>(k)] += acc;
        }
    }
}

void add_map_scores(const std::vector<double>& logpi, int ex, int ey, int vocab,
                    const FeatureMap& fm, std::vector<double>& s) {
    for (int kx = 0; kx < ex; ++kx) {
        for (int ky = 0; ky < ey; ++ky) {
            double acc = 0.0;
            for (int sx = 0; sx < fm.nx; ++sx) {
                const int ix = kx + sx < ex ? kx + sx : kx + sx - ex;
                for (int sy = 0; sy < fm.ny; ++sy) {
                    const int iy = ky + sy < ey ? ky + sy : ky + sy - ey;
                    acc += logpi[(static_cast<std::size_t>(ix) * ey + iy) * vocab + fm.at(sx, sy)];
                }
            }
            s[static_cast<std::size_t>(kx) * ey + ky] += acc;
        }
    }
}

LocationPosterior normalize_scores(int ex, int ey, std::vector<double> scores) {
    const double lse = log_sum_exp(scores);
    if (lse == kNegInf)
        throw ModelError("degenerate model: sample has zero likelihood at every anchor");
    for (double& v : scores) v -= lse;
    return LocationPosterior{ex, ey, std::move(scores)};
}

std::vector<double> log_pi(const CountingGrid& g) {
    std::vector<double> out = g.pi;
    for (double& v : out) v = v > 0.0 ? std::log(v) : kNegInf;
    return out;
}

double bound_given_scores(const LocationPrior& prior, const std::vector<double>& s,
                          const LocationPosterior& post) {
    double b = 0.0;
    for (int k = 0; k < post.cells(); ++k) {
        const double lq = post.log_q[static_cast<std::size_t>(k)];
        const double qv = std::exp(lq);
        if (qv == 0.0) continue;  // 0 log 0 := 0, also for underflowed mass
        b += qv * (prior.log_p[static_cast<std::size_t>(k)] + s[static_cast<std::size_t>(k)] - lq);
    }
    return b;
}

// FFTW planning is not thread-safe; execution of distinct plans is.
std::mutex& fftw_plan_mutex() {
    static std::mutex m;
    return m;
}

/// Circular cross-correlation corr[k] = sum_u a[u] * b[(k+u) mod extent].
Plane fft_cross_correlate(const Plane& a, const Plane& b) {
    const int ex = a.ex(), ey = a.ey();
    const int nc = ex * (ey / 2 + 1);
    double* ra = fftw_alloc_real(static_cast<std::size_t>(ex) * ey);
    double* rb = fftw_alloc_real(static_cast<std::size_t>(ex) * ey);
    fftw_complex* ca = fftw_alloc_complex(static_cast<std::size_t>(nc));
    fftw_complex* cb = fftw_alloc_complex(static_cast<std::size_t>(nc));
    for (int i = 0; i < ex * ey; ++i) {
        ra[i] = a[i];
        rb[i] = b[i];
    }
    fftw_plan pa, pb, pinv;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        pa = fftw_plan_dft_r2c_2d(ex, ey, ra, ca, FFTW_ESTIMATE);
        pb = fftw_plan_dft_r2c_2d(ex, ey, rb, cb, FFTW_ESTIMATE);
    }
    fftw_execute(pa);
    fftw_execute(pb);
    for (int i = 0; i < nc; ++i) {
        const std::complex<double> va(ca[i][0], ca[i][1]);
        const std::complex<double> vb(cb[i][0], cb[i][1]);
        const std::complex<double> prod = std::conj(va) * vb;
        ca[i][0] = prod.real();
        ca[i][1] = prod.imag();
    }
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        pinv = fftw_plan_dft_c2r_2d(ex, ey, ca, ra, FFTW_ESTIMATE);
    }
    fftw_execute(pinv);
    Plane out(ex, ey);
    const double scale = 1.0 / (static_cast<double>(ex) * ey);
    for (int i = 0; i < ex * ey; ++i) out[i] = ra[i] * scale;
    {
        std::lock_guard<std::mutex> lock(fftw_plan_mutex());
        fftw_destroy_plan(pa);
        fftw_destroy_plan(pb);
        fftw_destroy_plan(pinv);
    }
    fftw_free(ra);
    fftw_free(rb);
    fftw_free(ca);
    fftw_free(cb);
    return out;
}

}  // namespace

Bag SectionedBag::pooled() const {
    Bag bag{std::vector<double>(static_cast<std::size_t>(vocab), 0.0)};
    for (int sec = 0; sec < tess.sectors(); ++sec)
        for (int z = 0; z < vocab; ++z)
            bag.counts[static_cast<std::size_t>(z)] += counts[static_cast<std::size_t>(sec) * vocab + z];
    return bag;
}

Bag map_histogram(const FeatureMap& fm, int vocab) {
    check_map_features(fm, vocab);
    Bag bag{std::vector<double>(static_cast<std::size_t>(vocab), 0.0)};
    for (int v : fm.z) bag.counts[static_cast<std::size_t>(v)] += 1.0;
    return bag;
}

std::string_view to_string(VariantKind kind) {
    switch (kind) {
        case VariantKind::plain: return "plain";
        case VariantKind::tessellated: return "tessellated";
        case VariantKind::epitome: return "epitome";
        case VariantKind::hybrid: return "hybrid";
        case VariantKind::mixture_unigrams: return "mixture_unigrams";
        case VariantKind::spatial_bow: return "spatial_bow";
    }
    return "?";
}

VariantKind variant_from_string(std::string_view name) {
    if (name == "plain") return VariantKind::plain;
    if (name == "tessellated") return VariantKind::tessellated;
    if (name == "epitome") return VariantKind::epitome;
    if (name == "hybrid") return VariantKind::hybrid;
    if (name == "mixture_unigrams" || name == "mixture") return VariantKind::mixture_unigrams;
    if (name == "spatial_bow" || name == "spatial-bow") return VariantKind::spatial_bow;
    throw DataError("unknown variant kind: " + std::string(name));
}

std::vector<std::vector<double>> log_sector_histograms(const CountingGrid& g,
                                                       TessellationSpec s) {
    check_tessellation(g.window, s);
    const int cells = g.cells();
    const double inv_area =
        static_cast<double>(s.sectors()) / static_cast<double>(g.window.area());
    std::vector<std::vector<double>> out(
        static_cast<std::size_t>(s.sectors()),
        std::vector<double>(static_cast<std::size_t>(cells) * g.vocab));
    for (int z = 0; z < g.vocab; ++z) {
        const std::vector<Plane> sums = sector_window_sums(g.slice(z), g.window, s);
        for (int sec = 0; sec < s.sectors(); ++sec) {
            for (int k = 0; k < cells; ++k) {
                const double h = sums[static_cast<std::size_t>(sec)][k] * inv_area;
                out[static_cast<std::size_t>(sec)][static_cast<std::size_t>(k) * g.vocab + z] =
                    h > 0.0 ? std::log(h) : kNegInf;
            }
        }
    }
    return out;
}

LocationPosterior e_step_tessellated(const CountingGrid& g, const LocationPrior& prior,
                                     const SectionedBag& sb) {
    check_sectioned(g, sb);
    std::vector<double> scores = prior.log_p;
    add_sectioned_scores(log_sector_histograms(g, sb.tess), g.cells(), g.vocab, sb, scores);
    return normalize_scores(g.ex, g.ey, std::move(scores));
}

CountingGrid m_step_tessellated(const CountingGrid& g, std::span<const SectionedBag> corpus,
                                std::span<const LocationPosterior> posteriors,
                                const TrainConfig& cfg) {
    if (corpus.empty()) throw DataError("m_step: empty corpus");
    if (corpus.size() != posteriors.size())
        throw DataError("m_step: posteriors not aligned with corpus");
    const TessellationSpec tess = corpus[0].tess;
    for (const SectionedBag& sb : corpus) {
        check_sectioned(g, sb);
        if (!(sb.tess == tess)) throw DataError("m_step: mixed tessellations in corpus");
    }

    const int cells = g.cells();
    const int vocab = g.vocab;
    const int sectors = tess.sectors();
    const WindowSpec sub{g.window.wx / tess.sx, g.window.wy / tess.sy};
    const double inv_area = 1.0 / sub.area();

    // A[sec][k,z] = sum_t c^{t,sec}_z q^t(k)
    std::vector<std::vector<double>> A(
        static_cast<std::size_t>(sectors),
        std::vector<double>(static_cast<std::size_t>(cells) * vocab, 0.0));
    std::vector<double> q(static_cast<std::size_t>(cells));
    for (std::size_t t = 0; t < corpus.size(); ++t) {
        for (int k = 0; k < cells; ++k)
            q[static_cast<std::size_t>(k)] = std::exp(posteriors[t].log_q[static_cast<std::size_t>(k)]);
        for (int sec = 0; sec < sectors; ++sec) {
            std::vector<double>& acc = A[static_cast<std::size_t>(sec)];
            for (int z = 0; z < vocab; ++z) {
                const double c = corpus[t].counts[static_cast<std::size_t>(sec) * vocab + z];
                if (c == 0.0) continue;
                for (int k = 0; k < cells; ++k)
                    acc[static_cast<std::size_t>(k) * vocab + z] += c * q[static_cast<std::size_t>(k)];
            }
        }
    }

    // multiplier[i,z] = sum_sec sum_{k : i in W^sec_k} A[sec][k,z] / h^sec[k,z]
    std::vector<double> multiplier(static_cast<std::size_t>(cells) * vocab, 0.0);
    Plane field(g.ex, g.ey);
    for (int z = 0; z < vocab; ++z) {
        const std::vector<Plane> sums = sector_window_sums(g.slice(z), g.window, tess);
        for (int sx = 0; sx < tess.sx; ++sx) {
            for (int sy = 0; sy < tess.sy; ++sy) {
                const int sec = sx * tess.sy + sy;
                const std::vector<double>& acc = A[static_cast<std::size_t>(sec)];
                bool any = false;
                for (int k = 0; k < cells; ++k) {
                    const double a = acc[static_cast<std::size_t>(k) * vocab + z];
                    const double h = sums[static_cast<std::size_t>(sec)][k] * inv_area;
                    field[k] = a == 0.0 ? 0.0 : a / h;
                    any = any || a != 0.0;
                }
                if (!any) continue;
                const Plane gathered = cyclic_shift(toroidal_window_sum(field, sub),
                                                    1 - (sx + 1) * sub.wx, 1 - (sy + 1) * sub.wy);
                for (int k = 0; k < cells; ++k)
                    multiplier[static_cast<std::size_t>(k) * vocab + z] += std::max(0.0, gathered[k]);
            }
        }
    }

    CountingGrid out = g;
    for (int k = 0; k < cells; ++k) {
        double* row = out.pi.data() + static_cast<std::size_t>(k) * vocab;
        double total = 0.0;
        for (int z = 0; z < vocab; ++z) {
            row[z] = cfg.eta_for(z) +
                     g.pi[static_cast<std::size_t>(k) * vocab + z] *
                         multiplier[static_cast<std::size_t>(k) * vocab + z];
            total += row[z];
        }
        if (total > 0.0) {
            for (int z = 0; z < vocab; ++z) row[z] /= total;
        } else {
            for (int z = 0; z < vocab; ++z) row[z] = g.pi[static_cast<std::size_t>(k) * vocab + z];
        }
    }
    return out;
}

LocationPosterior e_step_epitome(const CountingGrid& g, const LocationPrior& prior,
                                 const FeatureMap& fm, EpitomePath path) {
    check_map(g, fm);
    check_map_features(fm, g.vocab);
    std::vector<double> scores = prior.log_p;
    if (path == EpitomePath::direct) {
        add_map_scores(log_pi(g), g.ex, g.ey, g.vocab, fm, scores);
        return normalize_scores(g.ex, g.ey, std::move(scores));
    }

    // transform path: sum over features of the indicator plane of z
    // cross-correlated with the log pi slice. log(0) is clamped to a large
    // negative finite value so the transforms stay finite; anchors that
    // truly have zero likelihood come out with vanishing posterior mass
    // either way.
    std::vector<char> present(static_cast<std::size_t>(g.vocab), 0);
    for (int v : fm.z) present[static_cast<std::size_t>(v)] = 1;
    Plane total(g.ex, g.ey);
    for (int z = 0; z < g.vocab; ++z) {
        if (!present[static_cast<std::size_t>(z)]) continue;
        Plane indicator(g.ex, g.ey);
        for (int sx = 0; sx < fm.nx; ++sx)
            for (int sy = 0; sy < fm.ny; ++sy)
                if (fm.at(sx, sy) == z) indicator.at(sx, sy) = 1.0;
        Plane logpi_z = g.slice(z);
        for (int k = 0; k < logpi_z.cells(); ++k)
            logpi_z[k] = logpi_z[k] > 0.0 ? std::log(logpi_z[k]) : -800.0;
        const Plane corr = fft_cross_correlate(indicator, logpi_z);
        for (int k = 0; k < total.cells(); ++k) total[k] += corr[k];
    }
    for (int k = 0; k < total.cells(); ++k) scores[static_cast<std::size_t>(k)] += total[k];
    return normalize_scores(g.ex, g.ey, std::move(scores));
}

CountingGrid m_step_epitome(int ex, int ey, int vocab, WindowSpec w,
                            std::span<const FeatureMap> corpus,
                            std::span<const LocationPosterior> posteriors,
                            const TrainConfig& cfg) {
    if (corpus.empty()) throw DataError("m_step: empty corpus");
    if (corpus.size() != posteriors.size())
        throw DataError("m_step: posteriors not aligned with corpus");

    CountingGrid out{ex, ey, vocab, w, {}};
    const int cells = ex * ey;
    out.pi.assign(static_cast<std::size_t>(cells) * vocab, 0.0);
    for (int k = 0; k < cells; ++k)
        for (int z = 0; z < vocab; ++z)
            out.pi[static_cast<std::size_t>(k) * vocab + z] = cfg.eta_for(z);

    for (std::size_t t = 0; t < corpus.size(); ++t) {
        const FeatureMap& fm = corpus[t];
        check_map_features(fm, vocab);
        if (fm.nx != w.wx || fm.ny != w.wy)
            throw GeometryError("feature map extent must equal the model window");
        const LocationPosterior& post = posteriors[t];
        for (int kx = 0; kx < ex; ++kx) {
            for (int ky = 0; ky < ey; ++ky) {
                const double lq = post.log_q[static_cast<std::size_t>(kx) * ey + ky];
                if (lq == kNegInf) continue;
                const double q = std::exp(lq);
                for (int sx = 0; sx < fm.nx; ++sx) {
                    const int ix = kx + sx < ex ? kx + sx : kx + sx - ex;
                    for (int sy = 0; sy < fm.ny; ++sy) {
                        const int iy = ky + sy < ey ? ky + sy : ky + sy - ey;
                        out.pi[(static_cast<std::size_t>(ix) * ey + iy) * vocab + fm.at(sx, sy)] += q;
                    }
                }
            }
        }
    }

    for (int k = 0; k < cells; ++k) {
        double* row = out.pi.data() + static_cast<std::size_t>(k) * vocab;
        double total = 0.0;
        for (int z = 0; z < vocab; ++z) total += row[z];
        if (total > 0.0) {
            for (int z = 0; z < vocab; ++z) row[z] /= total;
        } else {
            for (int z = 0; z < vocab; ++z) row[z] = 1.0 / vocab;
        }
    }
    return out;
}

double bound_tessellated(const CountingGrid& g, const LocationPrior& prior,
                         std::span<const SectionedBag> corpus,
                         std::span<const LocationPosterior> posteriors) {
    if (corpus.size() != posteriors.size())
        throw DataError("bound: posteriors not aligned with corpus");
    if (corpus.empty()) return 0.0;
    const auto logh_sec = log_sector_histograms(g, corpus[0].tess);
    double b = 0.0;
    std::vector<double> s(static_cast<std::size_t>(g.cells()));
    for (std::size_t t = 0; t < corpus.size(); ++t) {
        check_sectioned(g, corpus[t]);
        s.assign(s.size(), 0.0);
        add_sectioned_scores(logh_sec, g.cells(), g.vocab, corpus[t], s);
        b += bound_given_scores(prior, s, posteriors[t]);
    }
    return b;
}

double bound_epitome(const CountingGrid& g, const LocationPrior& prior,
                     std::span<const FeatureMap> corpus,
                     std::span<const LocationPosterior> posteriors) {
    if (corpus.size() != posteriors.size())
        throw DataError("bound: posteriors not aligned with corpus");
    const std::vector<double> logpi = log_pi(g);
    double b = 0.0;
    std::vector<double> s(static_cast<std::size_t>(g.cells()));
    for (std::size_t t = 0; t < corpus.size(); ++t) {
        check_map(g, corpus[t]);
        s.assign(s.size(), 0.0);
        add_map_scores(logpi, g.ex, g.ey, g.vocab, corpus[t], s);
        b += bound_given_scores(prior, s, posteriors[t]);
    }
    return b;
}

double free_energy_tessellated(const CountingGrid& g, const LocationPrior& prior,
                               const SectionedBag& sb) {
    check_sectioned(g, sb);
    std::vector<double> scores = prior.log_p;
    add_sectioned_scores(log_sector_histograms(g, sb.tess), g.cells(), g.vocab, sb, scores);
    return -log_sum_exp(scores);
}

double free_energy_epitome(const CountingGrid& g, const LocationPrior& prior,
                           const FeatureMap& fm) {
    check_map(g, fm);
    check_map_features(fm, g.vocab);
    std::vector<double> scores = prior.log_p;
    add_map_scores(log_pi(g), g.ex, g.ey, g.vocab, fm, scores);
    return -log_sum_exp(scores);
}

namespace {

WindowSpec resolve_forced_window(const FitGeometry& geom, WindowSpec forced,
                                 const char* reason) {
    if (geom.window && !(*geom.window == forced))
        throw GeometryError(std::string("window is fixed to ") + reason + " for this variant");
    return forced;
}

VariantFitResult finish(VariantKind kind, TessellationSpec tess, FitResult fit) {
    CgModel model{kind, std::move(fit.grid), tess, std::move(fit.prior)};
    return VariantFitResult{std::move(model), std::move(fit.posteriors), std::move(fit.report)};
}

}  // namespace

VariantFitResult fit_variant(VariantKind kind, std::span<const Bag> corpus,
                             const FitGeometry& geom, const TrainConfig& cfg) {
    if (kind != VariantKind::plain && kind != VariantKind::mixture_unigrams)
        throw DataError("variant " + std::string(to_string(kind)) +
                        " does not train on plain bags");
    if (corpus.empty()) throw DataError("fit: empty corpus");
    if (geom.vocab != 0 && geom.vocab != corpus[0].vocab())
        throw DataError("fit: corpus vocabulary does not match the requested one");
    WindowSpec w;
    if (kind == VariantKind::mixture_unigrams) {
        w = resolve_forced_window(geom, WindowSpec{1, 1}, "1x1");
    } else {
        if (!geom.window) throw GeometryError("plain variant needs an explicit window");
        w = *geom.window;
    }
    FitResult res = fit(corpus, geom.ex, geom.ey, corpus[0].vocab(), w, cfg);
    return finish(kind, TessellationSpec{1, 1}, std::move(res));
}

VariantFitResult fit_variant(VariantKind kind, std::span<const SectionedBag> corpus,
                             const FitGeometry& geom, const TrainConfig& cfg) {
    if (kind != VariantKind::tessellated && kind != VariantKind::spatial_bow)
        throw DataError("variant " + std::string(to_string(kind)) +
                        " does not train on sectioned bags");
    if (corpus.empty()) throw DataError("fit: empty corpus");
    const TessellationSpec tess = corpus[0].tess;
    for (const SectionedBag& sb : corpus)
        if (!(sb.tess == tess)) throw DataError("fit: mixed tessellations in corpus");
    if (geom.tess && !(*geom.tess == tess))
        throw GeometryError("requested tessellation does not match the corpus");

    WindowSpec w;
    if (kind == VariantKind::spatial_bow) {
        w = resolve_forced_window(geom, WindowSpec{tess.sx, tess.sy},
                                  "the tessellation (one cell per sector)");
    } else {
        if (!geom.window) throw GeometryError("tessellated variant needs an explicit window");
        w = *geom.window;
    }
    check_window(w, geom.ex, geom.ey);
    check_tessellation(w, tess);
    const int vocab = corpus[0].vocab;
    if (geom.vocab != 0 && geom.vocab != vocab)
        throw DataError("fit: corpus vocabulary does not match the requested one");

    EmOps ops;
    ops.e_step_all = [corpus, tess, vocab, &cfg](const CountingGrid& g,
                                                 const LocationPrior& prior) {
        const auto logh_sec = log_sector_histograms(g, tess);
        std::vector<LocationPosterior> out(corpus.size());
        parallel_chunks(static_cast<int>(corpus.size()), cfg.threads,
                        [&](int, int begin, int end) {
                            for (int t = begin; t < end; ++t) {
                                std::vector<double> scores = prior.log_p;
                                add_sectioned_scores(logh_sec, g.cells(), vocab,
                                                     corpus[static_cast<std::size_t>(t)], scores);
                                out[static_cast<std::size_t>(t)] =
                                    normalize_scores(g.ex, g.ey, std::move(scores));
                            }
                        });
        return out;
    };
    ops.m_step = [corpus, &cfg](const CountingGrid& g, std::span<const LocationPosterior> q) {
        return m_step_tessellated(g, corpus, q, cfg);
    };
    ops.bound = [corpus](const CountingGrid& g, const LocationPrior& prior,
                         std::span<const LocationPosterior> q) {
        return bound_tessellated(g, prior, corpus, q);
    };
    return finish(kind, tess, run_em(geom.ex, geom.ey, vocab, w, ops, cfg));
}

VariantFitResult fit_variant(VariantKind kind, std::span<const FeatureMap> corpus,
                             const FitGeometry& geom, const TrainConfig& cfg) {
    if (kind != VariantKind::epitome && kind != VariantKind::hybrid)
        throw DataError("variant " + std::string(to_string(kind)) +
                        " does not train on feature maps");
    if (corpus.empty()) throw DataError("fit: empty corpus");
    const int nx = corpus[0].nx, ny = corpus[0].ny;
    for (const FeatureMap& fm : corpus)
        if (fm.nx != nx || fm.ny != ny) throw DataError("fit: mixed map extents in corpus");
    const WindowSpec w = resolve_forced_window(geom, WindowSpec{nx, ny}, "the map extent");
    check_window(w, geom.ex, geom.ey);

    // maps do not carry Z; fall back to the tightest vocabulary when the
    // caller left it unset
    int vocab = geom.vocab;
    if (vocab == 0)
        for (const FeatureMap& fm : corpus)
            for (int v : fm.z) vocab = std::max(vocab, v + 1);
    for (const FeatureMap& fm : corpus) check_map_features(fm, vocab);

    EmOps ops;
    if (kind == VariantKind::epitome) {
        ops.e_step_all = [corpus, vocab, &cfg](const CountingGrid& g,
                                               const LocationPrior& prior) {
            const std::vector<double> logpi = log_pi(g);
            std::vector<LocationPosterior> out(corpus.size());
            parallel_chunks(static_cast<int>(corpus.size()), cfg.threads,
                            [&](int, int begin, int end) {
                                for (int t = begin; t < end; ++t) {
                                    std::vector<double> scores = prior.log_p;
                                    add_map_scores(logpi, g.ex, g.ey, vocab,
                                                   corpus[static_cast<std::size_t>(t)], scores);
                                    out[static_cast<std::size_t>(t)] =
                                        normalize_scores(g.ex, g.ey, std::move(scores));
                                }
                            });
            return out;
        };
        ops.bound = [corpus](const CountingGrid& g, const LocationPrior& prior,
                             std::span<const LocationPosterior> q) {
            return bound_epitome(g, prior, corpus, q);
        };
    } else {
        // hybrid: bag E step over pooled counts, epitome M step
        auto pooled = std::make_shared<std::vector<Bag>>();
        pooled->reserve(corpus.size());
        for (const FeatureMap& fm : corpus) pooled->push_back(map_histogram(fm, vocab));
        ops.e_step_all = [pooled, &cfg](const CountingGrid& g, const LocationPrior& prior) {
            return e_step_all(g, prior, *pooled, cfg.threads);
        };
        ops.bound = [pooled](const CountingGrid& g, const LocationPrior& prior,
                             std::span<const LocationPosterior> q) {
            return bound(g, prior, *pooled, q);
        };
    }
    ops.m_step = [corpus, geom, vocab, w, &cfg](const CountingGrid&,
                                                std::span<const LocationPosterior> q) {
        return m_step_epitome(geom.ex, geom.ey, vocab, w, corpus, q, cfg);
    };
    return finish(kind, TessellationSpec{1, 1}, run_em(geom.ex, geom.ey, vocab, w, ops, cfg));
}

}  // namespace cg
