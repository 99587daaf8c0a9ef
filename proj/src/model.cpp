#include "cg/model.hpp"

#include <cmath>
#include <string>

#include "cg/errors.hpp"
#include "cg/numeric.hpp"
#include "cg/parallel.hpp"

namespace cg {

namespace {

void check_grid(const CountingGrid& g) {
    if (g.ex < 1 || g.ey < 1 || g.vocab < 1) throw GeometryError("empty counting grid");
    check_window(g.window, g.ex, g.ey);
    if (g.pi.size() != static_cast<std::size_t>(g.cells()) * g.vocab)
        throw GeometryError("pi storage does not match grid geometry");
}

void check_aligned(const CountingGrid& g, const LocationPrior& prior) {
    if (prior.ex != g.ex || prior.ey != g.ey)
        throw GeometryError("prior extent does not match grid");
}

void check_bag(const CountingGrid& g, const Bag& bag) {
    if (bag.vocab() != g.vocab) throw DataError("bag vocabulary does not match grid");
}

/// The nonzero entries of a bag, gathered once so the per-anchor loops can
/// stream through each histogram row instead of striding across columns.
struct SparseBag {
    std::vector<int> z;
    std::vector<double> c;

    explicit SparseBag(const Bag& bag) {
        for (int i = 0; i < bag.vocab(); ++i) {
            const double v = bag.counts[static_cast<std::size_t>(i)];
            if (v == 0.0) continue;
            z.push_back(i);
            c.push_back(v);
        }
    }
    std::size_t size() const { return z.size(); }
};

/// s[k] += sum_z c_z * logh[k, z] over the nonzero counts.
void add_bag_scores(const std::vector<double>& logh, int cells, int vocab, const SparseBag& bag,
                    std::vector<double>& s) {
    for (int k = 0; k < cells; ++k) {
        const double* row = logh.data() + static_cast<std::size_t>(k) * vocab;
        double acc = 0.0;
        for (std::size_t j = 0; j < bag.size(); ++j)
            acc += bag.c[j] * row[bag.z[j]];
        s[static_cast<std::size_t>(k)] += acc;
    }
}

void add_bag_scores(const std::vector<double>& logh, int cells, int vocab, const Bag& bag,
                    std::vector<double>& s) {
    add_bag_scores(logh, cells, vocab, SparseBag(bag), s);
}

LocationPosterior normalize_scores(int ex, int ey, std::vector<double> scores) {
    const double lse = log_sum_exp(scores);
    if (lse == kNegInf)
        throw ModelError("degenerate model: sample has zero likelihood at every anchor");
    for (double& v : scores) v -= lse;
    return LocationPosterior{ex, ey, std::move(scores)};
}

LocationPrior normalize_to_prior(const Plane& mass) {
    double total = 0.0;
    for (int k = 0; k < mass.cells(); ++k) total += mass[k];
    LocationPrior prior{mass.ex(), mass.ey(), std::vector<double>(static_cast<std::size_t>(mass.cells()))};
    for (int k = 0; k < mass.cells(); ++k)
        prior.log_p[static_cast<std::size_t>(k)] = std::log(mass[k] / total);
    return prior;
}

}  // namespace

Plane CountingGrid::slice(int z) const {
    Plane out(ex, ey);
    for (int k = 0; k < cells(); ++k) out[k] = pi[static_cast<std::size_t>(k) * vocab + z];
    return out;
}

LocationPrior LocationPrior::uniform(int ex, int ey) {
    const double lp = -std::log(static_cast<double>(ex) * ey);
    return LocationPrior{ex, ey, std::vector<double>(static_cast<std::size_t>(ex) * ey, lp)};
}

int LocationPosterior::argmax_cell() const {
    int best = 0;
    for (int k = 1; k < cells(); ++k)
        if (log_q[static_cast<std::size_t>(k)] > log_q[static_cast<std::size_t>(best)]) best = k;
    return best;
}

std::vector<double> window_histograms(const CountingGrid& g) {
    check_grid(g);
    const int cells = g.cells();
    const double inv_area = 1.0 / g.window.area();
    std::vector<double> h(static_cast<std::size_t>(cells) * g.vocab);
    for (int z = 0; z < g.vocab; ++z) {
        const Plane sums = toroidal_window_sum(g.slice(z), g.window);
        for (int k = 0; k < cells; ++k)
            h[static_cast<std::size_t>(k) * g.vocab + z] = sums[k] * inv_area;
    }
    return h;
}

std::vector<double> log_window_histograms(const CountingGrid& g) {
    std::vector<double> h = window_histograms(g);
    for (double& v : h) v = v > 0.0 ? std::log(v) : kNegInf;
    return h;
}

LocationPosterior e_step(const CountingGrid& g, const LocationPrior& prior, const Bag& bag) {
    check_aligned(g, prior);
    check_bag(g, bag);
    std::vector<double> scores = prior.log_p;
    add_bag_scores(log_window_histograms(g), g.cells(), g.vocab, bag, scores);
    return normalize_scores(g.ex, g.ey, std::move(scores));
}

std::vector<LocationPosterior> e_step_all(const CountingGrid& g, const LocationPrior& prior,
                                          std::span<const Bag> corpus, int threads) {
    check_aligned(g, prior);
    const std::vector<double> logh = log_window_histograms(g);
    const int cells = g.cells();
    std::vector<LocationPosterior> out(corpus.size());
    parallel_chunks(static_cast<int>(corpus.size()), threads, [&](int, int begin, int end) {
        for (int t = begin; t < end; ++t) {
            check_bag(g, corpus[static_cast<std::size_t>(t)]);
            std::vector<double> scores = prior.log_p;
            add_bag_scores(logh, cells, g.vocab, corpus[static_cast<std::size_t>(t)], scores);
            out[static_cast<std::size_t>(t)] = normalize_scores(g.ex, g.ey, std::move(scores));
        }
    });
    return out;
}

CountingGrid m_step(const CountingGrid& g, std::span<const Bag> corpus,
                    std::span<const LocationPosterior> posteriors, const TrainConfig& cfg) {
    check_grid(g);
    if (corpus.empty()) throw DataError("m_step: empty corpus");
    if (corpus.size() != posteriors.size())
        throw DataError("m_step: posteriors not aligned with corpus");

    const int cells = g.cells();
    const int vocab = g.vocab;
    const std::vector<double> h = window_histograms(g);

    // A[k,z] = sum_t c^t_z q^t(k); the division by the shared h comes after
    const int T = static_cast<int>(corpus.size());
    const int nchunks = chunk_count(T, cfg.threads);
    std::vector<std::vector<double>> partial(
        static_cast<std::size_t>(nchunks),
        std::vector<double>(static_cast<std::size_t>(cells) * vocab, 0.0));
    parallel_chunks(T, cfg.threads, [&](int chunk, int begin, int end) {
        std::vector<double>& acc = partial[static_cast<std::size_t>(chunk)];
        for (int t = begin; t < end; ++t) {
            check_bag(g, corpus[static_cast<std::size_t>(t)]);
            const SparseBag sparse(corpus[static_cast<std::size_t>(t)]);
            const LocationPosterior& post = posteriors[static_cast<std::size_t>(t)];
            for (int k = 0; k < cells; ++k) {
                const double q = std::exp(post.log_q[static_cast<std::size_t>(k)]);
                if (q == 0.0) continue;
                double* row = acc.data() + static_cast<std::size_t>(k) * vocab;
                for (std::size_t j = 0; j < sparse.size(); ++j)
                    row[sparse.z[j]] += sparse.c[j] * q;
            }
        }
    });
    std::vector<double>& A = partial[0];
    for (int chunk = 1; chunk < nchunks; ++chunk)
        for (std::size_t i = 0; i < A.size(); ++i) A[i] += partial[static_cast<std::size_t>(chunk)][i];

    CountingGrid out = g;
    Plane field(g.ex, g.ey);
    for (int z = 0; z < vocab; ++z) {
        bool any = false;
        for (int k = 0; k < cells; ++k) {
            const double a = A[static_cast<std::size_t>(k) * vocab + z];
            field[k] = a == 0.0 ? 0.0 : a / h[static_cast<std::size_t>(k) * vocab + z];
            any = any || a != 0.0;
        }
        const double eta = cfg.eta_for(z);
        if (!any) {
            for (int k = 0; k < cells; ++k) out.pi[static_cast<std::size_t>(k) * vocab + z] = eta;
            continue;
        }
        const Plane gathered = trailing_window_sum(field, g.window);
        // the prefix identity can cancel a sum of nonnegatives slightly
        // below zero; pi must stay a distribution
        for (int k = 0; k < cells; ++k)
            out.pi[static_cast<std::size_t>(k) * vocab + z] =
                eta + g.pi[static_cast<std::size_t>(k) * vocab + z] * std::max(0.0, gathered[k]);
    }

    for (int k = 0; k < cells; ++k) {
        double* row = out.pi.data() + static_cast<std::size_t>(k) * vocab;
        double total = 0.0;
        for (int z = 0; z < vocab; ++z) total += row[z];
        if (total > 0.0) {
            for (int z = 0; z < vocab; ++z) row[z] /= total;
        } else {
            // no pseudocounts and no mapped mass: keep the previous row
            for (int z = 0; z < vocab; ++z) row[z] = g.pi[static_cast<std::size_t>(k) * vocab + z];
        }
    }
    return out;
}

LocationPrior prior_update_counts(std::span<const LocationPosterior> posteriors) {
    if (posteriors.empty()) throw DataError("prior update: no posteriors");
    Plane mass(posteriors[0].ex, posteriors[0].ey);
    for (const LocationPosterior& post : posteriors)
        for (int k = 0; k < mass.cells(); ++k)
            mass[k] += std::exp(post.log_q[static_cast<std::size_t>(k)]);
    return normalize_to_prior(mass);
}

LocationPrior prior_update_smoothed(std::span<const LocationPosterior> posteriors, WindowSpec w) {
    if (posteriors.empty()) throw DataError("prior update: no posteriors");
    const int ex = posteriors[0].ex, ey = posteriors[0].ey;
    Plane mass(ex, ey);
    for (const LocationPosterior& post : posteriors)
        for (int k = 0; k < mass.cells(); ++k)
            mass[k] += std::exp(post.log_q[static_cast<std::size_t>(k)]);
    // direct accumulation: the four-corner prefix identity cancels tiny
    // posterior masses to zero (or below), which would zero prior cells
    // that still carry posterior mass. This runs once per EM iteration, so
    // the O(cells * W) loop is irrelevant to the training cost.
    Plane gathered(ex, ey);
    check_window(w, ex, ey);
    for (int kx = 0; kx < ex; ++kx)
        for (int ky = 0; ky < ey; ++ky) {
            double acc = 0.0;
            for (int dx = 0; dx < w.wx; ++dx) {
                const int ix = wrap_index(kx - dx, ex);
                for (int dy = 0; dy < w.wy; ++dy) acc += mass.at(ix, wrap_index(ky - dy, ey));
            }
            gathered.at(kx, ky) = acc;
        }
    return normalize_to_prior(gathered);
}

double bound(const CountingGrid& g, const LocationPrior& prior, std::span<const Bag> corpus,
             std::span<const LocationPosterior> posteriors) {
    check_aligned(g, prior);
    if (corpus.size() != posteriors.size())
        throw DataError("bound: posteriors not aligned with corpus");
    const int cells = g.cells();
    const std::vector<double> logh = log_window_histograms(g);

    double b = 0.0;
    std::vector<double> s(static_cast<std::size_t>(cells));
    for (std::size_t t = 0; t < corpus.size(); ++t) {
        check_bag(g, corpus[t]);
        s.assign(static_cast<std::size_t>(cells), 0.0);
        add_bag_scores(logh, cells, g.vocab, corpus[t], s);
        const LocationPosterior& post = posteriors[t];
        for (int k = 0; k < cells; ++k) {
            const double lq = post.log_q[static_cast<std::size_t>(k)];
            const double qv = std::exp(lq);
            if (qv == 0.0) continue;  // 0 log 0 := 0, also for underflowed mass
            b += qv * (prior.log_p[static_cast<std::size_t>(k)] + s[static_cast<std::size_t>(k)] - lq);
        }
    }
    return b;
}

double free_energy(const CountingGrid& g, const LocationPrior& prior, const Bag& bag) {
    check_aligned(g, prior);
    check_bag(g, bag);
    std::vector<double> scores = prior.log_p;
    add_bag_scores(log_window_histograms(g), g.cells(), g.vocab, bag, scores);
    return -log_sum_exp(scores);
}

CountingGrid init_grid(int ex, int ey, int vocab, WindowSpec w, const TrainConfig& cfg, Rng& rng) {
    check_window(w, ex, ey);
    CountingGrid g{ex, ey, vocab, w, {}};
    g.pi.resize(static_cast<std::size_t>(g.cells()) * vocab);
    const double base = 1.0 / vocab;
    for (int k = 0; k < g.cells(); ++k) {
        double* row = g.pi.data() + static_cast<std::size_t>(k) * vocab;
        double total = 0.0;
        for (int z = 0; z < vocab; ++z) {
            row[z] = base + cfg.init_noise * rng.uniform();
            total += row[z];
        }
        for (int z = 0; z < vocab; ++z) row[z] /= total;
    }
    return g;
}

FitResult run_em(int ex, int ey, int vocab, WindowSpec w, const EmOps& ops,
                 const TrainConfig& cfg) {
    check_window(w, ex, ey);
    if (cfg.max_iters < 1 || cfg.restarts < 1)
        throw DataError("train config: max_iters and restarts must be at least 1");

    FitResult best;
    double best_bound = kNegInf;
    for (int r = 0; r < cfg.restarts; ++r) {
        Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(r)));
        CountingGrid grid = init_grid(ex, ey, vocab, w, cfg, rng);
        LocationPrior prior = LocationPrior::uniform(ex, ey);

        FitReport report;
        report.chosen_restart = r;
        std::vector<LocationPosterior> posteriors;
        double prev = 0.0;
        bool have_prev = false;
        for (int iter = 1; iter <= cfg.max_iters; ++iter) {
            posteriors = ops.e_step_all(grid, prior);
            grid = ops.m_step(grid, posteriors);
            switch (cfg.prior_update) {
                case PriorUpdate::counts: prior = prior_update_counts(posteriors); break;
                case PriorUpdate::smoothed: prior = prior_update_smoothed(posteriors, w); break;
                case PriorUpdate::fixed_uniform: break;
            }
            const double b = ops.bound(grid, prior, posteriors);
            if (!std::isfinite(b))
                throw ModelError("non-finite bound at iteration " + std::to_string(iter));
            report.bound_trace.push_back(b);
            report.iterations_used = iter;
            if (have_prev && std::abs(b - prev) / (1.0 + std::abs(prev)) <= cfg.tol) {
                report.converged = true;
                break;
            }
            prev = b;
            have_prev = true;
        }

        // refresh so the returned posteriors are exact for the final model
        posteriors = ops.e_step_all(grid, prior);
        const double final_bound = ops.bound(grid, prior, posteriors);
        report.bound_trace.push_back(final_bound);

        if (final_bound > best_bound) {
            best_bound = final_bound;
            best = FitResult{std::move(grid), std::move(prior), std::move(posteriors),
                             std::move(report)};
        }
    }
    return best;
}

FitResult fit(std::span<const Bag> corpus, int ex, int ey, int vocab, WindowSpec w,
              const TrainConfig& cfg) {
    if (corpus.empty()) throw DataError("fit: empty corpus");
    for (const Bag& bag : corpus)
        if (bag.vocab() != vocab) throw DataError("fit: bag vocabulary mismatch");

    EmOps ops;
    ops.e_step_all = [corpus, &cfg](const CountingGrid& g, const LocationPrior& prior) {
        return e_step_all(g, prior, corpus, cfg.threads);
    };
    ops.m_step = [corpus, &cfg](const CountingGrid& g, std::span<const LocationPosterior> q) {
        return m_step(g, corpus, q, cfg);
    };
    ops.bound = [corpus](const CountingGrid& g, const LocationPrior& prior,
                         std::span<const LocationPosterior> q) {
        return bound(g, prior, corpus, q);
    };
    return run_em(ex, ey, vocab, w, ops, cfg);
}

}  // namespace cg
