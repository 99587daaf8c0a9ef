#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "cg/plane.hpp"
#include "cg/rng.hpp"

namespace cg {

/// A bag of features: nonnegative real counts over a vocabulary of size Z.
struct Bag {
    std::vector<double> counts;

    int vocab() const { return static_cast<int>(counts.size()); }
    double total() const {
        double t = 0.0;
        for (double c : counts) t += c;
        return t;
    }
};

/// The counting grid: a field of normalized per-cell feature distributions
/// pi over an Ex x Ey torus, plus the window geometry used to average them
/// into bag-generating histograms. Storage is cell-major, feature-minor:
/// pi[cell*vocab + z], cells row-major.
struct CountingGrid {
    int ex = 0;
    int ey = 0;
    int vocab = 0;
    WindowSpec window;
    std::vector<double> pi;

    int cells() const { return ex * ey; }

    double pi_at(int cell, int z) const {
        return pi[static_cast<std::size_t>(cell) * vocab + z];
    }

    /// Copy of one feature's field.
    Plane slice(int z) const;
};

/// Shared prior P(l = k) over grid anchors, stored as log probabilities.
struct LocationPrior {
    int ex = 0;
    int ey = 0;
    std::vector<double> log_p;

    static LocationPrior uniform(int ex, int ey);
    int cells() const { return ex * ey; }
};

/// One sample's posterior q(l = k) over grid anchors, log domain.
struct LocationPosterior {
    int ex = 0;
    int ey = 0;
    std::vector<double> log_q;

    int cells() const { return ex * ey; }
    /// Cell with the largest posterior mass; ties resolve to the smallest
    /// cell index.
    int argmax_cell() const;
};

enum class PriorUpdate { counts, smoothed, fixed_uniform };

struct TrainConfig {
    /// Dirichlet pseudocounts. `eta` applies to every feature unless
    /// `eta_per_feature` is non-empty (then it must have length Z).
    double eta = 1e-2;
    std::vector<double> eta_per_feature;

    double tol = 1e-5;      ///< relative bound-change convergence threshold
    int max_iters = 200;
    int restarts = 3;
    std::uint64_t seed = 0;
    PriorUpdate prior_update = PriorUpdate::smoothed;
    double init_noise = 1e-2;
    int threads = 1;

    double eta_for(int z) const {
        return eta_per_feature.empty() ? eta : eta_per_feature[static_cast<std::size_t>(z)];
    }
};

struct FitReport {
    std::vector<double> bound_trace;  ///< winning restart, one entry per iteration
    bool converged = false;
    int chosen_restart = 0;
    int iterations_used = 0;
};

struct FitResult {
    CountingGrid grid;
    LocationPrior prior;
    std::vector<LocationPosterior> posteriors;
    FitReport report;
};

/// h[k*vocab + z] = window-averaged pi at anchor k; every row sums to 1.
std::vector<double> window_histograms(const CountingGrid& g);

/// log of window_histograms, with log(0) = -inf.
std::vector<double> log_window_histograms(const CountingGrid& g);

/// Exact E step: log q(k) = log P(k) + sum_z c_z log h[k,z], normalized by
/// log-sum-exp. Throws ModelError if every anchor scores -inf.
LocationPosterior e_step(const CountingGrid& g, const LocationPrior& prior, const Bag& bag);

/// E step over a whole corpus against one (grid, prior) snapshot; the
/// histograms are computed once and samples are scored in parallel.
std::vector<LocationPosterior> e_step_all(const CountingGrid& g, const LocationPrior& prior,
                                          std::span<const Bag> corpus, int threads = 1);

/// Smoothed multiplicative M step (pseudocounts eta; eta = 0 recovers the
/// unsmoothed update). Rows of the result are normalized and strictly
/// positive whenever eta > 0.
CountingGrid m_step(const CountingGrid& g, std::span<const Bag> corpus,
                    std::span<const LocationPosterior> posteriors, const TrainConfig& cfg);

/// P(k) proportional to sum_t q^t(k).
LocationPrior prior_update_counts(std::span<const LocationPosterior> posteriors);

/// P(k) proportional to the window-aggregated posterior mass: the box mask
/// of the model window slid over sum_t q^t, evaluated toroidally.
LocationPrior prior_update_smoothed(std::span<const LocationPosterior> posteriors, WindowSpec w);

/// Variational lower bound B = sum_t sum_k q(k) [log P(k) + sum_z c_z log
/// h[k,z] - log q(k)], with 0 log 0 = 0. Equals the exact data
/// log-likelihood when the posteriors come from e_step.
double bound(const CountingGrid& g, const LocationPrior& prior, std::span<const Bag> corpus,
             std::span<const LocationPosterior> posteriors);

/// -log sum_k P(k) exp(sum_z c_z log h[k,z]); the classification score.
double free_energy(const CountingGrid& g, const LocationPrior& prior, const Bag& bag);

/// Near-uniform symmetry-breaking initialization: pi[i,z] proportional to
/// 1/Z + noise * u with u ~ U(0,1) from the given generator.
CountingGrid init_grid(int ex, int ey, int vocab, WindowSpec w, const TrainConfig& cfg, Rng& rng);

/// Full EM fit of a plain counting grid (the restartable driver below with
/// the plain E/M hooks).
FitResult fit(std::span<const Bag> corpus, int ex, int ey, int vocab, WindowSpec w,
              const TrainConfig& cfg);

/// Hooks that let variant models reuse the EM driver. All spans of
/// posteriors are aligned with the corpus the hooks close over.
struct EmOps {
    /// E step over every sample under the given model snapshot.
    std::function<std::vector<LocationPosterior>(const CountingGrid&, const LocationPrior&)>
        e_step_all;
    /// M step given the posteriors of the current iteration.
    std::function<CountingGrid(const CountingGrid&, std::span<const LocationPosterior>)>
        m_step;
    /// The variant's bound for a fixed set of posteriors.
    std::function<double(const CountingGrid&, const LocationPrior&,
                         std::span<const LocationPosterior>)>
        bound;
};

/// Restartable EM driver: init, iterate E/M/prior/bound until the relative
/// bound change falls below cfg.tol, keep the restart with the best final
/// bound. One extra E pass refreshes the returned posteriors so they are
/// exact for the returned model (its bound is appended to the trace).
/// Throws ModelError on a non-finite bound (message carries the iteration).
FitResult run_em(int ex, int ey, int vocab, WindowSpec w, const EmOps& ops,
                 const TrainConfig& cfg);

}  // namespace cg
