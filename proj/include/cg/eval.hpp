#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cg/corpus.hpp"

namespace cg {

/// One fitted (grid, prior) per class, sharing kind, geometry and Z.
struct ClassifierModel {
    std::vector<std::string> labels;
    std::vector<CgModel> models;

    int classes() const { return static_cast<int>(labels.size()); }
};

/// Independent per-class fits with a shared config and seed.
ClassifierModel train_classifier(const std::vector<std::pair<std::string, Corpus>>& by_class,
                                 VariantKind kind, const FitGeometry& geom,
                                 const TrainConfig& cfg);

/// Free energy of one corpus sample under one model, coercing the sample's
/// representation to what the model kind consumes.
double sample_free_energy(const CgModel& model, const Corpus& corpus, int index);

/// Mapping posterior of one corpus sample under one model (same coercion).
LocationPosterior sample_posterior(const CgModel& model, const Corpus& corpus, int index);

struct Classification {
    int best = 0;  ///< argmin free energy; ties resolve to the first class
    std::vector<double> free_energies;
};
Classification classify(const ClassifierModel& model, const Corpus& corpus, int index);

/// kappa = Ex*Ey / (Wx*Wy), the number of non-overlapping windows.
double capacity(int ex, int ey, int wx, int wy);

/// The paper's complexity ladders for square grids and windows.
std::vector<int> default_grid_ladder();
std::vector<int> default_window_ladder(int max_size);

/// Square (E, W) pairs with W <= E and capacity within [1.5, T/2].
std::vector<std::pair<int, int>> admissible_configs(std::span<const int> grid_sizes,
                                                    std::span<const int> window_sizes, int t);

struct SweepRow {
    int grid_size = 0;
    int window_size = 0;
    double kappa = 0.0;
    double score = 0.0;  ///< mean accuracy (labeled) or mean held-out free energy
    bool supervised = false;
};

/// Cross-validated capacity sweep; rows come back best-first (highest
/// accuracy / lowest free energy). Fold of sample i is i mod folds.
std::vector<SweepRow> sweep(const Corpus& corpus, std::span<const int> grid_sizes,
                            std::span<const int> window_sizes, VariantKind kind,
                            const TrainConfig& cfg, int folds);

/// Class-level HMM: transition matrix plus the likelihood scale gamma that
/// balances observations against the transition prior.
struct TransitionModel {
    int classes = 0;
    std::vector<double> prob;  ///< row-major classes x classes
    double gamma = 1.0;

    double at(int from, int to) const {
        return prob[static_cast<std::size_t>(from) * classes + to];
    }
    static TransitionModel uniform(int classes, double gamma = 1.0);
    static TransitionModel identity(int classes, double gamma = 1.0);
};

/// Forward filtering over per-step class log-likelihoods (already
/// unscaled; gamma is applied inside). Uniform initial distribution; each
/// returned row is a normalized posterior.
std::vector<std::vector<double>> hmm_filter_loglik(
    const std::vector<std::vector<double>>& loglik, const TransitionModel& tm);

/// Forward filtering of a sample sequence, log-likelihood = -free energy.
std::vector<std::vector<double>> hmm_filter(const ClassifierModel& model,
                                            const TransitionModel& tm, const Corpus& sequence);

/// Supervised transition estimate: row-normalized bigram counts with
/// add-one smoothing.
TransitionModel estimate_transitions(const std::vector<std::vector<int>>& label_sequences,
                                     int classes, double gamma = 1.0);

struct BaumWelchResult {
    TransitionModel model;
    std::vector<double> loglik_trace;  ///< non-decreasing
    bool converged = false;
};

/// Unsupervised transition estimate: Baum-Welch over fixed per-step class
/// log-likelihoods, uniform initial distribution, until the relative
/// likelihood change drops below tol.
BaumWelchResult estimate_transitions_baum_welch(
    const std::vector<std::vector<std::vector<double>>>& loglik_sequences, int classes,
    double gamma = 1.0, double tol = 1e-6, int max_iters = 200);

/// Squared toroidal Euclidean distance between two cells.
int toroidal_distance2(int ex, int ey, int cell_a, int cell_b);

/// Labels test samples by the label of the nearest mapped training sample
/// (posterior argmax positions, toroidal distance; ties by smaller id).
std::vector<std::string> nearest_map_labels(const CgModel& model, const Corpus& train,
                                            std::span<const LocationPosterior> train_posteriors,
                                            const Corpus& test);

/// One-hot counting grid encoding a feature layout.
CountingGrid layout_to_grid(const FeatureMap& layout, int vocab, WindowSpec w);

/// Dihedral torus symmetry 0..7: bit 0 flips x, bit 1 flips y, bit 2
/// transposes (square grids only).
CountingGrid transform_grid(const CountingGrid& g, int transform);

struct ReconstructionMetrics {
    double heldout_ll_learned = 0.0;  ///< mean per-bag log-likelihood
    double heldout_ll_truth = 0.0;
    double kl_aligned = 0.0;  ///< best-aligned mean per-cell KL(truth h || learned h)
    int best_transform = 0;
    int best_shift_x = 0;
    int best_shift_y = 0;
};

/// Quantifies layout recovery: held-out bag likelihood under the learned
/// vs. the truth model, and the window-histogram KL minimized exhaustively
/// over all toroidal shifts and valid dihedral symmetries. Held-out samples
/// are pooled to bags so the two models are scored on the same likelihood.
ReconstructionMetrics reconstruction_score(const CgModel& learned, const CgModel& truth,
                                           const Corpus& heldout);

}  // namespace cg
