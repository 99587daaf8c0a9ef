#pragma once

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cg/model.hpp"

namespace cg {

/// Per-sector feature counts of one sample. Sector-major, feature-minor:
/// counts[(sx*Sy + sy)*vocab + z].
struct SectionedBag {
    TessellationSpec tess;
    int vocab = 0;
    std::vector<double> counts;

    double& at(int sx, int sy, int z) {
        return counts[static_cast<std::size_t>(sx * tess.sy + sy) * vocab + z];
    }
    double at(int sx, int sy, int z) const {
        return counts[static_cast<std::size_t>(sx * tess.sy + sy) * vocab + z];
    }
    /// Sums the sectors back into a single bag.
    Bag pooled() const;
};

/// Per-location feature indices of one sample, row-major, 0-based.
struct FeatureMap {
    int nx = 0;
    int ny = 0;
    std::vector<int> z;

    int at(int ix, int iy) const { return z[static_cast<std::size_t>(ix) * ny + iy]; }
    int pixels() const { return nx * ny; }
};

/// Histogram of a feature map over the whole extent.
Bag map_histogram(const FeatureMap& fm, int vocab);

enum class VariantKind { plain, tessellated, epitome, hybrid, mixture_unigrams, spatial_bow };

std::string_view to_string(VariantKind kind);
VariantKind variant_from_string(std::string_view name);

/// A fitted model of any variant kind. `tess` is 1x1 except for the
/// tessellated and spatial_bow kinds.
struct CgModel {
    VariantKind kind = VariantKind::plain;
    CountingGrid grid;
    TessellationSpec tess;
    LocationPrior prior;
};

/// log sector histograms: result[sector][k*vocab + z] = log of the average
/// of pi over sub-window `sector` of the window anchored at k.
std::vector<std::vector<double>> log_sector_histograms(const CountingGrid& g,
                                                       TessellationSpec s);

/// Tessellated E step: every sector's bag scores its own sub-window
/// histograms, all contributing to one shared mapping.
LocationPosterior e_step_tessellated(const CountingGrid& g, const LocationPrior& prior,
                                     const SectionedBag& sb);

/// Tessellated M step over section bags.
CountingGrid m_step_tessellated(const CountingGrid& g, std::span<const SectionedBag> corpus,
                                std::span<const LocationPosterior> posteriors,
                                const TrainConfig& cfg);

enum class EpitomePath { direct, transform };

/// Epitome E step: the feature at map offset s is scored against the grid
/// cell at anchor-plus-offset k+s (mod extent). The transform path computes
/// the same correlation with FFTs; both agree to ~1e-6.
LocationPosterior e_step_epitome(const CountingGrid& g, const LocationPrior& prior,
                                 const FeatureMap& fm,
                                 EpitomePath path = EpitomePath::direct);

/// Epitome M step: features are copied (not rearranged) under the mapping
/// posteriors onto a fresh grid of the given geometry.
CountingGrid m_step_epitome(int ex, int ey, int vocab, WindowSpec w,
                            std::span<const FeatureMap> corpus,
                            std::span<const LocationPosterior> posteriors,
                            const TrainConfig& cfg);

/// Bound / free energy for the non-plain likelihoods (the plain ones live
/// in model.hpp). Same ELBO shape, variant anchor scores.
double bound_tessellated(const CountingGrid& g, const LocationPrior& prior,
                         std::span<const SectionedBag> corpus,
                         std::span<const LocationPosterior> posteriors);
double bound_epitome(const CountingGrid& g, const LocationPrior& prior,
                     std::span<const FeatureMap> corpus,
                     std::span<const LocationPosterior> posteriors);
double free_energy_tessellated(const CountingGrid& g, const LocationPrior& prior,
                               const SectionedBag& sb);
double free_energy_epitome(const CountingGrid& g, const LocationPrior& prior,
                           const FeatureMap& fm);

/// Geometry request for fit_variant. Kinds with forced parameters
/// (mixture_unigrams: W=1x1; epitome/hybrid: W=N; spatial_bow: W=S) reject
/// conflicting explicit values. `vocab` is required for feature-map corpora
/// (maps do not carry Z); bag corpora must agree with it when set.
struct FitGeometry {
    int ex = 0;
    int ey = 0;
    int vocab = 0;
    std::optional<WindowSpec> window;
    std::optional<TessellationSpec> tess;
};

struct VariantFitResult {
    CgModel model;
    std::vector<LocationPosterior> posteriors;
    FitReport report;
};

/// Table-driven dispatch of the E/M pair per variant kind, running the
/// shared EM driver. Each overload accepts only the representations its
/// kinds consume.
VariantFitResult fit_variant(VariantKind kind, std::span<const Bag> corpus,
                             const FitGeometry& geom, const TrainConfig& cfg);
VariantFitResult fit_variant(VariantKind kind, std::span<const SectionedBag> corpus,
                             const FitGeometry& geom, const TrainConfig& cfg);
VariantFitResult fit_variant(VariantKind kind, std::span<const FeatureMap> corpus,
                             const FitGeometry& geom, const TrainConfig& cfg);

}  // namespace cg
