#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cg/variants.hpp"

namespace cg {

enum class Representation { bags, sectioned, maps };

std::string_view to_string(Representation r);

/// A homogeneous collection of samples at one of the three fidelity levels.
/// Labels are optional but must be all-or-none for supervised use.
struct Corpus {
    Representation kind = Representation::bags;
    int vocab = 0;
    TessellationSpec tess;    ///< meaningful iff kind == sectioned
    int map_nx = 0, map_ny = 0;  ///< meaningful iff kind == maps

    struct Sample {
        std::string id;
        std::string label;  ///< empty string = unlabeled
        std::variant<Bag, SectionedBag, FeatureMap> data;
    };
    std::vector<Sample> samples;

    int size() const { return static_cast<int>(samples.size()); }
    bool labeled() const;

    const Bag& bag(int t) const { return std::get<Bag>(samples[static_cast<std::size_t>(t)].data); }
    const SectionedBag& sectioned(int t) const {
        return std::get<SectionedBag>(samples[static_cast<std::size_t>(t)].data);
    }
    const FeatureMap& map(int t) const {
        return std::get<FeatureMap>(samples[static_cast<std::size_t>(t)].data);
    }
};

/// Line-oriented text format (.cgc). Header:
///   #CGC v1 kind=<bags|sectioned|maps> Z=<int> [S=<Sx>x<Sy>] [N=<Nx>x<Ny>]
/// then one sample per line: id<TAB>label<TAB>payload with 1-based feature
/// indices (sparse z:count pairs; '|'-separated sectors; row-major map
/// indices). save(load(x)) is byte-identical for canonical files.
Corpus load_corpus(const std::string& path);
void save_corpus(const Corpus& corpus, const std::string& path);

/// Per-sector histograms of a feature map; sector (sx, sy) covers the
/// Nx/Sx x Ny/Sy block at (sx*Nx/Sx, sy*Ny/Sy).
SectionedBag tessellate_feature_map(const FeatureMap& fm, TessellationSpec s, int vocab);

/// Downgrades any representation to bags (pooling sectors / histogramming
/// maps). Ids and labels carry over.
Corpus to_bags(const Corpus& corpus);

/// Maps -> sectioned bags with the given tessellation; a sectioned corpus
/// passes through when the tessellation matches. Bags cannot be upgraded.
Corpus to_sectioned(const Corpus& corpus, TessellationSpec s);

/// Groups samples by label, preserving first-appearance order of labels.
std::vector<std::pair<std::string, Corpus>> split_by_label(const Corpus& corpus);

/// Representation-coercing dispatcher for fit_variant: feeds the corpus to
/// the kind's E/M pair, downgrading fidelity when needed.
VariantFitResult fit_corpus(VariantKind kind, const Corpus& corpus, const FitGeometry& geom,
                            const TrainConfig& cfg);

/// Patches sampled uniformly (non-wrapped) from a source layout, emitted at
/// all three fidelity levels plus the true anchors (for evaluation only).
struct LayoutCorpus {
    Corpus maps;
    Corpus sectioned;
    Corpus bags;
    std::vector<std::array<int, 2>> anchors;
};
LayoutCorpus generate_layout_corpus(const FeatureMap& layout, int vocab, int px, int py, int t,
                                    std::uint64_t seed, TessellationSpec tess);

/// Bags drawn from a counting grid: anchor ~ prior, then count_per_bag
/// tokens i.i.d. from the window histogram at the anchor.
struct GridCorpus {
    Corpus bags;
    std::vector<std::array<int, 2>> anchors;
};
GridCorpus generate_grid_corpus(const CountingGrid& g, const LocationPrior& prior, int t,
                                int count_per_bag, std::uint64_t seed);

/// One RGB color (0..255 channels) per feature.
using Palette = std::vector<std::array<double, 3>>;

/// Evenly spaced hues; deterministic in vocab.
Palette default_palette(int vocab);

struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;  ///< row-major, 3 bytes per pixel
};

/// Cell color = palette average weighted by pi, rounded half-up per channel.
Image render_grid(const CountingGrid& g, const Palette& palette);

/// Binary P6 pixmap, optionally nearest-neighbor upscaled.
void write_ppm(const Image& img, const std::string& path, int upscale = 1);

}  // namespace cg
