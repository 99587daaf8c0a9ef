#include "cg/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cg/errors.hpp"
#include "cg/rng.hpp"

namespace cg {

namespace {

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = s.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(s.substr(start));
            return out;
        }
        out.push_back(s.substr(start, pos - start));
        start = pos + 1;
    }
}

[[noreturn]] void parse_fail(int line, const std::string& what) {
    throw DataError("line " + std::to_string(line) + ": " + what);
}

int parse_int(std::string_view tok, int line, const char* what) {
    int v = 0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size())
        parse_fail(line, std::string("bad ") + what + " '" + std::string(tok) + "'");
    return v;
}

double parse_count(std::string_view tok, int line) {
    double v = 0.0;
    const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc() || p != tok.data() + tok.size() || !std::isfinite(v) || v < 0.0)
        parse_fail(line, "bad count '" + std::string(tok) + "'");
    return v;
}

std::string format_double(double v) {
    char buf[40];
    const auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, p);
}

std::pair<int, int> parse_dims(std::string_view tok, int line, const char* what) {
    const auto parts = split(tok, 'x');
    if (parts.size() != 2) parse_fail(line, std::string("bad ") + what + " '" + std::string(tok) + "'");
    return {parse_int(parts[0], line, what), parse_int(parts[1], line, what)};
}

Bag parse_bag_payload(std::string_view payload, int vocab, int line) {
    Bag bag{std::vector<double>(static_cast<std::size_t>(vocab), 0.0)};
    if (payload.empty()) return bag;
    for (std::string_view tok : split(payload, ' ')) {
        if (tok.empty()) parse_fail(line, "empty token in payload");
        const std::size_t colon = tok.find(':');
        if (colon == std::string_view::npos) parse_fail(line, "expected z:count pair");
        const int z = parse_int(tok.substr(0, colon), line, "feature index");
        if (z < 1 || z > vocab) parse_fail(line, "feature index out of range");
        if (bag.counts[static_cast<std::size_t>(z - 1)] != 0.0)
            parse_fail(line, "duplicate feature index " + std::to_string(z));
        bag.counts[static_cast<std::size_t>(z - 1)] = parse_count(tok.substr(colon + 1), line);
    }
    return bag;
}

std::string write_bag_payload(const Bag& bag) {
    std::string out;
    for (int z = 0; z < bag.vocab(); ++z) {
        const double c = bag.counts[static_cast<std::size_t>(z)];
        if (c == 0.0) continue;
        if (!out.empty()) out += ' ';
        out += std::to_string(z + 1);
        out += ':';
        out += format_double(c);
    }
    return out;
}

void check_no_separator(const std::string& s, const char* what) {
    if (s.find('\t') != std::string::npos || s.find('\n') != std::string::npos)
        throw DataError(std::string(what) + " may not contain tabs or newlines");
}

}  // namespace

std::string_view to_string(Representation r) {
    switch (r) {
        case Representation::bags: return "bags";
        case Representation::sectioned: return "sectioned";
        case Representation::maps: return "maps";
    }
    return "?";
}

bool Corpus::labeled() const {
    if (samples.empty()) return false;
    for (const Sample& s : samples)
        if (s.label.empty()) return false;
    return true;
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open corpus file " + path);

    std::string header;
    if (!std::getline(in, header)) throw DataError("empty corpus file " + path);
    const auto tokens = split(header, ' ');
    if (tokens.size() < 2 || tokens[0] != "#CGC" || tokens[1] != "v1")
        parse_fail(1, "expected '#CGC v1' header");

    Corpus corpus;
    bool have_kind = false, have_vocab = false, have_tess = false, have_extent = false;
    for (std::size_t i = 2; i < tokens.size(); ++i) {
        const auto kv = split(tokens[i], '=');
        if (kv.size() != 2) parse_fail(1, "bad header token '" + std::string(tokens[i]) + "'");
        if (kv[0] == "kind") {
            if (kv[1] == "bags") corpus.kind = Representation::bags;
            else if (kv[1] == "sectioned") corpus.kind = Representation::sectioned;
            else if (kv[1] == "maps") corpus.kind = Representation::maps;
            else parse_fail(1, "unknown representation '" + std::string(kv[1]) + "'");
            have_kind = true;
        } else if (kv[0] == "Z") {
            corpus.vocab = parse_int(kv[1], 1, "vocabulary size");
            have_vocab = true;
        } else if (kv[0] == "S") {
            const auto [sx, sy] = parse_dims(kv[1], 1, "tessellation");
            corpus.tess = TessellationSpec{sx, sy};
            have_tess = true;
        } else if (kv[0] == "N") {
            const auto [nx, ny] = parse_dims(kv[1], 1, "map extent");
            corpus.map_nx = nx;
            corpus.map_ny = ny;
            have_extent = true;
        } else {
            parse_fail(1, "unknown header key '" + std::string(kv[0]) + "'");
        }
    }
    if (!have_kind || !have_vocab) parse_fail(1, "header must set kind and Z");
    if (corpus.vocab < 1) parse_fail(1, "Z must be positive");
    if (corpus.kind == Representation::sectioned &&
        (!have_tess || corpus.tess.sx < 1 || corpus.tess.sy < 1))
        parse_fail(1, "sectioned corpus needs S=<Sx>x<Sy>");
    if (corpus.kind == Representation::maps &&
        (!have_extent || corpus.map_nx < 1 || corpus.map_ny < 1))
        parse_fail(1, "maps corpus needs N=<Nx>x<Ny>");

    std::string line;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split(line, '\t');
        if (fields.size() != 3) parse_fail(lineno, "expected id<TAB>label<TAB>payload");
        Corpus::Sample sample;
        sample.id = std::string(fields[0]);
        sample.label = std::string(fields[1]);
        const std::string_view payload = fields[2];

        switch (corpus.kind) {
            case Representation::bags:
                sample.data = parse_bag_payload(payload, corpus.vocab, lineno);
                break;
            case Representation::sectioned: {
                const auto sector_fields = split(payload, '|');
                if (static_cast<int>(sector_fields.size()) != corpus.tess.sectors())
                    parse_fail(lineno, "expected " + std::to_string(corpus.tess.sectors()) +
                                           " '|'-separated sectors");
                SectionedBag sb{corpus.tess, corpus.vocab, {}};
                sb.counts.reserve(static_cast<std::size_t>(corpus.tess.sectors()) * corpus.vocab);
                for (const std::string_view sector : sector_fields) {
                    const Bag b = parse_bag_payload(sector, corpus.vocab, lineno);
                    sb.counts.insert(sb.counts.end(), b.counts.begin(), b.counts.end());
                }
                sample.data = std::move(sb);
                break;
            }
            case Representation::maps: {
                FeatureMap fm{corpus.map_nx, corpus.map_ny, {}};
                fm.z.reserve(static_cast<std::size_t>(fm.pixels()));
                for (std::string_view tok : split(payload, ' ')) {
                    const int z = parse_int(tok, lineno, "feature index");
                    if (z < 1 || z > corpus.vocab) parse_fail(lineno, "feature index out of range");
                    fm.z.push_back(z - 1);
                }
                if (static_cast<int>(fm.z.size()) != fm.pixels())
                    parse_fail(lineno, "expected " + std::to_string(fm.pixels()) + " indices");
                sample.data = std::move(fm);
                break;
            }
        }
        corpus.samples.push_back(std::move(sample));
    }
    return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path) {
    std::ostringstream out;
    out << "#CGC v1 kind=" << to_string(corpus.kind) << " Z=" << corpus.vocab;
    if (corpus.kind == Representation::sectioned)
        out << " S=" << corpus.tess.sx << 'x' << corpus.tess.sy;
    if (corpus.kind == Representation::maps)
        out << " N=" << corpus.map_nx << 'x' << corpus.map_ny;
    out << '\n';

    for (const Corpus::Sample& sample : corpus.samples) {
        check_no_separator(sample.id, "sample id");
        check_no_separator(sample.label, "label");
        out << sample.id << '\t' << sample.label << '\t';
        if (const Bag* bag = std::get_if<Bag>(&sample.data)) {
            out << write_bag_payload(*bag);
        } else if (const SectionedBag* sb = std::get_if<SectionedBag>(&sample.data)) {
            for (int sec = 0; sec < sb->tess.sectors(); ++sec) {
                if (sec > 0) out << '|';
                Bag b{std::vector<double>(sb->counts.begin() + static_cast<std::ptrdiff_t>(sec) * sb->vocab,
                                          sb->counts.begin() + static_cast<std::ptrdiff_t>(sec + 1) * sb->vocab)};
                out << write_bag_payload(b);
            }
        } else {
            const FeatureMap& fm = std::get<FeatureMap>(sample.data);
            for (std::size_t i = 0; i < fm.z.size(); ++i) {
                if (i > 0) out << ' ';
                out << fm.z[i] + 1;
            }
        }
        out << '\n';
    }

    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write corpus file " + path);
    const std::string s = out.str();
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

SectionedBag tessellate_feature_map(const FeatureMap& fm, TessellationSpec s, int vocab) {
    if (s.sx < 1 || s.sy < 1 || fm.nx % s.sx != 0 || fm.ny % s.sy != 0)
        throw GeometryError("tessellation does not divide the map extent");
    SectionedBag sb{s, vocab,
                    std::vector<double>(static_cast<std::size_t>(s.sectors()) * vocab, 0.0)};
    const int bx = fm.nx / s.sx, by = fm.ny / s.sy;
    for (int ix = 0; ix < fm.nx; ++ix) {
        const int sx = ix / bx;
        for (int iy = 0; iy < fm.ny; ++iy) {
            const int z = fm.at(ix, iy);
            if (z < 0 || z >= vocab) throw DataError("feature index out of range");
            sb.at(sx, iy / by, z) += 1.0;
        }
    }
    return sb;
}

Corpus to_bags(const Corpus& corpus) {
    Corpus out;
    out.kind = Representation::bags;
    out.vocab = corpus.vocab;
    out.samples.reserve(corpus.samples.size());
    for (const Corpus::Sample& s : corpus.samples) {
        Corpus::Sample copy{s.id, s.label, Bag{}};
        if (const Bag* bag = std::get_if<Bag>(&s.data)) copy.data = *bag;
        else if (const SectionedBag* sb = std::get_if<SectionedBag>(&s.data)) copy.data = sb->pooled();
        else copy.data = map_histogram(std::get<FeatureMap>(s.data), corpus.vocab);
        out.samples.push_back(std::move(copy));
    }
    return out;
}

Corpus to_sectioned(const Corpus& corpus, TessellationSpec s) {
    if (corpus.kind == Representation::bags)
        throw DataError("bags cannot be upgraded to sectioned bags");
    if (corpus.kind == Representation::sectioned) {
        if (!(corpus.tess == s))
            throw DataError("corpus is sectioned with a different tessellation");
        return corpus;
    }
    Corpus out;
    out.kind = Representation::sectioned;
    out.vocab = corpus.vocab;
    out.tess = s;
    out.samples.reserve(corpus.samples.size());
    for (const Corpus::Sample& smp : corpus.samples)
        out.samples.push_back(Corpus::Sample{
            smp.id, smp.label, tessellate_feature_map(std::get<FeatureMap>(smp.data), s, corpus.vocab)});
    return out;
}

std::vector<std::pair<std::string, Corpus>> split_by_label(const Corpus& corpus) {
    if (!corpus.labeled()) throw DataError("corpus is not fully labeled");
    std::vector<std::pair<std::string, Corpus>> out;
    for (const Corpus::Sample& s : corpus.samples) {
        auto it = std::find_if(out.begin(), out.end(),
                               [&](const auto& p) { return p.first == s.label; });
        if (it == out.end()) {
            Corpus sub;
            sub.kind = corpus.kind;
            sub.vocab = corpus.vocab;
            sub.tess = corpus.tess;
            sub.map_nx = corpus.map_nx;
            sub.map_ny = corpus.map_ny;
            out.emplace_back(s.label, std::move(sub));
            it = out.end() - 1;
        }
        it->second.samples.push_back(s);
    }
    return out;
}

VariantFitResult fit_corpus(VariantKind kind, const Corpus& corpus, const FitGeometry& geom,
                            const TrainConfig& cfg) {
    if (geom.vocab != 0 && geom.vocab != corpus.vocab)
        throw DataError("corpus vocabulary does not match the requested one");
    FitGeometry g = geom;
    g.vocab = corpus.vocab;

    switch (kind) {
        case VariantKind::plain:
        case VariantKind::mixture_unigrams: {
            const Corpus pooled = to_bags(corpus);
            std::vector<Bag> bags;
            bags.reserve(pooled.samples.size());
            for (const Corpus::Sample& s : pooled.samples) bags.push_back(std::get<Bag>(s.data));
            return fit_variant(kind, std::span<const Bag>(bags), g, cfg);
        }
        case VariantKind::tessellated:
        case VariantKind::spatial_bow: {
            TessellationSpec tess;
            if (corpus.kind == Representation::sectioned) {
                tess = corpus.tess;
                if (g.tess && !(*g.tess == tess))
                    throw GeometryError("requested tessellation does not match the corpus");
            } else if (corpus.kind == Representation::maps) {
                if (!g.tess)
                    throw GeometryError("tessellating a map corpus needs an explicit tessellation");
                tess = *g.tess;
            } else {
                throw DataError("variant " + std::string(to_string(kind)) +
                                " needs sectioned bags or feature maps");
            }
            g.tess = tess;
            const Corpus sec = to_sectioned(corpus, tess);
            std::vector<SectionedBag> sbags;
            sbags.reserve(sec.samples.size());
            for (const Corpus::Sample& s : sec.samples)
                sbags.push_back(std::get<SectionedBag>(s.data));
            return fit_variant(kind, std::span<const SectionedBag>(sbags), g, cfg);
        }
        case VariantKind::epitome:
        case VariantKind::hybrid: {
            if (corpus.kind != Representation::maps)
                throw DataError("variant " + std::string(to_string(kind)) +
                                " needs feature maps");
            std::vector<FeatureMap> maps;
            maps.reserve(corpus.samples.size());
            for (const Corpus::Sample& s : corpus.samples)
                maps.push_back(std::get<FeatureMap>(s.data));
            return fit_variant(kind, std::span<const FeatureMap>(maps), g, cfg);
        }
    }
    throw DataError("unknown variant kind");
}

LayoutCorpus generate_layout_corpus(const FeatureMap& layout, int vocab, int px, int py, int t,
                                    std::uint64_t seed, TessellationSpec tess) {
    if (px < 1 || py < 1 || px > layout.nx || py > layout.ny)
        throw GeometryError("patch larger than the layout");
    if (t < 0) throw DataError("sample count must be nonnegative");
    for (int v : layout.z)
        if (v < 0 || v >= vocab) throw DataError("feature index out of range");

    LayoutCorpus out;
    out.maps.kind = Representation::maps;
    out.maps.vocab = vocab;
    out.maps.map_nx = px;
    out.maps.map_ny = py;

    Rng rng(seed);
    for (int i = 0; i < t; ++i) {
        const int ax = rng.below_int(layout.nx - px + 1);
        const int ay = rng.below_int(layout.ny - py + 1);
        out.anchors.push_back({ax, ay});
        FeatureMap patch{px, py, {}};
        patch.z.reserve(static_cast<std::size_t>(px) * py);
        for (int ix = 0; ix < px; ++ix)
            for (int iy = 0; iy < py; ++iy) patch.z.push_back(layout.at(ax + ix, ay + iy));
        char id[16];
        std::snprintf(id, sizeof(id), "p%04d", i);
        out.maps.samples.push_back(Corpus::Sample{id, "", std::move(patch)});
    }
    out.sectioned = to_sectioned(out.maps, tess);
    out.bags = to_bags(out.maps);
    return out;
}

GridCorpus generate_grid_corpus(const CountingGrid& g, const LocationPrior& prior, int t,
                                int count_per_bag, std::uint64_t seed) {
    if (count_per_bag < 0) throw DataError("count_per_bag must be nonnegative");
    const std::vector<double> h = window_histograms(g);
    std::vector<double> prior_lin(static_cast<std::size_t>(g.cells()));
    for (int k = 0; k < g.cells(); ++k)
        prior_lin[static_cast<std::size_t>(k)] = std::exp(prior.log_p[static_cast<std::size_t>(k)]);

    GridCorpus out;
    out.bags.kind = Representation::bags;
    out.bags.vocab = g.vocab;
    Rng rng(seed);
    for (int i = 0; i < t; ++i) {
        const int k = rng.categorical(prior_lin);
        out.anchors.push_back({k / g.ey, k % g.ey});
        Bag bag{std::vector<double>(static_cast<std::size_t>(g.vocab), 0.0)};
        const std::span<const double> row(h.data() + static_cast<std::size_t>(k) * g.vocab,
                                          static_cast<std::size_t>(g.vocab));
        for (int n = 0; n < count_per_bag; ++n)
            bag.counts[static_cast<std::size_t>(rng.categorical(row))] += 1.0;
        char id[16];
        std::snprintf(id, sizeof(id), "s%04d", i);
        out.bags.samples.push_back(Corpus::Sample{id, "", std::move(bag)});
    }
    return out;
}

Palette default_palette(int vocab) {
    Palette pal(static_cast<std::size_t>(vocab));
    for (int z = 0; z < vocab; ++z) {
        const double h = 360.0 * z / vocab;
        const double s = 0.72, v = 0.95;
        const double c = v * s;
        const double x = c * (1.0 - std::abs(std::fmod(h / 60.0, 2.0) - 1.0));
        const double m = v - c;
        double r = 0, gch = 0, b = 0;
        if (h < 60) { r = c; gch = x; }
        else if (h < 120) { r = x; gch = c; }
        else if (h < 180) { gch = c; b = x; }
        else if (h < 240) { gch = x; b = c; }
        else if (h < 300) { r = x; b = c; }
        else { r = c; b = x; }
        pal[static_cast<std::size_t>(z)] = {255.0 * (r + m), 255.0 * (gch + m), 255.0 * (b + m)};
    }
    return pal;
}

Image render_grid(const CountingGrid& g, const Palette& palette) {
    if (static_cast<int>(palette.size()) != g.vocab)
        throw DataError("palette length does not match the vocabulary");
    Image img;
    img.height = g.ex;
    img.width = g.ey;
    img.rgb.resize(static_cast<std::size_t>(g.cells()) * 3);
    for (int k = 0; k < g.cells(); ++k) {
        for (int ch = 0; ch < 3; ++ch) {
            double acc = 0.0;
            for (int z = 0; z < g.vocab; ++z)
                acc += g.pi[static_cast<std::size_t>(k) * g.vocab + z] *
                       palette[static_cast<std::size_t>(z)][static_cast<std::size_t>(ch)];
            const double rounded = std::floor(acc + 0.5);  // round half-up
            img.rgb[static_cast<std::size_t>(k) * 3 + static_cast<std::size_t>(ch)] =
                static_cast<std::uint8_t>(std::clamp(rounded, 0.0, 255.0));
        }
    }
    return img;
}

void write_ppm(const Image& img, const std::string& path, int upscale) {
    if (upscale < 1) throw DataError("upscale factor must be at least 1");
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write image file " + path);
    const int w = img.width * upscale, h = img.height * upscale;
    f << "P6\n" << w << ' ' << h << "\n255\n";
    std::vector<char> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
        const int sy = y / upscale;
        for (int x = 0; x < w; ++x) {
            const int sx = x / upscale;
            const std::size_t src = (static_cast<std::size_t>(sy) * img.width + sx) * 3;
            for (int ch = 0; ch < 3; ++ch)
                row[static_cast<std::size_t>(x) * 3 + ch] = static_cast<char>(img.rgb[src + ch]);
        }
        f.write(row.data(), static_cast<std::streamsize>(row.size()));
    }
}

}  // namespace cg
