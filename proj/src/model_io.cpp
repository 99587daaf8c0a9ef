#include "cg/model_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cg/errors.hpp"

namespace cg {

namespace {

constexpr char kMagic[4] = {'C', 'G', 'R', 'D'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

void put_f64(std::ostream& out, double v) {
    const std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((bits >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw DataError("truncated model file");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    in.read(reinterpret_cast<char*>(b), 8);
    if (!in) throw DataError("truncated model file");
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(bits);
}

int checked_dim(std::uint32_t v, const char* what) {
    if (v < 1 || v > 100000) throw DataError(std::string("implausible ") + what + " in model file");
    return static_cast<int>(v);
}

}  // namespace

void save_model(const CgModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write model file " + path);
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    put_u32(out, static_cast<std::uint32_t>(model.kind));
    put_u32(out, static_cast<std::uint32_t>(model.grid.ex));
    put_u32(out, static_cast<std::uint32_t>(model.grid.ey));
    put_u32(out, static_cast<std::uint32_t>(model.grid.vocab));
    put_u32(out, static_cast<std::uint32_t>(model.grid.window.wx));
    put_u32(out, static_cast<std::uint32_t>(model.grid.window.wy));
    put_u32(out, static_cast<std::uint32_t>(model.tess.sx));
    put_u32(out, static_cast<std::uint32_t>(model.tess.sy));
    for (double v : model.grid.pi) put_f64(out, v);
    for (double v : model.prior.log_p) put_f64(out, v);
    if (!out) throw DataError("failed writing model file " + path);
}

CgModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open model file " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0)
        throw DataError("not a counting-grid model file: " + path);
    const std::uint32_t version = get_u32(in);
    if (version != kVersion)
        throw DataError("unsupported model file version " + std::to_string(version));

    const std::uint32_t kind_raw = get_u32(in);
    if (kind_raw > static_cast<std::uint32_t>(VariantKind::spatial_bow))
        throw DataError("unknown variant kind in model file");

    CgModel model;
    model.kind = static_cast<VariantKind>(kind_raw);
    model.grid.ex = checked_dim(get_u32(in), "grid extent");
    model.grid.ey = checked_dim(get_u32(in), "grid extent");
    model.grid.vocab = checked_dim(get_u32(in), "vocabulary");
    model.grid.window.wx = checked_dim(get_u32(in), "window");
    model.grid.window.wy = checked_dim(get_u32(in), "window");
    model.tess.sx = checked_dim(get_u32(in), "tessellation");
    model.tess.sy = checked_dim(get_u32(in), "tessellation");
    check_window(model.grid.window, model.grid.ex, model.grid.ey);

    const std::size_t cells = static_cast<std::size_t>(model.grid.cells());
    model.grid.pi.resize(cells * static_cast<std::size_t>(model.grid.vocab));
    for (double& v : model.grid.pi) v = get_f64(in);
    model.prior.ex = model.grid.ex;
    model.prior.ey = model.grid.ey;
    model.prior.log_p.resize(cells);
    for (double& v : model.prior.log_p) v = get_f64(in);

    char extra;
    if (in.read(&extra, 1)) throw DataError("trailing bytes in model file " + path);
    return model;
}

void write_model_text_header(const CgModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write header file " + path);
    out << "CGRD v" << kVersion << '\n'
        << "kind " << to_string(model.kind) << '\n'
        << "extent " << model.grid.ex << ' ' << model.grid.ey << '\n'
        << "vocab " << model.grid.vocab << '\n'
        << "window " << model.grid.window.wx << ' ' << model.grid.window.wy << '\n'
        << "tess " << model.tess.sx << ' ' << model.tess.sy << '\n';
}

}  // namespace cg
