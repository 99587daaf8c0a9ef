#include "cg/plane.hpp"

#include <string>

namespace cg {

void check_window(WindowSpec w, int ex, int ey) {
    if (w.wx < 1 || w.wy < 1 || w.wx > ex || w.wy > ey)
        throw GeometryError("window " + std::to_string(w.wx) + "x" + std::to_string(w.wy) +
                            " does not fit extent " + std::to_string(ex) + "x" +
                            std::to_string(ey));
}

void check_tessellation(WindowSpec w, TessellationSpec s) {
    if (s.sx < 1 || s.sy < 1 || w.wx % s.sx != 0 || w.wy % s.sy != 0)
        throw GeometryError("tessellation " + std::to_string(s.sx) + "x" + std::to_string(s.sy) +
                            " does not divide window " + std::to_string(w.wx) + "x" +
                            std::to_string(w.wy));
}

Plane cumulative_sum_2d(const Plane& p) {
    Plane out = p;
    const int ex = p.ex(), ey = p.ey();
    // row pass then column pass
    for (int ix = 0; ix < ex; ++ix)
        for (int iy = 1; iy < ey; ++iy) out.at(ix, iy) += out.at(ix, iy - 1);
    for (int ix = 1; ix < ex; ++ix)
        for (int iy = 0; iy < ey; ++iy) out.at(ix, iy) += out.at(ix - 1, iy);
    return out;
}

Plane toroidal_window_sum(const Plane& p, WindowSpec w) {
    const int ex = p.ex(), ey = p.ey();
    check_window(w, ex, ey);
    if (w.wx == 1 && w.wy == 1) return p;

    // wrap-pad so every window of the torus is an ordinary window of the
    // padded plane, then use the four-corner identity on its prefix sums
    const int px = ex + w.wx - 1, py = ey + w.wy - 1;
    Plane padded(px, py);
    for (int ix = 0; ix < px; ++ix) {
        const int sx = ix % ex;
        for (int iy = 0; iy < py; ++iy) padded.at(ix, iy) = p.at(sx, iy % ey);
    }
    Plane ps = cumulative_sum_2d(padded);

    auto corner = [&](int ix, int iy) -> double {
        if (ix < 0 || iy < 0) return 0.0;
        return ps.at(ix, iy);
    };

    Plane out(ex, ey);
    for (int kx = 0; kx < ex; ++kx) {
        for (int ky = 0; ky < ey; ++ky) {
            const int hx = kx + w.wx - 1, hy = ky + w.wy - 1;
            out.at(kx, ky) = corner(hx, hy) - corner(kx - 1, hy) - corner(hx, ky - 1) +
                             corner(kx - 1, ky - 1);
        }
    }
    return out;
}

std::vector<Plane> sector_window_sums(const Plane& p, WindowSpec w, TessellationSpec s) {
    check_window(w, p.ex(), p.ey());
    check_tessellation(w, s);
    const WindowSpec sub{w.wx / s.sx, w.wy / s.sy};
    const Plane base = toroidal_window_sum(p, sub);

    std::vector<Plane> out;
    out.reserve(static_cast<std::size_t>(s.sectors()));
    for (int sx = 0; sx < s.sx; ++sx)
        for (int sy = 0; sy < s.sy; ++sy) out.push_back(cyclic_shift(base, sx * sub.wx, sy * sub.wy));
    return out;
}

Plane cyclic_shift(const Plane& p, int dx, int dy) {
    const int ex = p.ex(), ey = p.ey();
    dx = wrap_index(dx, ex);
    dy = wrap_index(dy, ey);
    if (dx == 0 && dy == 0) return p;
    Plane out(ex, ey);
    for (int ix = 0; ix < ex; ++ix) {
        const int sx = ix + dx < ex ? ix + dx : ix + dx - ex;
        for (int iy = 0; iy < ey; ++iy) {
            const int sy = iy + dy < ey ? iy + dy : iy + dy - ey;
            out.at(ix, iy) = p.at(sx, sy);
        }
    }
    return out;
}

Plane trailing_window_sum(const Plane& p, WindowSpec w) {
    return cyclic_shift(toroidal_window_sum(p, w), 1 - w.wx, 1 - w.wy);
}

}  // namespace cg
