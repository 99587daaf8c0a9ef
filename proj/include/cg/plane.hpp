#pragma once

#include <vector>

#include "cg/errors.hpp"

namespace cg {

/// Window of Wx x Wy cells, anchored at its top-left corner. A window
/// anchored at k covers cells k .. k+W-1, wrapping toroidally.
struct WindowSpec {
    int wx = 1;
    int wy = 1;
    int area() const { return wx * wy; }
    bool operator==(const WindowSpec&) const = default;
};

/// Partition of a window (or image) into Sx x Sy sectors.
struct TessellationSpec {
    int sx = 1;
    int sy = 1;
    int sectors() const { return sx * sy; }
    bool operator==(const TessellationSpec&) const = default;
};

/// A real-valued field over an Ex x Ey toroidal grid. Row-major: the cell
/// (ix, iy) lives at index ix*Ey + iy.
class Plane {
public:
    Plane() = default;
    Plane(int ex, int ey, double fill = 0.0)
        : ex_(ex), ey_(ey), v_(static_cast<std::size_t>(ex) * static_cast<std::size_t>(ey), fill) {
        if (ex < 1 || ey < 1) throw GeometryError("plane extent must be at least 1x1");
    }

    int ex() const { return ex_; }
    int ey() const { return ey_; }
    int cells() const { return ex_ * ey_; }

    double& at(int ix, int iy) { return v_[static_cast<std::size_t>(ix) * ey_ + iy]; }
    double at(int ix, int iy) const { return v_[static_cast<std::size_t>(ix) * ey_ + iy]; }

    /// Access with indices wrapped modulo the extent.
    double wrapped(int ix, int iy) const {
        ix %= ex_;
        if (ix < 0) ix += ex_;
        iy %= ey_;
        if (iy < 0) iy += ey_;
        return at(ix, iy);
    }

    double& operator[](int cell) { return v_[static_cast<std::size_t>(cell)]; }
    double operator[](int cell) const { return v_[static_cast<std::size_t>(cell)]; }

    std::vector<double>& data() { return v_; }
    const std::vector<double>& data() const { return v_; }

    bool same_extent(const Plane& o) const { return ex_ == o.ex_ && ey_ == o.ey_; }

private:
    int ex_ = 0, ey_ = 0;
    std::vector<double> v_;
};

/// i mod n, mapped into [0, n).
inline int wrap_index(int i, int n) {
    i %= n;
    return i < 0 ? i + n : i;
}

/// Throws GeometryError unless 1 <= w <= extent on both axes.
void check_window(WindowSpec w, int ex, int ey);

/// Throws GeometryError unless Sx | Wx and Sy | Wy.
void check_tessellation(WindowSpec w, TessellationSpec s);

/// out[kx,ky] = sum of p over all (ix <= kx, iy <= ky). Same extent as p.
Plane cumulative_sum_2d(const Plane& p);

/// out[k] = sum of p over the Wx x Wy window anchored at k (top-left),
/// wrapping toroidally. O(N) via prefix sums over a wrap-padded copy.
Plane toroidal_window_sum(const Plane& p, WindowSpec w);

/// Per-sector windowed sums for a window tessellated into Sx x Sy sectors
/// of size (Wx/Sx, Wy/Sy). Sector (sx, sy), flattened as sx*Sy + sy, holds
/// at anchor k the sum over the sub-window anchored at k + (sx*Wx/Sx,
/// sy*Wy/Sy). Each sector plane is a cyclic shift of the sub-window sum
/// plane, so the whole family costs one window-sum pass.
std::vector<Plane> sector_window_sums(const Plane& p, WindowSpec w, TessellationSpec s);

/// out[i] = p[(i + d) mod extent].
Plane cyclic_shift(const Plane& p, int dx, int dy);

/// out[i] = sum of p over the window whose *bottom-right* corner is i,
/// i.e. over all anchors k with i inside the window at k.
Plane trailing_window_sum(const Plane& p, WindowSpec w);

}  // namespace cg
