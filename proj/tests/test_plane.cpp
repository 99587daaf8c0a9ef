#include <doctest.h>

#include "cg/plane.hpp"
#include "cg/rng.hpp"
#include "support/oracles.hpp"

using namespace cg;

namespace {

Plane random_plane(Rng& rng, int ex, int ey) {
    Plane p(ex, ey);
    for (int k = 0; k < p.cells(); ++k) p[k] = rng.uniform(-1.0, 1.0);
    return p;
}

}  // namespace

TEST_CASE("cumulative_sum_2d on all-zero and all-one planes") {
    Plane zeros(3, 3);
    const Plane zcum = cumulative_sum_2d(zeros);
    for (int k = 0; k < 9; ++k) CHECK(zcum[k] == 0.0);

    Plane ones(2, 2, 1.0);
    const Plane ocum = cumulative_sum_2d(ones);
    CHECK(ocum.at(0, 0) == 1.0);
    CHECK(ocum.at(0, 1) == 2.0);
    CHECK(ocum.at(1, 0) == 2.0);
    CHECK(ocum.at(1, 1) == 4.0);
}

TEST_CASE("cumulative_sum_2d matches the double-loop oracle") {
    Rng rng(11);
    const Plane p = random_plane(rng, 5, 7);
    const Plane got = cumulative_sum_2d(p);
    const Plane want = oracle::prefix_sum(p);
    CHECK(oracle::max_rel_err(got.data(), want.data()) <= 1e-12);
}

TEST_CASE("toroidal_window_sum identity and full-torus windows") {
    Rng rng(12);
    const Plane p = random_plane(rng, 4, 5);

    const Plane same = toroidal_window_sum(p, {1, 1});
    CHECK(same.data() == p.data());

    double total = 0.0;
    for (int k = 0; k < p.cells(); ++k) total += p[k];
    const Plane full = toroidal_window_sum(p, {4, 5});
    for (int k = 0; k < p.cells(); ++k) CHECK(full[k] == doctest::Approx(total).epsilon(1e-12));
}

TEST_CASE("toroidal_window_sum matches the wrapped brute-force loop") {
    Rng rng(13);
    const Plane p = random_plane(rng, 4, 4);
    const Plane got = toroidal_window_sum(p, {2, 3});
    const Plane want = oracle::window_sum(p, {2, 3});
    CHECK(oracle::max_rel_err(got.data(), want.data()) <= 1e-12);
}

TEST_CASE("toroidal_window_sum property sweep against the oracle") {
    Rng rng(14);
    for (int round = 0; round < 60; ++round) {
        const int ex = 1 + rng.below_int(8);
        const int ey = 1 + rng.below_int(8);
        const WindowSpec w{1 + rng.below_int(ex), 1 + rng.below_int(ey)};
        const Plane p = random_plane(rng, ex, ey);

        const Plane got = toroidal_window_sum(p, w);
        const Plane want = oracle::window_sum(p, w);
        CHECK(oracle::max_rel_err(got.data(), want.data()) <= 1e-12);

        // every cell is counted Wx*Wy times across all anchors
        double anchors_total = 0.0, plane_total = 0.0;
        for (int k = 0; k < p.cells(); ++k) {
            anchors_total += got[k];
            plane_total += p[k];
        }
        CHECK(anchors_total == doctest::Approx(w.area() * plane_total).epsilon(1e-10));
    }
}

TEST_CASE("toroidal_window_sum rejects oversized windows") {
    const Plane p(3, 3);
    CHECK_THROWS_AS(toroidal_window_sum(p, {4, 1}), GeometryError);
    CHECK_THROWS_AS(toroidal_window_sum(p, {1, 9}), GeometryError);
    CHECK_THROWS_AS(toroidal_window_sum(p, {0, 1}), GeometryError);
}

TEST_CASE("sector_window_sums degenerate tessellation is bit-identical") {
    Rng rng(15);
    const Plane p = random_plane(rng, 6, 4);
    const WindowSpec w{3, 2};
    const auto sectors = sector_window_sums(p, w, {1, 1});
    REQUIRE(sectors.size() == 1);
    CHECK(sectors[0].data() == toroidal_window_sum(p, w).data());
}

TEST_CASE("sector_window_sums with unit sectors are cyclic shifts of the plane") {
    Rng rng(16);
    const Plane p = random_plane(rng, 5, 5);
    const WindowSpec w{2, 3};
    const auto sectors = sector_window_sums(p, w, {2, 3});
    REQUIRE(static_cast<int>(sectors.size()) == 6);
    for (int sx = 0; sx < 2; ++sx)
        for (int sy = 0; sy < 3; ++sy) {
            const Plane& got = sectors[static_cast<std::size_t>(sx * 3 + sy)];
            for (int ix = 0; ix < 5; ++ix)
                for (int iy = 0; iy < 5; ++iy)
                    CHECK(got.at(ix, iy) == p.wrapped(ix + sx, iy + sy));
        }
}

TEST_CASE("sector_window_sums matches the per-sector brute force") {
    Rng rng(17);
    const Plane p = random_plane(rng, 6, 6);
    const WindowSpec w{4, 4};
    const TessellationSpec s{2, 2};
    const auto got = sector_window_sums(p, w, s);
    const auto want = oracle::sector_sums(p, w, s);
    REQUIRE(got.size() == want.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(oracle::max_rel_err(got[i].data(), want[i].data()) <= 1e-12);
}

TEST_CASE("sector_window_sums rejects non-divisible tessellations") {
    const Plane p(6, 6);
    CHECK_THROWS_AS(sector_window_sums(p, {4, 4}, {3, 2}), GeometryError);
    CHECK_THROWS_AS(sector_window_sums(p, {4, 4}, {2, 3}), GeometryError);
}

TEST_CASE("cyclic_shift wraps and composes") {
    Rng rng(18);
    const Plane p = random_plane(rng, 3, 4);
    CHECK(cyclic_shift(p, 3, 4).data() == p.data());
    CHECK(cyclic_shift(p, -3, -4).data() == p.data());
    // (1,2) then (2,2) is a full wrap on a 3x4 plane
    CHECK(cyclic_shift(cyclic_shift(p, 1, 2), 2, 2).data() == p.data());
}

TEST_CASE("trailing_window_sum gathers windows ending at each cell") {
    Rng rng(19);
    for (int round = 0; round < 20; ++round) {
        const int ex = 2 + rng.below_int(6);
        const int ey = 2 + rng.below_int(6);
        const WindowSpec w{1 + rng.below_int(ex), 1 + rng.below_int(ey)};
        const Plane p = random_plane(rng, ex, ey);
        const Plane got = trailing_window_sum(p, w);
        const Plane want = oracle::trailing_window_sum(p, w);
        CHECK(oracle::max_rel_err(got.data(), want.data()) <= 1e-12);
    }
}
