#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "test_helpers.hpp"
#include "vrfb/grid.hpp"

using namespace vrfb;

TEST_CASE("cell counts and region split") {
    // total cells = nx * ny * (nz_channel + nz_electrode), split evenly here
    Grid g(testutil::small_case(4, 4, 2, 2));
    CHECK(g.ncells() == 4 * 4 * (2 + 2));
    int electrode = 0, design = 0;
    for (int c = 0; c < g.ncells(); ++c)
        (g.region(c) == Region::Electrode ? electrode : design) += 1;
    CHECK(electrode == 32);
    CHECK(design == 32);
    CHECK(g.n_electrode_cells() == electrode);
    CHECK(g.n_design_cells() == design);
}

TEST_CASE("electrode volume equals L W t_e") {
    Grid g(testutil::small_case(7, 5, 3, 2));
    double v = 0.0;
    for (int c = 0; c < g.ncells(); ++c)
        if (g.region(c) == Region::Electrode) v += g.cell_volume(c);
    CHECK(v == doctest::Approx(0.1 * 0.1 * 3.0e-3).epsilon(1e-12));
    CHECK(v == doctest::Approx(3.0e-5).epsilon(1e-12));
}

TEST_CASE("boundary faces close the surface") {
    Grid g(testutil::small_case(6, 5, 2, 3));
    const double t_tot = g.electrode_thickness() + g.channel_thickness();
    const double expect =
        2.0 * (g.length() * g.width() + g.length() * t_tot + g.width() * t_tot);
    CHECK(g.boundary_area() == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("every boundary face has exactly one non-interior patch") {
    Grid g(testutil::small_case(5, 4, 2, 2));
    int inlet = 0, outlet = 0;
    for (int k = 0; k < g.nz(); ++k)
        for (int j = 0; j < g.ny(); ++j) {
            for (int i = 0; i <= g.nx(); ++i) {
                const Patch p = g.patch_fx(i, j, k);
                if (i == 0 || i == g.nx()) {
                    CHECK(p != Patch::Interior);
                    inlet += p == Patch::Inlet;
                    outlet += p == Patch::Outlet;
                } else {
                    CHECK(p == Patch::Interior);
                }
            }
        }
    CHECK(inlet > 0);
    CHECK(outlet > 0);
    CHECK(inlet == outlet);
    // pressure patches live on the design layer only (default placement)
    for (int k = 0; k < g.nz_electrode(); ++k)
        for (int j = 0; j < g.ny(); ++j) {
            CHECK(g.patch_fx(0, j, k) == Patch::SideWall);
            CHECK(g.patch_fx(g.nx(), j, k) == Patch::SideWall);
        }
    CHECK(g.patch_fz(0, 0, 0) == Patch::MembraneWall);
    CHECK(g.patch_fz(0, 0, g.nz()) == Patch::CollectorWall);
    CHECK(g.patch_fy(0, 0, 0) == Patch::SideWall);
    CHECK(g.patch_fy(0, g.ny(), 0) == Patch::SideWall);
}

TEST_CASE("full-height span opens the whole side face") {
    CaseConfig cfg = testutil::small_case(4, 4, 2, 2);
    cfg.inlet_span = InletSpan::FullHeight;
    cfg.inlet_width = cfg.width;
    Grid g(cfg);
    for (int k = 0; k < g.nz(); ++k)
        for (int j = 0; j < g.ny(); ++j) {
            CHECK(g.patch_fx(0, j, k) == Patch::Inlet);
            CHECK(g.patch_fx(g.nx(), j, k) == Patch::Outlet);
        }
}

TEST_CASE("construction is deterministic") {
    CaseConfig cfg = testutil::small_case(9, 7, 3, 2);
    Grid a(cfg), b(cfg);
    CHECK(a.band_j0() == b.band_j0());
    CHECK(a.band_j1() == b.band_j1());
    CHECK(a.hx() == b.hx());
    CHECK(a.dz(0) == b.dz(0));
}

TEST_CASE("invalid geometry is rejected") {
    CaseConfig cfg = testutil::small_case(0, 4, 2, 2);
    CHECK_THROWS_AS(Grid{cfg}, std::invalid_argument);
    cfg = testutil::small_case(4, 4, 2, 2);
    cfg.inlet_width = 0.2; // wider than the cell
    CHECK_THROWS_AS(Grid{cfg}, std::invalid_argument);
}

TEST_CASE("two-layer z spacing") {
    Grid g(testutil::small_case(4, 4, 6, 2));
    CHECK(g.dz(0) == doctest::Approx(3.0e-3 / 6));
    CHECK(g.dz(g.nz() - 1) == doctest::Approx(3.0e-3 / 2));
    CHECK_FALSE(g.uniform_z());
    CHECK(g.zc(0) == doctest::Approx(0.25e-3));
    Grid u(testutil::small_case(4, 4, 3, 3));
    CHECK(u.uniform_z());
}
