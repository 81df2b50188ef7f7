#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "test_helpers.hpp"
#include "vrfb/flowfields.hpp"

using namespace vrfb;

TEST_CASE("parallel raster: channel count follows the fit formula") {
    CaseConfig cfg = testutil::small_case(48, 48, 4, 4);
    Grid grid(cfg);
    ReferenceFieldSpec spec = reference_spec_from_config(ReferenceKind::Parallel, cfg);
    auto rho = generate_reference(spec, grid);
    // counting oracle: floor((W - width)/pitch) + 1 channels fit across W
    const int expect = static_cast<int>(std::floor((cfg.width - spec.channel_width) /
                                                   spec.channel_pitch)) + 1;
    CHECK(expect == 11);
    CHECK(count_y_channels(grid, rho, 0.5) == expect);
}

TEST_CASE("parallel is through-connected, interdigitated is dead-ended") {
    CaseConfig cfg = testutil::small_case(48, 48, 4, 4);
    Grid grid(cfg);
    auto par = generate_reference(reference_spec_from_config(ReferenceKind::Parallel, cfg), grid);
    auto intd =
        generate_reference(reference_spec_from_config(ReferenceKind::Interdigitated, cfg), grid);
    CHECK(through_connected(grid, par, 0.5));
    CHECK_FALSE(through_connected(grid, intd, 0.5));
    // the interdigitated field still has open fingers from both manifolds
    CHECK(count_y_channels(grid, intd, 0.5) == 11);
}

TEST_CASE("coarse grids: representable rasters stay correct, hopeless ones throw") {
    // 24 cells over 0.1 m still separates 3 mm channels at 9 mm pitch
    CaseConfig cfg = testutil::small_case(24, 24, 2, 2);
    Grid grid24(cfg);
    auto par = generate_reference(reference_spec_from_config(ReferenceKind::Parallel, cfg), grid24);
    CHECK(through_connected(grid24, par, 0.5));
    auto intd =
        generate_reference(reference_spec_from_config(ReferenceKind::Interdigitated, cfg), grid24);
    CHECK_FALSE(through_connected(grid24, intd, 0.5));

    // 16 cells cannot keep a rib between 9 mm-pitch channels
    CaseConfig coarse = testutil::small_case(16, 16, 2, 2);
    Grid grid16(coarse);
    CHECK_THROWS_AS(
        generate_reference(reference_spec_from_config(ReferenceKind::Parallel, coarse), grid16),
        std::invalid_argument);
}

TEST_CASE("footprint validation") {
    CaseConfig cfg = testutil::small_case(24, 24, 2, 2);
    Grid grid(cfg);
    ReferenceFieldSpec spec = reference_spec_from_config(ReferenceKind::Parallel, cfg);
    spec.channel_width = 0.2; // wider than the cell
    CHECK_THROWS_AS(generate_reference(spec, grid), std::invalid_argument);
    spec = reference_spec_from_config(ReferenceKind::Parallel, cfg);
    spec.manifold_width = 0.06; // manifolds would overlap
    CHECK_THROWS_AS(generate_reference(spec, grid), std::invalid_argument);
    spec = reference_spec_from_config(ReferenceKind::Parallel, cfg);
    spec.channel_pitch = spec.channel_width; // pitch must exceed width
    CHECK_THROWS_AS(generate_reference(spec, grid), std::invalid_argument);
}

TEST_CASE("performance report arithmetic and flow-rate targeting") {
    CaseConfig cfg = testutil::small_case(24, 24, 3, 2);
    Grid grid(cfg);
    auto rho = generate_reference(reference_spec_from_config(ReferenceKind::Parallel, cfg), grid);

    OperatingPoint op;
    op.current = 10.0;
    op.porosity = cfg.porosity;
    op.flow_rate = 1e-6;
    PerformanceReport rep = evaluate_design(grid, cfg, rho, op, "parallel");
    CHECK(rep.ok);
    CHECK(std::abs(rep.q - 1e-6) / 1e-6 < 5e-3);
    CHECK(rep.power_loss ==
          doctest::Approx(rep.polarization_loss + rep.pumping_loss).epsilon(1e-15));
    CHECK(rep.polarization_loss == doctest::Approx(10.0 * rep.mean_abs_eta).epsilon(1e-15));
    CHECK(rep.pumping_loss == doctest::Approx(rep.q * rep.dp).epsilon(1e-15));
    CHECK(rep.polarization_loss >= 0.0);
    CHECK(rep.pumping_loss >= 0.0);
}

TEST_CASE("pressure drop is proportional to flow rate") {
    CaseConfig cfg = testutil::small_case(24, 24, 3, 2);
    Grid grid(cfg);
    auto rho =
        generate_reference(reference_spec_from_config(ReferenceKind::Interdigitated, cfg), grid);
    OperatingPoint op;
    op.current = cfg.current;
    op.porosity = cfg.porosity;
    std::vector<double> qs{1e-6, 5e-6, 1.5e-5};
    std::vector<double> slopes;
    for (double q : qs) {
        op.flow_rate = q;
        PerformanceReport rep = evaluate_design(grid, cfg, rho, op, "interdigitated");
        slopes.push_back(rep.dp / rep.q);
    }
    for (double s : slopes) CHECK(s == doctest::Approx(slopes.front()).epsilon(0.01));
}

TEST_CASE("sweep: duplicates are bitwise identical, failures are contained") {
    CaseConfig cfg = testutil::small_case(24, 24, 2, 2);
    Grid grid(cfg);
    auto rho = generate_reference(reference_spec_from_config(ReferenceKind::Parallel, cfg), grid);
    std::vector<SweepDesign> designs{{"parallel", rho}, {"parallel", rho}};
    OperatingPoint good;
    good.current = cfg.current;
    good.porosity = cfg.porosity;
    good.flow_rate = 1e-6;
    OperatingPoint bad = good;
    bad.current = 1e9; // far beyond the transport limit
    auto reports = sweep(grid, cfg, designs, {good, bad});
    REQUIRE(reports.size() == 4);
    CHECK(reports[0].ok);
    CHECK_FALSE(reports[1].ok);
    CHECK(!reports[1].error.empty());
    CHECK(report_csv_row(reports[0]) == report_csv_row(reports[2]));
    CHECK_THROWS_AS(sweep(grid, cfg, {}, {good}), std::invalid_argument);
}

TEST_CASE("porosity override propagates to the transport properties") {
    CaseConfig cfg = testutil::small_case(24, 24, 2, 2);
    Grid grid(cfg);
    auto rho =
        generate_reference(reference_spec_from_config(ReferenceKind::Interdigitated, cfg), grid);
    OperatingPoint op;
    op.current = cfg.current;
    op.porosity = 0.68;
    op.flow_rate = 1e-6;
    PerformanceReport low = evaluate_design(grid, cfg, rho, op, "interdigitated");
    op.porosity = 0.929;
    PerformanceReport high = evaluate_design(grid, cfg, rho, op, "interdigitated");
    CHECK(low.ok);
    CHECK(high.ok);
    // lower porosity: lower permeability, higher pressure drop at matched Q
    CHECK(low.dp > high.dp);
}
