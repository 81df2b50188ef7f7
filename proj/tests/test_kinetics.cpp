#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "test_helpers.hpp"
#include "vrfb/flow.hpp"
#include "vrfb/kinetics.hpp"

using namespace vrfb;

TEST_CASE("Kozeny-Carman permeability") {
    CaseConfig cfg;
    // direct arithmetic: d^2 e^3 / (16 Kck (1-e)^2)
    const double expect = 1.76e-5 * 1.76e-5 * std::pow(0.929, 3) /
                          (16.0 * 4.28 * std::pow(1.0 - 0.929, 2));
    CHECK(cfg.permeability() == doctest::Approx(expect).epsilon(1e-14));
    CHECK(cfg.permeability() == doctest::Approx(7.19e-10).epsilon(2e-3));

    // monotone decay toward zero porosity
    double last = cfg.permeability();
    for (double e : {0.8, 0.5, 0.2, 0.05}) {
        CaseConfig c2 = cfg;
        c2.porosity = e;
        CHECK(c2.permeability() < last);
        last = c2.permeability();
    }
    CHECK(last > 0.0);

    // doubling the fiber diameter quadruples K
    CaseConfig c4 = cfg;
    c4.fiber_diameter *= 2.0;
    CHECK(c4.permeability() == doctest::Approx(4.0 * cfg.permeability()).epsilon(1e-14));

    CaseConfig bad = cfg;
    bad.porosity = 1.0;
    CHECK_THROWS_AS(bad.permeability(), std::invalid_argument);
}

TEST_CASE("fictitious inverse permeability") {
    CaseConfig cfg;
    const double amax = alpha_fic_max(cfg);
    CHECK(amax == doctest::Approx(5.0 * cfg.viscosity / cfg.permeability()).epsilon(1e-14));
    CHECK(alpha_fic(1.0, cfg) == doctest::Approx(0.0));
    CHECK(alpha_fic(0.0, cfg) == doctest::Approx(amax).epsilon(1e-14));
    CHECK(alpha_fic(0.5, cfg) == doctest::Approx(0.01 * 0.5 / 0.51 * amax).epsilon(1e-12));
    CHECK_THROWS_AS(alpha_fic(-0.01, cfg), std::invalid_argument);
    CHECK_THROWS_AS(alpha_fic(1.01, cfg), std::invalid_argument);

    // derivative vs central differences
    for (double rho : {0.1, 0.5, 0.9}) {
        const double h = 1e-7;
        const double fd = (alpha_fic(rho + h, cfg) - alpha_fic(rho - h, cfg)) / (2 * h);
        CHECK(alpha_fic_deriv(rho, cfg) == doctest::Approx(fd).epsilon(1e-7));
    }
}

TEST_CASE("mass transfer coefficient") {
    CaseConfig cfg;
    CHECK(mass_transfer_coeff(0.01, cfg) == doctest::Approx(2.5358e-5).epsilon(1e-4));
    CHECK(mass_transfer_coeff(1.0, cfg) == doctest::Approx(1.6e-4).epsilon(1e-14));
    // floored at zero speed, still positive
    const double floor_km = 1.6e-4 * std::pow(cfg.km_floor, 0.4);
    CHECK(mass_transfer_coeff(0.0, cfg) == doctest::Approx(floor_km).epsilon(1e-14));
    CHECK(mass_transfer_coeff(0.0, cfg) > 0.0);
    CHECK_THROWS_AS(mass_transfer_coeff(-1.0, cfg), std::invalid_argument);
}

TEST_CASE("open-circuit potential") {
    CaseConfig cfg;
    CHECK(open_circuit_potential(750.0, 750.0, cfg) == doctest::Approx(-0.255).epsilon(1e-14));
    const double rt_f = cfg.gas_constant * 298.0 / cfg.faraday;
    CHECK(rt_f == doctest::Approx(0.02568).epsilon(1e-3));
    CHECK(open_circuit_potential(100.0, 100.0 * std::exp(1.0), cfg) ==
          doctest::Approx(-0.255 + rt_f).epsilon(1e-12));
    // swapping concentrations negates the log term
    const double up = open_circuit_potential(500.0, 900.0, cfg) - cfg.u0;
    const double dn = open_circuit_potential(900.0, 500.0, cfg) - cfg.u0;
    CHECK(up == doctest::Approx(-dn).epsilon(1e-12));
    CHECK_THROWS_AS(open_circuit_potential(0.0, 750.0, cfg), std::invalid_argument);
}

TEST_CASE("surface concentrations: conservation identity on random inputs") {
    CaseConfig cfg;
    std::mt19937 rng(20240917);
    std::uniform_real_distribution<double> conc(1.0, 2000.0);
    std::uniform_real_distribution<double> eta(-0.3, 0.3);
    std::uniform_real_distribution<double> kmv(1e-6, 1e-3);
    for (int t = 0; t < 10000; ++t) {
        const double c2 = conc(rng), c3 = conc(rng);
        const auto s = surface_concentrations(c2, c3, eta(rng), kmv(rng), cfg);
        CHECK(s.c2s + s.c3s == doctest::Approx(c2 + c3).epsilon(1e-13));
        CHECK(s.c2s >= 0.0);
        CHECK(s.c3s >= 0.0);
    }
}

TEST_CASE("surface concentrations: limits") {
    CaseConfig cfg;
    // k/km -> 0: surface equals bulk
    const auto s0 = surface_concentrations(600.0, 900.0, 0.05, 1.0e3, cfg);
    CHECK(s0.c2s == doctest::Approx(600.0).epsilon(1e-9));
    CHECK(s0.c3s == doctest::Approx(900.0).epsilon(1e-9));
    // symmetric fixed point at eta = 0 and equal concentrations
    const double km = mass_transfer_coeff(0.01, cfg);
    const auto s1 = surface_concentrations(750.0, 750.0, 0.0, km, cfg);
    CHECK(s1.mbar == doctest::Approx(cfg.rate_constant / km).epsilon(1e-12));
    CHECK(s1.pbar == doctest::Approx(cfg.rate_constant / km).epsilon(1e-12));
    CHECK(s1.c2s == doctest::Approx(750.0).epsilon(1e-12));
    CHECK(s1.c3s == doctest::Approx(750.0).epsilon(1e-12));
    CHECK_THROWS_AS(surface_concentrations(-1.0, 750.0, 0.0, km, cfg), std::invalid_argument);
    CHECK_THROWS_AS(surface_concentrations(750.0, 750.0, 0.0, 0.0, cfg), std::invalid_argument);
}

TEST_CASE("Butler-Volmer") {
    CaseConfig cfg;
    // exchange current at the reference concentrations, a F k c
    CHECK(exchange_current_density(750.0, 750.0, cfg) ==
          doctest::Approx(1.62e4 * 96485.0 * 1.7e-7 * 750.0).epsilon(1e-12));
    CHECK(exchange_current_density(750.0, 750.0, cfg) == doctest::Approx(1.993e5).epsilon(1e-3));
    // zero overpotential with surface = bulk gives zero current
    CHECK(butler_volmer(750.0, 750.0, 750.0, 750.0, 0.0, cfg) == doctest::Approx(0.0));
    // charging direction: eta < 0 with equal ratios gives positive j
    CHECK(butler_volmer(750.0, 750.0, 750.0, 750.0, -0.05, cfg) > 0.0);
    CHECK(butler_volmer(750.0, 750.0, 750.0, 750.0, +0.05, cfg) < 0.0);
    CHECK_THROWS_AS(butler_volmer(0.0, 750.0, 700.0, 800.0, 0.0, cfg), std::invalid_argument);
}

TEST_CASE("full closure: j strictly decreasing in eta, bounded by mass transfer") {
    CaseConfig cfg;
    const double km = mass_transfer_coeff(0.01, cfg);
    double last = std::numeric_limits<double>::infinity();
    for (double eta = -0.25; eta <= 0.25; eta += 0.01) {
        const auto s = surface_concentrations(750.0, 750.0, eta, km, cfg);
        const double j = butler_volmer(750.0, 750.0, s.c2s, s.c3s, eta, cfg);
        CHECK(j < last);
        last = j;
    }
    // deep cathodic limit approaches a F k_m c3
    const auto skin = surface_concentrations(750.0, 750.0, -0.5, km, cfg);
    const double jlim = butler_volmer(750.0, 750.0, skin.c2s, skin.c3s, -0.5, cfg);
    CHECK(jlim == doctest::Approx(cfg.specific_area * cfg.faraday * km * 750.0).epsilon(1e-2));
}

TEST_CASE("clamped exponential reports saturation") {
    CaseConfig cfg;
    bool hit = false;
    const double km = mass_transfer_coeff(0.01, cfg);
    (void)surface_concentrations(750.0, 750.0, -5.0, km, cfg, &hit);
    CHECK(hit);
}

TEST_CASE("effective transport properties") {
    CaseConfig cfg;
    const double br = std::pow(cfg.porosity, 1.5);
    CHECK(effective_diffusivity(cfg.diff_v2, Region::Electrode, cfg) ==
          doctest::Approx(br * cfg.diff_v2).epsilon(1e-14));
    CHECK(effective_diffusivity(cfg.diff_v2, Region::DesignLayer, cfg) ==
          doctest::Approx(cfg.diff_v2).epsilon(1e-14));
    CHECK(effective_sigma_s(cfg) ==
          doctest::Approx(std::pow(1.0 - cfg.porosity, 1.5) * cfg.sigma_s).epsilon(1e-14));
}

TEST_CASE("effective ionic conductivity") {
    CaseConfig cfg;
    cfg.kappa_mode = KappaMode::Constant;
    CHECK(effective_ionic_conductivity(750.0, 750.0, cfg) == doctest::Approx(7.8));

    cfg.kappa_mode = KappaMode::Computed;
    const double f2rt = cfg.faraday * cfg.faraday / (cfg.gas_constant * cfg.temperature);
    const double deff = std::pow(cfg.porosity, 1.5) * 2.4e-4;
    const double expect = f2rt * (4.0 * deff * 750.0 + 9.0 * deff * 750.0);
    CHECK(effective_ionic_conductivity(750.0, 750.0, cfg) == doctest::Approx(expect).epsilon(1e-12));
    // linearity in the concentrations
    CHECK(effective_ionic_conductivity(1500.0, 1500.0, cfg) ==
          doctest::Approx(2.0 * expect).epsilon(1e-12));
    CHECK_THROWS_AS(effective_ionic_conductivity(-1.0, 750.0, cfg), std::invalid_argument);
}
