/// @file kinetics.hpp
/// @brief Per-cell electrochemical closures of the negative half-cell:
///        mass-transfer coefficient, Nernst potential, surface
///        concentrations, Butler-Volmer transfer current.
///
/// The closures are templated on the scalar type so the same code path
/// produces both the forward values (double) and exact partials
/// (Dual<5> in c2, c3, phi_s, phi_e, speed) for the coupled Jacobian.
/// Sign convention: j > 0 is the cathodic (charging) direction, the
/// reduction V3+ + e- -> V2+.

#pragma once

#include <algorithm>
#include <cmath>

#include "vrfb/config.hpp"
#include "vrfb/dual.hpp"
#include "vrfb/grid.hpp"

namespace vrfb {

/// exp with the argument clamped to +-clamp; derivative is zero beyond the
/// clamp, matching what the forward evaluation actually computes.
template <typename T>
T clamped_exp(const T& x, double clamp, bool* hit = nullptr) {
    const double xv = value_of(x);
    if (xv > clamp) {
        if (hit) *hit = true;
        return T(std::exp(clamp));
    }
    if (xv < -clamp) {
        if (hit) *hit = true;
        return T(std::exp(-clamp));
    }
    using std::exp;
    return exp(x);
}

/// Mass-transfer coefficient k_m = 1.6e-4 |u|^0.4, floored at km_floor to
/// keep the surface-concentration ratios finite at stagnation points.
template <typename T>
T mass_transfer_coeff(const T& speed, const CaseConfig& cfg) {
    if (value_of(speed) < 0.0)
        throw std::invalid_argument("mass_transfer_coeff: negative speed");
    using std::pow;
    if (value_of(speed) <= cfg.km_floor)
        return T(1.6e-4 * std::pow(cfg.km_floor, 0.4));
    return 1.6e-4 * pow(speed, 0.4);
}

/// Open-circuit potential from the Nernst equation, U0 + RT/F ln(c3/c2).
template <typename T>
T open_circuit_potential(const T& c2, const T& c3, const CaseConfig& cfg) {
    if (value_of(c2) <= 0.0 || value_of(c3) <= 0.0)
        throw std::invalid_argument("open_circuit_potential: concentrations must be positive");
    using std::log;
    return cfg.u0 + (cfg.gas_constant * cfg.temperature / cfg.faraday) * log(c3 / c2);
}

template <typename T>
struct SurfaceState {
    T c2s, c3s;   // surface concentrations [mol/m^3]
    T mbar, pbar; // dimensionless reaction/mass-transfer ratios
};

/// Surface concentrations from the finite-rate mass-transfer balance.
/// Preserves c2s + c3s = c2 + c3 identically.
template <typename T>
SurfaceState<T> surface_concentrations(const T& c2, const T& c3, const T& eta, const T& km,
                                       const CaseConfig& cfg, bool* clamp_hit = nullptr) {
    if (value_of(c2) <= 0.0 || value_of(c3) <= 0.0)
        throw std::invalid_argument("surface_concentrations: concentrations must be positive");
    if (value_of(km) <= 0.0)
        throw std::invalid_argument("surface_concentrations: k_m must be positive");
    using std::pow;
    const double f = cfg.faraday / (cfg.gas_constant * cfg.temperature);
    const T ratio = cfg.rate_constant / km;
    SurfaceState<T> s;
    s.mbar = ratio * pow(c2, cfg.alpha_c - 1.0) * pow(c3, cfg.alpha_a) *
             clamped_exp(cfg.alpha_a * f * eta, cfg.bv_exp_clamp, clamp_hit);
    s.pbar = ratio * pow(c2, cfg.alpha_c) * pow(c3, cfg.alpha_a - 1.0) *
             clamped_exp(-cfg.alpha_c * f * eta, cfg.bv_exp_clamp, clamp_hit);
    const T den = 1.0 + s.mbar + s.pbar;
    s.c2s = (s.pbar * c3 + (1.0 + s.pbar) * c2) / den;
    s.c3s = (s.mbar * c2 + (1.0 + s.mbar) * c3) / den;
    return s;
}

/// Volumetric exchange current density i0 = a F k c2^ac c3^aa [A/m^3].
template <typename T>
T exchange_current_density(const T& c2, const T& c3, const CaseConfig& cfg) {
    using std::pow;
    return cfg.specific_area * cfg.faraday * cfg.rate_constant *
           pow(c2, cfg.alpha_c) * pow(c3, cfg.alpha_a);
}

/// Butler-Volmer transfer current density [A/m^3] with surface-to-bulk
/// concentration ratios; positive in the charging (cathodic) direction.
template <typename T>
T butler_volmer(const T& c2, const T& c3, const T& c2s, const T& c3s, const T& eta,
                const CaseConfig& cfg, bool* clamp_hit = nullptr) {
    if (value_of(c2) <= 0.0 || value_of(c3) <= 0.0)
        throw std::invalid_argument("butler_volmer: bulk concentrations must be positive");
    const double f = cfg.faraday / (cfg.gas_constant * cfg.temperature);
    const T i0 = exchange_current_density(c2, c3, cfg);
    const T r3 = c3s / c3;
    const T r2 = c2s / c2;
    return i0 * (r3 * clamped_exp(-cfg.alpha_c * f * eta, cfg.bv_exp_clamp, clamp_hit) -
                 r2 * clamped_exp(cfg.alpha_a * f * eta, cfg.bv_exp_clamp, clamp_hit));
}

template <typename T>
struct CellKinetics {
    T u_ocp;      // open-circuit potential [V]
    T eta;        // overpotential phi_s - phi_e - U [V]
    T km;         // mass-transfer coefficient [m/s]
    T c2s, c3s;   // surface concentrations [mol/m^3]
    T j;          // transfer current density [A/m^3]
    bool clamped = false;
};

/// Full closure of one electrode cell from its state variables.
template <typename T>
CellKinetics<T> evaluate_cell(const T& c2, const T& c3, const T& phis, const T& phie,
                              const T& speed, const CaseConfig& cfg) {
    CellKinetics<T> out;
    out.u_ocp = open_circuit_potential(c2, c3, cfg);
    out.eta = phis - phie - out.u_ocp;
    out.km = mass_transfer_coeff(speed, cfg);
    bool hit = false;
    const SurfaceState<T> s = surface_concentrations(c2, c3, out.eta, out.km, cfg, &hit);
    out.c2s = s.c2s;
    out.c3s = s.c3s;
    out.j = butler_volmer(c2, c3, s.c2s, s.c3s, out.eta, cfg, &hit);
    out.clamped = hit;
    return out;
}

/// Bruggemann-corrected effective diffusivity for a region.
inline double effective_diffusivity(double d, Region r, const CaseConfig& cfg) {
    return r == Region::Electrode ? std::pow(cfg.porosity, 1.5) * d : d;
}

/// Effective solid-phase conductivity (1-eps)^1.5 sigma_s.
inline double effective_sigma_s(const CaseConfig& cfg) {
    return std::pow(1.0 - cfg.porosity, 1.5) * cfg.sigma_s;
}

/// Effective ionic conductivity of the electrolyte in an electrode cell.
/// Computed mode: F^2/RT sum_i z_i^2 D_i^eff c_i; constant mode: Table value.
template <typename T>
T effective_ionic_conductivity(const T& c2, const T& c3, const CaseConfig& cfg) {
    if (cfg.kappa_mode == KappaMode::Constant) return T(cfg.kappa_e_const);
    if (value_of(c2) <= 0.0 || value_of(c3) <= 0.0)
        throw std::invalid_argument("effective_ionic_conductivity: concentrations must be positive");
    const double f2rt = cfg.faraday * cfg.faraday / (cfg.gas_constant * cfg.temperature);
    const double d2 = effective_diffusivity(cfg.diff_v2, Region::Electrode, cfg);
    const double d3 = effective_diffusivity(cfg.diff_v3, Region::Electrode, cfg);
    return f2rt * (cfg.z_v2 * cfg.z_v2 * d2 * c2 + cfg.z_v3 * cfg.z_v3 * d3 * c3);
}

/// Linear coefficients of kappa_eff in (c2, c3); zero in constant mode.
inline void kappa_coefficients(const CaseConfig& cfg, double& dk_dc2, double& dk_dc3) {
    if (cfg.kappa_mode == KappaMode::Constant) {
        dk_dc2 = dk_dc3 = 0.0;
        return;
    }
    const double f2rt = cfg.faraday * cfg.faraday / (cfg.gas_constant * cfg.temperature);
    dk_dc2 = f2rt * cfg.z_v2 * cfg.z_v2 * effective_diffusivity(cfg.diff_v2, Region::Electrode, cfg);
    dk_dc3 = f2rt * cfg.z_v3 * cfg.z_v3 * effective_diffusivity(cfg.diff_v3, Region::Electrode, cfg);
}

} // namespace vrfb
