/// @file config.hpp
/// @brief Case configuration: every physical, geometric, numerical and
///        optimization parameter of a run, with defaults for a carbon-felt
///        negative half-cell (see README for the parameter table).
///
/// Config files are plain "key = value" text; '#' starts a comment.
/// Unknown keys are rejected, omitted keys keep their defaults, and any
/// known key can be overridden through the environment as VRFB_<KEY>
/// (upper-cased key). parse -> serialize -> parse is an identity.

#pragma once

#include <cstdint>
#include <string>

namespace vrfb {

enum class KappaMode { Computed, Constant };

/// Vertical extent of the inlet/outlet pressure patches. DesignLayer is the
/// physical placement (channels are fed from the side of the flow-field
/// layer); FullHeight drives the whole face and exists for verification
/// cases such as uniform Darcy columns.
enum class InletSpan { DesignLayer, FullHeight };

struct CaseConfig {
    // --- electrode ---
    double porosity = 0.929;            // [-]
    double specific_area = 1.62e4;      // [1/m]
    double fiber_diameter = 1.76e-5;    // [m]
    double sigma_s = 1.0e3;             // solid-phase conductivity [S/m]
    double kozeny_carman = 4.28;        // [-]
    double length = 0.1;                // L, flow direction [m]
    double width = 0.1;                 // W [m]
    double electrode_thickness = 3.0e-3; // t_e [m]

    // --- electrolyte ---
    double viscosity = 4.928e-3;        // [Pa s]
    double c_in_v2 = 750.0;             // inlet V2+ concentration [mol/m^3]
    double c_in_v3 = 750.0;             // inlet V3+ concentration [mol/m^3]
    double diff_v2 = 2.4e-4;            // V2+ diffusion coefficient [m^2/s]
    double diff_v3 = 2.4e-4;            // V3+ diffusion coefficient [m^2/s]
    double kappa_e_const = 7.8;         // electrolyte conductivity, constant mode [S/m]
    KappaMode kappa_mode = KappaMode::Computed;

    // --- reaction kinetics ---
    double rate_constant = 1.7e-7;      // k [m/s]
    double alpha_c = 0.5;               // cathodic transfer coefficient [-]
    double alpha_a = 0.5;               // anodic transfer coefficient [-]
    double u0 = -0.255;                 // equilibrium potential [V]

    // --- operating point ---
    double temperature = 298.0;         // [K]
    double p_in = 1000.0;               // inlet pressure [Pa]
    double p_out = 0.0;                 // outlet pressure [Pa]
    double current = 4.0;               // applied current I [A]

    // --- physical constants ---
    double faraday = 96485.0;           // [C/mol]
    double gas_constant = 8.314;        // [J/(mol K)]
    double z_v2 = 2.0;                  // V2+ valence
    double z_v3 = 3.0;                  // V3+ valence

    // --- discretization ---
    int nx = 48;
    int ny = 48;
    int nz_channel = 2;                 // sublayers across the flow-field layer
    int nz_electrode = 6;               // sublayers across the electrode
    double channel_thickness = 3.0e-3;  // t_c [m]
    double inlet_width = 3.0e-3;        // y-extent of inlet/outlet patches [m]
    InletSpan inlet_span = InletSpan::DesignLayer;

    // --- numerics ---
    double flow_rel_tol = 1e-8;         // accepted relative residual of the flow solve
    double picard_tol = 1e-6;           // max relative field update
    int picard_max_iter = 200;
    double under_relax_j = 0.7;         // relaxation on transfer-current updates
    double bv_exp_clamp = 50.0;         // |F eta / RT| clamp in exponentials
    double km_floor = 1e-9;             // speed floor in the k_m correlation [m/s]

    // --- topology optimization ---
    double q_convexity = 0.01;          // q in the fictitious inverse permeability
    double alpha_fic_multiplier = 5.0;  // alpha_fic_max = mult * mu/K
    double filter_radius = -1.0;        // PDE filter radius [m]; <0 selects 2*max(hx,hy)
    // Design update: "scaled" moves proportionally to the gradient
    // (move_limit * g / |g|_inf), "signed" takes the bang-bang LP solution.
    // The signed rule loses all gradient magnitude information and stalls in
    // the open-everything basin on this problem; see the README.
    bool slp_signed = false;
    double move_limit = 0.1;
    // Brinkman-penalty continuation: stage s of S runs at
    // alpha_fic_multiplier * 10^(s - S + 1), sharing the iteration budget.
    // Weak penalties let the channel/rib skeleton form before the solid
    // becomes impermeable; 1 disables continuation.
    int continuation_stages = 3;
    int opt_max_iter = 100;
    double opt_tol = 1e-4;              // relative objective change
    int opt_tol_window = 5;             // consecutive iterations below opt_tol
    double rho_init = 0.5;
    double threshold = 0.5;             // fluid threshold on filtered density

    // --- reference flow fields ---
    double channel_width = 3.0e-3;      // [m]
    double channel_pitch = 9.0e-3;      // center-to-center spacing [m]
    double manifold_width = 3.0e-3;     // [m]

    // --- misc ---
    int snapshot_every = 1;             // density snapshot cadence during optimize
    int seed = 12345;                   // cell sampling seed for gradcheck

    /// Permeability from the Kozeny-Carman correlation [m^2].
    double permeability() const;
    /// Electrode cross-section L*W used in the galvanostatic flux conditions [m^2].
    double electrode_area() const { return length * width; }

    /// Throws std::invalid_argument naming the offending key.
    void validate() const;
};

/// Parse a config file; missing keys keep defaults, unknown keys throw.
/// Environment variables VRFB_<KEY> override file values.
CaseConfig parse_config(const std::string& path);
/// Parse from in-memory text (no environment overrides); used by tests.
CaseConfig parse_config_text(const std::string& text);
/// Canonical serialization: every key, fixed order, round-trip exact.
std::string serialize_config(const CaseConfig& cfg);
/// FNV-1a hash of the canonical serialization, as fixed-width hex.
std::string config_hash(const CaseConfig& cfg);

} // namespace vrfb
