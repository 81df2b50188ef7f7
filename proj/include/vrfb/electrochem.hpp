/// @file electrochem.hpp
/// @brief Coupled species/charge solver for the negative half-cell:
///        V2+/V3+ transport with Butler-Volmer volumetric reaction,
///        solid-phase potential phi_s and electrolyte potential phi_e
///        under galvanostatic operation.
///
/// Governing system (charging positive, j > 0 cathodic):
///   u.grad c_i - div(D_i^eff grad c_i) = s_i,  s_V2+ = +j/F, s_V3+ = -j/F
///   -div(sigma_s^eff grad phi_s) = -j   (electrode cells)
///   -div(kappa_e^eff grad phi_e) = -j ... see below
/// realized as finite-volume residuals
///   R_phis = A_sigma phis + (I/A) on the collector feed - V j = 0
///   R_phie = A_kappa phie - (I/A) on the membrane       + V j = 0
/// so the linearized coupling A + V |dj/deta| is coercive. phi_s is pinned
/// at one reference cell; the phi_e level is set each Picard iteration by
/// the galvanostatic constraint  integral j dV = I  (monotone 1-D root).
///
/// Transport uses exponential-fitting (Scharfetter-Gummel) face fluxes,
/// which are monotone at any cell Peclet number and smooth in the face
/// velocity; that smoothness is what makes the discrete adjoint match
/// finite differences tightly.

#pragma once

#include <vector>

#include <Eigen/Sparse>

#include "vrfb/config.hpp"
#include "vrfb/flow.hpp"
#include "vrfb/grid.hpp"

namespace vrfb {

struct ElectroState {
    // all cells
    std::vector<double> c2, c3;
    // electrode cells (electrode cell index == global cell index)
    std::vector<double> phis, phie;
    std::vector<double> j, eta, u_ocp, c2s, c3s, km, speed;

    int picard_iters = 0;
    double final_update = 0.0;
    bool bv_clamped = false;
    std::vector<double> update_history;

    double j_integral = 0.0;   // integral of j over the electrode [A]
    double mean_abs_eta = 0.0; // electrode-volume average of |eta| [V]
    double mean_c3s = 0.0;     // electrode-volume average of c3s [mol/m^3]
    double vanadium_in = 0.0;  // total (c2+c3) boundary influx [mol/s]
    double vanadium_out = 0.0; // total (c2+c3) boundary outflux [mol/s]
};

/// Conservation audit computed from the converged fields (not from the
/// imposed data): interior-plane currents vs cumulative reaction current.
struct ChargeAudit {
    double collector_current = 0.0; // electronic current through the collector feed [A]
    double membrane_current = 0.0;  // ionic current through the membrane [A]
    double j_integral = 0.0;
    double max_plane_mismatch = 0.0; // worst |plane current - cumulative j|, relative to I
};

class ElectrochemSolver {
public:
    ElectrochemSolver(const Grid& grid, const CaseConfig& cfg);

    /// Picard solve; throws on non-convergence (message carries the update
    /// history) and on a positivity violation in the converged state.
    ElectroState solve(const FlowState& flow) const;

    ChargeAudit charge_audit(const ElectroState& st) const;

    /// Objective integrand: electrode-volume mean of the V3+ surface
    /// concentration (equals st.mean_c3s).
    double objective(const ElectroState& st) const { return st.mean_c3s; }

    struct AdjointResult {
        Eigen::VectorXd lambda;          // multipliers for [c2; c3; phis; phie]
        std::vector<double> du, dv, dw;  // d(objective)/d(face velocity), reduced
    };
    /// Discrete adjoint of the coupled system at a converged state, for the
    /// objective mean(c3s). du/dv/dw already include the explicit dF/du term.
    AdjointResult adjoint(const FlowState& flow, const ElectroState& st) const;

    /// Exact Jacobian dR/dy of the coupled residual at the given state,
    /// y = [c2; c3; phis; phie]. Exposed for verification tests.
    Eigen::SparseMatrix<double> jacobian(const FlowState& flow, const ElectroState& st) const;

    int pinned_cell() const { return pin_cell_; }

private:
    const Grid& grid_;
    const CaseConfig& cfg_;
    int pin_cell_; // phi_s gauge reference (top electrode sublayer corner)

    friend struct ElectroAssembler;
};

/// Convenience wrapper used by evaluate/optimize pipelines.
ElectroState solve_electrochem(const Grid& grid, const FlowState& flow, const CaseConfig& cfg);

} // namespace vrfb
