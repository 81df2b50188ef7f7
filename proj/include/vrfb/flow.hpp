/// @file flow.hpp
/// @brief Stationary incompressible Brinkman flow on the staggered (MAC)
///        grid: -grad p + mu lap u - alpha u = 0, div u = 0, driven by
///        pressure patches on the inlet/outlet and no-slip elsewhere.
///
/// Velocity unknowns live on faces (x-faces u, y-faces v, z-faces w),
/// pressure at cell centers. The assembled system is a symmetric saddle
/// point [[A, G],[G^T, 0]] solved by sparse LU; the same factorization
/// serves the adjoint solve.

#pragma once

#include <memory>
#include <vector>

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "vrfb/config.hpp"
#include "vrfb/grid.hpp"

namespace vrfb {

/// Fictitious inverse permeability of the density method:
///   alpha_fic(rho) = q (1 - rho) / (rho + q) * alpha_max,
/// alpha_max = multiplier * mu / K. Zero at rho = 1, alpha_max at rho = 0.
double alpha_fic(double rho, const CaseConfig& cfg);
/// d alpha_fic / d rho (negative).
double alpha_fic_deriv(double rho, const CaseConfig& cfg);
/// alpha_max = multiplier * mu / K, the solid-domain penalty scale.
double alpha_fic_max(const CaseConfig& cfg);

/// Per-cell inverse permeability: mu/K in the electrode, alpha_fic(rho~)
/// in the design layer. rho_tilde is indexed by design cell.
std::vector<double> build_alpha_field(const Grid& grid, const std::vector<double>& rho_tilde,
                                      const CaseConfig& cfg);

struct FlowState {
    std::vector<double> u, v, w; // all faces; Dirichlet faces hold 0
    std::vector<double> p;       // all cells
    double q_in = 0.0;           // inlet volumetric flow rate [m^3/s]
    double q_out = 0.0;          // outlet volumetric flow rate [m^3/s]
    double dp = 0.0;             // p_in - p_out [Pa]

    void cell_velocity(const Grid& g, int c, double& ux, double& uy, double& uz) const;
    double cell_speed(const Grid& g, int c) const;
    /// Scale the whole solution by s (valid because the system is linear
    /// and homogeneous in the driving pressure difference).
    void scale(double s, double p_out);
};

/// One velocity degree of freedom and the cells whose alpha it feels.
/// The momentum row carries alpha_face * vol * u with
/// alpha_face = wcell[0]*alpha[cell[0]] + wcell[1]*alpha[cell[1]].
struct VelDof {
    int orient;      // 0 = x, 1 = y, 2 = z
    int face;        // face index within its orientation
    int cell[2];     // adjacent cells; cell[1] < 0 on boundary faces
    double wcell[2]; // alpha averaging weights (sum to 1)
    double vol;      // staggered control volume
};

/// Assembled Brinkman saddle system. Exposed so verification tests can
/// inspect the operator directly; FlowSolver adds the factorization.
struct BrinkmanSystem {
    Eigen::SparseMatrix<double> mat; // symmetric, (nvel + ncells)^2
    Eigen::VectorXd rhs;             // for unit p_in - p_out; see scale note
    std::vector<VelDof> vel_dofs;
    std::vector<int> dof_u, dof_v, dof_w; // face -> dof index, -1 for Dirichlet
    int nvel = 0;
    int ncells = 0;
};

/// Assemble the discrete Brinkman system for the given inverse-permeability
/// field, with p = dp on the inlet and p = 0 on the outlet (the physical
/// p_out offset is reapplied after the solve).
BrinkmanSystem assemble_brinkman(const Grid& grid, const std::vector<double>& alpha_cell,
                                 const CaseConfig& cfg, double dp);

class FlowSolver {
public:
    FlowSolver(const Grid& grid, const CaseConfig& cfg);

    /// Assemble and factorize for a new inverse-permeability field.
    void assemble(const std::vector<double>& alpha_cell);
    bool assembled() const { return assembled_; }

    /// Solve with the configured p_in/p_out. Throws on solver failure or
    /// a residual above flow_rel_tol.
    FlowState solve() const;
    /// Solve for an arbitrary pressure drop (p_out kept from config).
    FlowState solve(double dp) const;

    /// Adjoint solve against the same (symmetric) operator.
    Eigen::VectorXd solve_adjoint(const Eigen::VectorXd& rhs) const;

    const BrinkmanSystem& system() const { return sys_; }
    const Grid& grid() const { return grid_; }

    /// Pack per-face arrays into a dof vector (velocity slots; pressure 0).
    Eigen::VectorXd pack_velocity_rhs(const std::vector<double>& gu,
                                      const std::vector<double>& gv,
                                      const std::vector<double>& gw) const;
    /// d(objective)/d(alpha_cell) contribution -lambda^T dM/dalpha u.
    std::vector<double> alpha_sensitivity(const FlowState& state,
                                          const Eigen::VectorXd& lambda) const;

private:
    const Grid& grid_;
    const CaseConfig& cfg_;
    BrinkmanSystem sys_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
    bool assembled_ = false;
};

/// Convenience wrapper: filter-free solve for a given design-layer density
/// field (already filtered if filtering is wanted).
FlowState solve_flow(const Grid& grid, const std::vector<double>& rho_tilde,
                     const CaseConfig& cfg);

} // namespace vrfb
