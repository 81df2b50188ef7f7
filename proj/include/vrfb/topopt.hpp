/// @file topopt.hpp
/// @brief Density-method optimization loop: Helmholtz PDE filter, forward
///        solves, discrete adjoint sensitivities, move-limited design
///        updates, convergence control, snapshots.

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "vrfb/config.hpp"
#include "vrfb/electrochem.hpp"
#include "vrfb/flow.hpp"
#include "vrfb/grid.hpp"

#include <Eigen/SparseCholesky>

namespace vrfb {

struct DensityField {
    std::vector<double> rho;       // design variables, one per design cell
    std::vector<double> rho_tilde; // filtered field
    double radius = 0.0;           // filter radius actually used [m]
};

/// Default PDE filter radius: twice the in-plane design cell size.
double default_filter_radius(const Grid& grid);

/// Helmholtz filter -r^2 lap(rho~) + rho~ = rho on the design layer with
/// zero-flux boundaries. Mass preserving and max-principle preserving;
/// radius 0 is the identity.
class PdeFilter {
public:
    PdeFilter(const Grid& grid, double radius);
    std::vector<double> apply(const std::vector<double>& rho) const;
    /// Chain-rule transpose: dF/drho = V . H^{-1} g (H is symmetric).
    std::vector<double> apply_transpose(const std::vector<double>& grad) const;
    double radius() const { return r_; }

private:
    const Grid& grid_;
    double r_;
    bool identity_;
    std::vector<double> vol_;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldl_;
};

/// Box-constrained ascent step of the linearized subproblem
/// max g^T drho s.t. |drho| <= move, 0 <= rho+drho <= 1 (closed form).
std::vector<double> slp_update(const std::vector<double>& rho, const std::vector<double>& grad,
                               double move_limit);

/// Gradient-proportional ascent step drho = move * g / |g|_inf, clamped to
/// the box. Unlike the bang-bang LP solution this keeps the spatial
/// structure of the sensitivity field, which is what differentiates
/// channels from ribs out of a uniform start.
std::vector<double> scaled_ascent_update(const std::vector<double>& rho,
                                         const std::vector<double>& grad, double move_limit);

/// One full forward evaluation at a given raw design.
struct ForwardSolution {
    DensityField density;
    FlowState flow;
    ElectroState electro;
    double objective = 0.0;
};

/// Full composed gradient dF/drho through filter, flow and electrochem
/// (solvers must hold the factorizations of this forward solution).
std::vector<double> composed_gradient(const Grid& grid, const CaseConfig& cfg,
                                      const PdeFilter& filter, const FlowSolver& fsolver,
                                      const FlowState& flow, const ElectrochemSolver& esolver,
                                      const ElectroState& electro,
                                      const std::vector<double>& rho_tilde);

/// Self-contained gradient at a raw design (assembles everything itself).
std::vector<double> adjoint_sensitivities(const Grid& grid, const CaseConfig& cfg,
                                          const std::vector<double>& rho);

struct OptIterRecord {
    int iteration;
    double objective;
    double dp;
    double q;
    double mean_abs_eta;
    double max_drho; // design change applied after the previous evaluation
};

struct OptimizationTrace {
    std::vector<OptIterRecord> records;
    bool converged = false;
};

struct OptimizeCallbacks {
    std::function<void(int iter, const DensityField&)> on_iteration;
};

struct OptimizeResult {
    DensityField density;
    OptimizationTrace trace;
};

/// Step 1..4 loop: filter, forward solves, objective, convergence check,
/// adjoint, move-limited update. Deterministic in serial.
OptimizeResult optimize(const Grid& grid, const CaseConfig& cfg,
                        const OptimizeCallbacks& callbacks = {},
                        const std::vector<double>* rho_init = nullptr, int start_iter = 0);

struct GradCheckEntry {
    int design_cell;
    double adjoint;
    double fd;
    double rel_err;
};

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::vector<GradCheckEntry> entries;
};

/// Central finite differences against the adjoint gradient on randomly
/// sampled design cells (seeded from the config).
GradCheckResult gradient_check(const Grid& grid, const CaseConfig& cfg, int ncells, double step);

// --- density snapshots (resume format) ---

struct DensitySnapshot {
    int nx = 0, ny = 0, nz = 0;
    int iteration = 0;
    double hx = 0, hy = 0, hz = 0;
    std::vector<double> rho;
};

void write_density_snapshot(const std::string& path, const Grid& grid, int iteration,
                            const std::vector<double>& rho);
DensitySnapshot read_density_snapshot(const std::string& path);

} // namespace vrfb
