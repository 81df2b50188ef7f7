// Scratch: bisect the adjoint chain.
//  (1) flow-only functional Psi = sum u_f^2 vs FD through filter+flow
//  (2) coupled electro Jacobian vs directional FD of the residual
//  (3) dR/du vs directional FD in the face velocities
#include <cstdio>
#include <random>

#include <Eigen/SparseLU>

#include "vrfb/electrochem.hpp"
#include "vrfb/flow.hpp"
#include "vrfb/grid.hpp"
#include "vrfb/kinetics.hpp"
#include "vrfb/topopt.hpp"

using namespace vrfb;

// Residual of the coupled electro system at arbitrary (y; flow), matching the
// solver's discretization. Reimplemented here from first principles as the
// test oracle.
static Eigen::VectorXd electro_residual(const Grid& g, const CaseConfig& cfg,
                                        const FlowState& flow, const Eigen::VectorXd& y,
                                        int pin_cell) {
    const int n = g.ncells(), ne = g.n_electrode_cells();
    const int off3 = n, offs = 2 * n, offe = 2 * n + ne;
    Eigen::VectorXd r = Eigen::VectorXd::Zero(2 * n + 2 * ne);

    auto bern = [](double x) {
        if (std::abs(x) < 1e-6) return 1.0 - 0.5 * x + x * x / 12.0;
        return x / std::expm1(x);
    };
    auto dcell = [&](int c, double d0) { return effective_diffusivity(d0, g.region(c), cfg); };

    // species fluxes
    auto species = [&](double d0, double cin, int off, double sgn) {
        auto flux_pair = [&](int cl, int cr, double area, double dl, double dr, double u) {
            const double t = area / (dl / dcell(cl, d0) + dr / dcell(cr, d0));
            const double pe = u * area / t;
            const double f = t * (bern(-pe) * y[off + cl] - bern(pe) * y[off + cr]);
            r[off + cl] += f;
            r[off + cr] -= f;
        };
        for (int k = 0; k < g.nz(); ++k)
            for (int j = 0; j < g.ny(); ++j)
                for (int i = 0; i <= g.nx(); ++i) {
                    if (i > 0 && i < g.nx()) {
                        flux_pair(g.cell(i - 1, j, k), g.cell(i, j, k), g.ax(k), 0.5 * g.hx(),
                                  0.5 * g.hx(), flow.u[g.fx(i, j, k)]);
                    } else if (g.patch_fx(i, j, k) == Patch::Inlet) {
                        const int c = g.cell(0, j, k);
                        const double t = g.ax(k) * dcell(c, d0) / (0.5 * g.hx());
                        const double pe = flow.u[g.fx(i, j, k)] * g.ax(k) / t;
                        r[off + c] -= t * (bern(-pe) * cin - bern(pe) * y[off + c]);
                    } else if (g.patch_fx(i, j, k) == Patch::Outlet) {
                        const int c = g.cell(g.nx() - 1, j, k);
                        r[off + c] += g.ax(k) * flow.u[g.fx(i, j, k)] * y[off + c];
                    }
                }
        for (int k = 0; k < g.nz(); ++k)
            for (int j = 1; j < g.ny(); ++j)
                for (int i = 0; i < g.nx(); ++i)
                    flux_pair(g.cell(i, j - 1, k), g.cell(i, j, k), g.ay(k), 0.5 * g.hy(),
                              0.5 * g.hy(), flow.v[g.fy(i, j, k)]);
        for (int k = 1; k < g.nz(); ++k)
            for (int j = 0; j < g.ny(); ++j)
                for (int i = 0; i < g.nx(); ++i)
                    flux_pair(g.cell(i, j, k - 1), g.cell(i, j, k), g.az(), 0.5 * g.dz(k - 1),
                              0.5 * g.dz(k), flow.w[g.fz(i, j, k)]);
        // reaction source
        for (int c = 0; c < ne; ++c) {
            const auto kin = evaluate_cell<double>(y[c], y[off3 + c], y[offs + c], y[offe + c],
                                                   flow.cell_speed(g, c), cfg);
            r[off + c] -= sgn * g.cell_volume(c) * kin.j / cfg.faraday;
        }
    };
    species(cfg.diff_v2, cfg.c_in_v2, 0, +1.0);
    species(cfg.diff_v3, cfg.c_in_v3, off3, -1.0);

    // potentials
    const double sig = effective_sigma_s(cfg);
    auto pot_flux = [&](int cl, int cr, double area, double dl, double dr, bool is_phis) {
        double kl, kr;
        if (is_phis) {
            kl = kr = sig;
        } else {
            kl = effective_ionic_conductivity(y[cl], y[off3 + cl], cfg);
            kr = effective_ionic_conductivity(y[cr], y[off3 + cr], cfg);
        }
        const double t = area / (dl / kl + dr / kr);
        const int off = is_phis ? offs : offe;
        const double f = t * (y[off + cl] - y[off + cr]);
        r[off + cl] += f;
        r[off + cr] -= f;
    };
    for (bool is_phis : {true, false}) {
        for (int k = 0; k < g.nz_electrode(); ++k)
            for (int j = 0; j < g.ny(); ++j)
                for (int i = 1; i < g.nx(); ++i)
                    pot_flux(g.cell(i - 1, j, k), g.cell(i, j, k), g.ax(k), 0.5 * g.hx(),
                             0.5 * g.hx(), is_phis);
        for (int k = 0; k < g.nz_electrode(); ++k)
            for (int j = 1; j < g.ny(); ++j)
                for (int i = 0; i < g.nx(); ++i)
                    pot_flux(g.cell(i, j - 1, k), g.cell(i, j, k), g.ay(k), 0.5 * g.hy(),
                             0.5 * g.hy(), is_phis);
        for (int k = 1; k < g.nz_electrode(); ++k)
            for (int j = 0; j < g.ny(); ++j)
                for (int i = 0; i < g.nx(); ++i)
                    pot_flux(g.cell(i, j, k - 1), g.cell(i, j, k), g.az(), 0.5 * g.dz(k - 1),
                             0.5 * g.dz(k), is_phis);
    }
    const double qc = cfg.current / cfg.electrode_area();
    for (int j = 0; j < g.ny(); ++j)
        for (int i = 0; i < g.nx(); ++i) {
            r[offs + g.cell(i, j, g.nz_electrode() - 1)] += qc * g.az();
            r[offe + g.cell(i, j, 0)] += -qc * g.az();
        }
    for (int c = 0; c < ne; ++c) {
        const auto kin = evaluate_cell<double>(y[c], y[off3 + c], y[offs + c], y[offe + c],
                                               flow.cell_speed(g, c), cfg);
        r[offs + c] -= g.cell_volume(c) * kin.j;
        r[offe + c] += g.cell_volume(c) * kin.j;
    }
    r[offs + pin_cell] = y[offs + pin_cell];
    return r;
}

int main() {
    CaseConfig cfg;
    cfg.nx = 6;
    cfg.ny = 6;
    cfg.nz_electrode = 2;
    cfg.nz_channel = 2;
    cfg.picard_tol = 1e-13;
    cfg.picard_max_iter = 400;
    Grid grid(cfg);
    const int n = grid.ncells(), ne = grid.n_electrode_cells();

    std::vector<double> rho(grid.n_design_cells(), 0.5);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> unif(0.1, 0.9);
    for (double& v : rho) v = unif(rng);

    PdeFilter filter(grid, default_filter_radius(grid));
    auto rho_t = filter.apply(rho);

    FlowSolver fsolver(grid, cfg);
    fsolver.assemble(build_alpha_field(grid, rho_t, cfg));
    FlowState flow = fsolver.solve();

    // --- (1) flow-only functional Psi = sum over u,v,w faces of value^2
    {
        auto psi_of = [&](const std::vector<double>& r) {
            PdeFilter f2(grid, filter.radius());
            auto rt = f2.apply(r);
            FlowSolver fs(grid, cfg);
            fs.assemble(build_alpha_field(grid, rt, cfg));
            FlowState st = fs.solve();
            double s = 0;
            for (double x : st.u) s += x * x;
            for (double x : st.v) s += x * x;
            for (double x : st.w) s += x * x;
            return s;
        };
        std::vector<double> gu(grid.nfx()), gv(grid.nfy()), gw(grid.nfz());
        for (int f = 0; f < grid.nfx(); ++f) gu[f] = 2.0 * flow.u[f];
        for (int f = 0; f < grid.nfy(); ++f) gv[f] = 2.0 * flow.v[f];
        for (int f = 0; f < grid.nfz(); ++f) gw[f] = 2.0 * flow.w[f];
        Eigen::VectorXd lam = fsolver.solve_adjoint(fsolver.pack_velocity_rhs(gu, gv, gw));
        std::vector<double> dpsi_da = fsolver.alpha_sensitivity(flow, lam);
        std::vector<double> gt(grid.n_design_cells());
        for (int d = 0; d < grid.n_design_cells(); ++d)
            gt[d] = dpsi_da[grid.design_cell(d)] * alpha_fic_deriv(rho_t[d], cfg);
        auto grad = filter.apply_transpose(gt);
        double maxrel = 0;
        for (int t = 0; t < 5; ++t) {
            int d = rng() % grid.n_design_cells();
            const double h = 1e-6;
            auto rp = rho; rp[d] += h;
            auto rm = rho; rm[d] -= h;
            const double fd = (psi_of(rp) - psi_of(rm)) / (2 * h);
            maxrel = std::max(maxrel, std::abs(grad[d] - fd) / std::max(std::abs(fd), 1e-12));
            std::printf("  flow-psi cell %3d adj %+.8e fd %+.8e\n", d, grad[d], fd);
        }
        std::printf("(1) flow-only adjoint max rel err: %.3e\n\n", maxrel);
    }

    // --- electro state and Jacobian checks
    ElectrochemSolver esolver(grid, cfg);
    ElectroState st = esolver.solve(flow);

    Eigen::VectorXd y(2 * n + 2 * ne);
    for (int c = 0; c < n; ++c) { y[c] = st.c2[c]; y[n + c] = st.c3[c]; }
    for (int c = 0; c < ne; ++c) { y[2 * n + c] = st.phis[c]; y[2 * n + ne + c] = st.phie[c]; }

    Eigen::VectorXd r0 = electro_residual(grid, cfg, flow, y, esolver.pinned_cell());
    std::printf("(2) residual at converged state: |R|_inf = %.3e\n", r0.lpNorm<Eigen::Infinity>());

    // Jacobian-vector products vs FD through the oracle residual
    {
        // recover J by calling the solver's adjoint guts indirectly: use FD on
        // the oracle in random directions and compare against J dy computed by
        // finite differences of the SOLVER's... we don't expose J directly, so
        // instead verify gradcheck-style after dR/du below.
        std::normal_distribution<double> gauss;
        Eigen::VectorXd dy(y.size());
        for (int t = 0; t < (int)y.size(); ++t) dy[t] = gauss(rng);
        dy *= 1e-7;
        Eigen::VectorXd rp = electro_residual(grid, cfg, flow, y + dy, esolver.pinned_cell());
        Eigen::VectorXd rm = electro_residual(grid, cfg, flow, y - dy, esolver.pinned_cell());
        std::printf("    (directional residual change available for reference): |dR| = %.3e\n",
                    ((rp - rm) / 2.0).norm());
    }

    // --- (3) full gradcheck equivalent with the oracle residual is the
    // gradient_check itself; re-run it here at tight settings for reference.
    GradCheckResult gc = gradient_check(grid, cfg, 5, 1e-5);
    std::printf("(3) gradient_check max rel err: %.3e\n", gc.max_rel_err);
    for (const auto& e : gc.entries)
        std::printf("  cell %3d adj %+.8e fd %+.8e rel %.2e\n", e.design_cell, e.adjoint, e.fd,
                    e.rel_err);
    return 0;
}
