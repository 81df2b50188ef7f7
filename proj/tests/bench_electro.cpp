// Scratch: electrochem convergence + adjoint gradient check on a small case.
#include <chrono>
#include <cstdio>

#include "vrfb/electrochem.hpp"
#include "vrfb/flow.hpp"
#include "vrfb/grid.hpp"
#include "vrfb/topopt.hpp"

using namespace vrfb;
using clk = std::chrono::steady_clock;

int main(int argc, char** argv) {
    CaseConfig cfg;
    cfg.nx = argc > 1 ? atoi(argv[1]) : 8;
    cfg.ny = cfg.nx;
    cfg.nz_electrode = 2;
    cfg.nz_channel = 2;
    cfg.picard_tol = 1e-15;
    cfg.picard_max_iter = 600;
    Grid grid(cfg);
    std::printf("grid %dx%dx%d, design cells %d\n", grid.nx(), grid.ny(), grid.nz(),
                grid.n_design_cells());

    std::vector<double> rho(grid.n_design_cells(), 0.5);
    PdeFilter filter(grid, default_filter_radius(grid));
    auto rho_t = filter.apply(rho);

    auto t0 = clk::now();
    FlowState flow = solve_flow(grid, rho_t, cfg);
    auto t1 = clk::now();
    std::printf("flow: %.2f s, q_in = %.4e, dp = %.0f\n",
                std::chrono::duration<double>(t1 - t0).count(), flow.q_in, flow.dp);

    ElectrochemSolver es(grid, cfg);
    ElectroState st = es.solve(flow);
    auto t2 = clk::now();
    std::printf("electro: %.2f s, %d picard iters, final update %.2e\n",
                std::chrono::duration<double>(t2 - t1).count(), st.picard_iters,
                st.final_update);
    std::printf("j_int = %.8f (I = %.3f), rel err %.2e\n", st.j_integral, cfg.current,
                std::abs(st.j_integral - cfg.current) / cfg.current);
    std::printf("mean|eta| = %.5f V, F = mean c3s = %.4f, clamped = %d\n", st.mean_abs_eta,
                st.mean_c3s, (int)st.bv_clamped);
    std::printf("vanadium in %.6e out %.6e rel %.2e\n", st.vanadium_in, st.vanadium_out,
                std::abs(st.vanadium_in - st.vanadium_out) / st.vanadium_in);
    ChargeAudit audit = es.charge_audit(st);
    std::printf("collector %.6f membrane %.6f plane mismatch %.2e\n", audit.collector_current,
                audit.membrane_current, audit.max_plane_mismatch);

    // outlet means
    double c2o = 0, c3o = 0;
    int cnt = 0;
    for (int k = 0; k < grid.nz(); ++k)
        for (int j = 0; j < grid.ny(); ++j) {
            int c = grid.cell(grid.nx() - 1, j, k);
            c2o += st.c2[c];
            c3o += st.c3[c];
            ++cnt;
        }
    std::printf("outlet-ish means: c2 = %.3f, c3 = %.3f\n", c2o / cnt, c3o / cnt);

    auto t3 = clk::now();
    GradCheckResult gc = gradient_check(grid, cfg, 6, 1e-5);
    auto t4 = clk::now();
    std::printf("gradcheck: %.1f s, max rel err %.3e\n",
                std::chrono::duration<double>(t4 - t3).count(), gc.max_rel_err);
    for (const auto& e : gc.entries)
        std::printf("  cell %4d: adj %+.8e  fd %+.8e  rel %.2e\n", e.design_cell, e.adjoint,
                    e.fd, e.rel_err);
    return 0;
}
