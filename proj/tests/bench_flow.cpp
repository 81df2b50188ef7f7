// Scratch benchmark for the Brinkman solve at optimization scale.
#include <chrono>
#include <cstdio>

#include "vrfb/config.hpp"
#include "vrfb/flow.hpp"
#include "vrfb/grid.hpp"

using namespace vrfb;
using clk = std::chrono::steady_clock;

int main() {
    CaseConfig cfg;
    cfg.nx = 48;
    cfg.ny = 48;
    cfg.nz_channel = 2;
    cfg.nz_electrode = 6;
    Grid grid(cfg);

    std::vector<double> rho(grid.n_design_cells(), 1.0);
    // checkerboard-ish contrast to exercise the penalized regime
    for (int d = 0; d < grid.n_design_cells(); ++d)
        if ((d / 7) % 3 == 0) rho[d] = 0.0;

    auto t0 = clk::now();
    FlowSolver solver(grid, cfg);
    solver.assemble(build_alpha_field(grid, rho, cfg));
    auto t1 = clk::now();
    FlowState st = solver.solve();
    auto t2 = clk::now();

    std::printf("dofs: %d vel + %d cells\n", solver.system().nvel, solver.system().ncells);
    std::printf("assemble+factorize: %.2f s\n",
                std::chrono::duration<double>(t1 - t0).count());
    std::printf("solve: %.3f s\n", std::chrono::duration<double>(t2 - t1).count());
    std::printf("q_in = %.6e  q_out = %.6e  rel imbalance = %.3e\n", st.q_in, st.q_out,
                (st.q_in - st.q_out) / st.q_in);
    std::printf("dp = %.1f\n", st.dp);
    return 0;
}
