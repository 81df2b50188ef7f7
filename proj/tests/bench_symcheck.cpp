#include <cstdio>
#include "vrfb/flow.hpp"
#include "vrfb/grid.hpp"
using namespace vrfb;
int main() {
    CaseConfig cfg; cfg.nx = 6; cfg.ny = 6; cfg.nz_electrode = 2; cfg.nz_channel = 2;
    Grid grid(cfg);
    std::vector<double> rho(grid.n_design_cells(), 0.5);
    for (size_t i = 0; i < rho.size(); ++i) rho[i] = 0.2 + 0.6 * ((i * 37) % 11) / 10.0;
    auto sys = assemble_brinkman(grid, build_alpha_field(grid, rho, cfg), cfg, 1.0);
    Eigen::SparseMatrix<double> d = sys.mat - Eigen::SparseMatrix<double>(sys.mat.transpose());
    double mx = 0, scale = 0;
    for (int k = 0; k < d.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(d, k); it; ++it)
            mx = std::max(mx, std::abs(it.value()));
    for (int k = 0; k < sys.mat.outerSize(); ++k)
        for (Eigen::SparseMatrix<double>::InnerIterator it(sys.mat, k); it; ++it)
            scale = std::max(scale, std::abs(it.value()));
    std::printf("max |M - M^T| = %.3e (scale %.3e)\n", mx, scale);
    return 0;
}
