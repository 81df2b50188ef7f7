#include "vrfb/topopt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <stdexcept>

namespace vrfb {

double default_filter_radius(const Grid& grid) { return 2.0 * std::max(grid.hx(), grid.hy()); }

PdeFilter::PdeFilter(const Grid& grid, double radius) : grid_(grid), r_(radius) {
    if (radius < 0.0) throw std::invalid_argument("pde_filter: radius must be non-negative");
    const int nd = grid.n_design_cells();
    vol_.resize(nd);
    for (int d = 0; d < nd; ++d) vol_[d] = grid.cell_volume(grid.design_cell(d));
    identity_ = radius == 0.0;
    if (identity_) return;

    // H = diag(V) + r^2 L, zero-flux Laplacian on the design layer
    const int nx = grid.nx(), ny = grid.ny(), nze = grid.nz_electrode(), nz = grid.nz();
    auto didx = [&](int i, int j, int k) { return grid.design_index(grid.cell(i, j, k)); };
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(nd) * 7);
    const double r2 = radius * radius;
    auto face = [&](int a, int b, double area, double dist) {
        const double t = r2 * area / dist;
        trip.emplace_back(a, a, t);
        trip.emplace_back(a, b, -t);
        trip.emplace_back(b, a, -t);
        trip.emplace_back(b, b, t);
    };
    for (int k = nze; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const int d = didx(i, j, k);
                trip.emplace_back(d, d, vol_[d]);
                if (i + 1 < nx) face(d, didx(i + 1, j, k), grid.ax(k), grid.hx());
                if (j + 1 < ny) face(d, didx(i, j + 1, k), grid.ay(k), grid.hy());
                if (k + 1 < nz) face(d, didx(i, j, k + 1), grid.az(),
                                     0.5 * (grid.dz(k) + grid.dz(k + 1)));
            }
    Eigen::SparseMatrix<double> h(nd, nd);
    h.setFromTriplets(trip.begin(), trip.end());
    h.makeCompressed();
    ldl_.compute(h);
    if (ldl_.info() != Eigen::Success)
        throw std::runtime_error("pde_filter: factorization failed");
}

std::vector<double> PdeFilter::apply(const std::vector<double>& rho) const {
    const int nd = grid_.n_design_cells();
    if (static_cast<int>(rho.size()) != nd)
        throw std::invalid_argument("pde_filter: density size mismatch");
    if (identity_) return rho;
    Eigen::VectorXd b(nd);
    for (int d = 0; d < nd; ++d) b[d] = vol_[d] * rho[d];
    Eigen::VectorXd x = ldl_.solve(b);
    return std::vector<double>(x.data(), x.data() + nd);
}

std::vector<double> PdeFilter::apply_transpose(const std::vector<double>& grad) const {
    const int nd = grid_.n_design_cells();
    if (static_cast<int>(grad.size()) != nd)
        throw std::invalid_argument("pde_filter: gradient size mismatch");
    if (identity_) return grad;
    Eigen::VectorXd b(nd);
    for (int d = 0; d < nd; ++d) b[d] = grad[d];
    Eigen::VectorXd x = ldl_.solve(b);
    std::vector<double> out(nd);
    for (int d = 0; d < nd; ++d) out[d] = vol_[d] * x[d];
    return out;
}

std::vector<double> slp_update(const std::vector<double>& rho, const std::vector<double>& grad,
                               double move_limit) {
    if (rho.size() != grad.size())
        throw std::invalid_argument("slp_update: field size mismatch");
    if (!(move_limit > 0.0 && move_limit <= 1.0))
        throw std::invalid_argument("slp_update: move limit must lie in (0, 1]");
    std::vector<double> out(rho.size());
    for (size_t e = 0; e < rho.size(); ++e) {
        double step = grad[e] > 0.0 ? move_limit : grad[e] < 0.0 ? -move_limit : 0.0;
        out[e] = std::clamp(rho[e] + step, 0.0, 1.0);
    }
    return out;
}

std::vector<double> scaled_ascent_update(const std::vector<double>& rho,
                                         const std::vector<double>& grad, double move_limit) {
    if (rho.size() != grad.size())
        throw std::invalid_argument("scaled_ascent_update: field size mismatch");
    if (!(move_limit > 0.0 && move_limit <= 1.0))
        throw std::invalid_argument("scaled_ascent_update: move limit must lie in (0, 1]");
    double gmax = 0.0;
    for (double g : grad) gmax = std::max(gmax, std::abs(g));
    std::vector<double> out(rho.size());
    if (gmax == 0.0) return rho;
    const double s = move_limit / gmax;
    for (size_t e = 0; e < rho.size(); ++e)
        out[e] = std::clamp(rho[e] + s * grad[e], 0.0, 1.0);
    return out;
}

std::vector<double> composed_gradient(const Grid& grid, const CaseConfig& cfg,
                                      const PdeFilter& filter, const FlowSolver& fsolver,
                                      const FlowState& flow, const ElectrochemSolver& esolver,
                                      const ElectroState& electro,
                                      const std::vector<double>& rho_tilde) {
    ElectrochemSolver::AdjointResult adj = esolver.adjoint(flow, electro);
    Eigen::VectorXd rhs = fsolver.pack_velocity_rhs(adj.du, adj.dv, adj.dw);
    Eigen::VectorXd lam = fsolver.solve_adjoint(rhs);
    std::vector<double> dF_dalpha = fsolver.alpha_sensitivity(flow, lam);

    const int nd = grid.n_design_cells();
    std::vector<double> g_tilde(nd);
    for (int d = 0; d < nd; ++d)
        g_tilde[d] = dF_dalpha[grid.design_cell(d)] * alpha_fic_deriv(rho_tilde[d], cfg);
    return filter.apply_transpose(g_tilde);
}

namespace {

ForwardSolution run_forward(const Grid& grid, const CaseConfig& cfg, const PdeFilter& filter,
                            FlowSolver& fsolver, const ElectrochemSolver& esolver,
                            const std::vector<double>& rho) {
    ForwardSolution fs;
    fs.density.rho = rho;
    fs.density.rho_tilde = filter.apply(rho);
    fs.density.radius = filter.radius();
    fsolver.assemble(build_alpha_field(grid, fs.density.rho_tilde, cfg));
    fs.flow = fsolver.solve();
    fs.electro = esolver.solve(fs.flow);
    fs.objective = fs.electro.mean_c3s;
    return fs;
}

double resolved_radius(const Grid& grid, const CaseConfig& cfg) {
    return cfg.filter_radius < 0.0 ? default_filter_radius(grid) : cfg.filter_radius;
}

} // namespace

std::vector<double> adjoint_sensitivities(const Grid& grid, const CaseConfig& cfg,
                                          const std::vector<double>& rho) {
    PdeFilter filter(grid, resolved_radius(grid, cfg));
    FlowSolver fsolver(grid, cfg);
    ElectrochemSolver esolver(grid, cfg);
    ForwardSolution fs = run_forward(grid, cfg, filter, fsolver, esolver, rho);
    return composed_gradient(grid, cfg, filter, fsolver, fs.flow, esolver, fs.electro,
                             fs.density.rho_tilde);
}

OptimizeResult optimize(const Grid& grid, const CaseConfig& cfg, const OptimizeCallbacks& callbacks,
                        const std::vector<double>* rho_init, int start_iter) {
    const int nd = grid.n_design_cells();
    std::vector<double> rho;
    if (rho_init) {
        if (static_cast<int>(rho_init->size()) != nd)
            throw std::invalid_argument("optimize: initial density size mismatch");
        rho = *rho_init;
        for (double v : rho)
            if (v < 0.0 || v > 1.0)
                throw std::invalid_argument("optimize: initial density outside [0, 1]");
    } else {
        rho.assign(nd, cfg.rho_init);
    }

    PdeFilter filter(grid, resolved_radius(grid, cfg));
    FlowSolver fsolver(grid, cfg);
    ElectrochemSolver esolver(grid, cfg);

    OptimizeResult result;
    result.trace.converged = false;

    const int stages = std::max(1, cfg.continuation_stages);
    const int stage_budget = (cfg.opt_max_iter + stages - 1) / stages;
    int it = start_iter;
    const int it_end = start_iter + cfg.opt_max_iter;
    double last_max_drho = 0.0;

    for (int stage = 0; stage < stages && it < it_end; ++stage) {
        CaseConfig scfg = cfg;
        scfg.alpha_fic_multiplier =
            cfg.alpha_fic_multiplier * std::pow(10.0, stage - (stages - 1));
        const bool last_stage = stage == stages - 1;
        const int stage_end = last_stage ? it_end : std::min(it_end, it + stage_budget);

        double move = cfg.move_limit;
        double f_prev = 0.0;
        bool have_prev = false;
        int below_tol = 0;
        int worse = 0;

        for (; it < stage_end; ++it) {
            ForwardSolution fs = run_forward(grid, scfg, filter, fsolver, esolver, rho);
            result.density = fs.density;

            result.trace.records.push_back({it, fs.objective, fs.flow.dp, fs.flow.q_in,
                                            fs.electro.mean_abs_eta, last_max_drho});
            if (callbacks.on_iteration) callbacks.on_iteration(it, fs.density);

            if (have_prev) {
                const double relchg = std::abs(fs.objective - f_prev) /
                                      std::max(std::abs(fs.objective), 1e-300);
                below_tol = relchg < cfg.opt_tol ? below_tol + 1 : 0;
                if (below_tol >= cfg.opt_tol_window) {
                    if (last_stage) result.trace.converged = true;
                    ++it;
                    break;
                }
                if (fs.objective < f_prev) {
                    if (++worse >= 2) {
                        move = std::max(1e-4, 0.5 * move);
                        worse = 0;
                    }
                } else {
                    worse = 0;
                }
            }
            f_prev = fs.objective;
            have_prev = true;

            if (it + 1 >= stage_end) {
                ++it;
                break;
            }

            std::vector<double> grad = composed_gradient(grid, scfg, filter, fsolver, fs.flow,
                                                         esolver, fs.electro,
                                                         fs.density.rho_tilde);
            std::vector<double> rho_new = cfg.slp_signed
                                              ? slp_update(rho, grad, move)
                                              : scaled_ascent_update(rho, grad, move);
            last_max_drho = 0.0;
            for (int d = 0; d < nd; ++d)
                last_max_drho = std::max(last_max_drho, std::abs(rho_new[d] - rho[d]));
            rho = std::move(rho_new);
        }
        if (result.trace.converged) break;
    }

    return result;
}

GradCheckResult gradient_check(const Grid& grid, const CaseConfig& cfg, int ncells, double step) {
    const int nd = grid.n_design_cells();
    if (ncells <= 0 || ncells > nd)
        throw std::invalid_argument("gradient_check: bad sample count");

    std::vector<double> rho(nd, cfg.rho_init);
    PdeFilter filter(grid, resolved_radius(grid, cfg));
    FlowSolver fsolver(grid, cfg);
    ElectrochemSolver esolver(grid, cfg);

    ForwardSolution base = run_forward(grid, cfg, filter, fsolver, esolver, rho);
    std::vector<double> grad = composed_gradient(grid, cfg, filter, fsolver, base.flow, esolver,
                                                 base.electro, base.density.rho_tilde);

    std::mt19937 rng(static_cast<uint32_t>(cfg.seed));
    std::vector<int> cells(nd);
    for (int d = 0; d < nd; ++d) cells[d] = d;
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(ncells);
    std::sort(cells.begin(), cells.end());

    GradCheckResult res;
    std::vector<double> fd(ncells);
    double fd_scale = 0.0;
    for (int t = 0; t < ncells; ++t) {
        const int d = cells[t];
        std::vector<double> r = rho;
        r[d] = rho[d] + step;
        const double fp = run_forward(grid, cfg, filter, fsolver, esolver, r).objective;
        r[d] = rho[d] - step;
        const double fm = run_forward(grid, cfg, filter, fsolver, esolver, r).objective;
        fd[t] = (fp - fm) / (2.0 * step);
        fd_scale = std::max(fd_scale, std::abs(fd[t]));
    }
    for (int t = 0; t < ncells; ++t) {
        const int d = cells[t];
        const double denom = std::max(std::abs(fd[t]), std::max(1e-12 * fd_scale, 1e-300));
        const double rel = std::abs(grad[d] - fd[t]) / denom;
        res.entries.push_back({d, grad[d], fd[t], rel});
        res.max_rel_err = std::max(res.max_rel_err, rel);
    }
    return res;
}

namespace {
constexpr char kSnapshotMagic[8] = {'V', 'R', 'F', 'B', 'R', 'H', 'O', '1'};
}

void write_density_snapshot(const std::string& path, const Grid& grid, int iteration,
                            const std::vector<double>& rho) {
    if (static_cast<int>(rho.size()) != grid.n_design_cells())
        throw std::invalid_argument("write_density_snapshot: density size mismatch");
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
    out.write(kSnapshotMagic, 8);
    const int32_t dims[4] = {grid.nx(), grid.ny(), grid.nz_channel(), iteration};
    out.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    const double spacing[3] = {grid.hx(), grid.hy(), grid.dz(grid.nz() - 1)};
    out.write(reinterpret_cast<const char*>(spacing), sizeof(spacing));
    out.write(reinterpret_cast<const char*>(rho.data()),
              static_cast<std::streamsize>(rho.size() * sizeof(double)));
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

DensitySnapshot read_density_snapshot(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open '" + path + "'");
    char magic[8];
    in.read(magic, 8);
    if (!in || std::memcmp(magic, kSnapshotMagic, 8) != 0)
        throw std::runtime_error("'" + path + "' is not a density snapshot");
    DensitySnapshot snap;
    int32_t dims[4];
    in.read(reinterpret_cast<char*>(dims), sizeof(dims));
    double spacing[3];
    in.read(reinterpret_cast<char*>(spacing), sizeof(spacing));
    if (!in) throw std::runtime_error("truncated snapshot '" + path + "'");
    snap.nx = dims[0];
    snap.ny = dims[1];
    snap.nz = dims[2];
    snap.iteration = dims[3];
    snap.hx = spacing[0];
    snap.hy = spacing[1];
    snap.hz = spacing[2];
    if (snap.nx <= 0 || snap.ny <= 0 || snap.nz <= 0)
        throw std::runtime_error("corrupt snapshot header in '" + path + "'");
    snap.rho.resize(static_cast<size_t>(snap.nx) * snap.ny * snap.nz);
    in.read(reinterpret_cast<char*>(snap.rho.data()),
            static_cast<std::streamsize>(snap.rho.size() * sizeof(double)));
    if (!in) throw std::runtime_error("truncated snapshot '" + path + "'");
    return snap;
}

} // namespace vrfb
