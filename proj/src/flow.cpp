#include "vrfb/flow.hpp"

#include <cmath>
#include <stdexcept>

namespace vrfb {

double alpha_fic_max(const CaseConfig& cfg) {
    return cfg.alpha_fic_multiplier * cfg.viscosity / cfg.permeability();
}

double alpha_fic(double rho, const CaseConfig& cfg) {
    if (rho < 0.0 || rho > 1.0)
        throw std::invalid_argument("alpha_fic: density outside [0, 1]");
    const double q = cfg.q_convexity;
    return q * (1.0 - rho) / (rho + q) * alpha_fic_max(cfg);
}

double alpha_fic_deriv(double rho, const CaseConfig& cfg) {
    if (rho < 0.0 || rho > 1.0)
        throw std::invalid_argument("alpha_fic_deriv: density outside [0, 1]");
    const double q = cfg.q_convexity;
    const double den = rho + q;
    return -q * (1.0 + q) / (den * den) * alpha_fic_max(cfg);
}

std::vector<double> build_alpha_field(const Grid& grid, const std::vector<double>& rho_tilde,
                                      const CaseConfig& cfg) {
    if (static_cast<int>(rho_tilde.size()) != grid.n_design_cells())
        throw std::invalid_argument("build_alpha_field: density size mismatch");
    std::vector<double> alpha(grid.ncells());
    const double alpha_electrode = cfg.viscosity / cfg.permeability();
    for (int c = 0; c < grid.ncells(); ++c) {
        const int d = grid.design_index(c);
        alpha[c] = d < 0 ? alpha_electrode : alpha_fic(rho_tilde[d], cfg);
    }
    return alpha;
}

void FlowState::cell_velocity(const Grid& g, int c, double& ux, double& uy, double& uz) const {
    int i, j, k;
    g.cell_ijk(c, i, j, k);
    ux = 0.5 * (u[g.fx(i, j, k)] + u[g.fx(i + 1, j, k)]);
    uy = 0.5 * (v[g.fy(i, j, k)] + v[g.fy(i, j + 1, k)]);
    uz = 0.5 * (w[g.fz(i, j, k)] + w[g.fz(i, j, k + 1)]);
}

double FlowState::cell_speed(const Grid& g, int c) const {
    double ux, uy, uz;
    cell_velocity(g, c, ux, uy, uz);
    return std::sqrt(ux * ux + uy * uy + uz * uz);
}

void FlowState::scale(double s, double p_out) {
    for (double& x : u) x *= s;
    for (double& x : v) x *= s;
    for (double& x : w) x *= s;
    for (double& x : p) x = p_out + (x - p_out) * s;
    q_in *= s;
    q_out *= s;
    dp *= s;
}

namespace {

struct Assembler {
    const Grid& g;
    const CaseConfig& cfg;
    const std::vector<double>& alpha;
    double dp;
    BrinkmanSystem sys;
    std::vector<Eigen::Triplet<double>> trip;
    double mu;

    Assembler(const Grid& grid, const std::vector<double>& a, const CaseConfig& c, double dp_)
        : g(grid), cfg(c), alpha(a), dp(dp_), mu(c.viscosity) {}

    bool traction_x(int iside, int j, int k0, int k1) const {
        // A tangential face touching the x boundary gets a zero-stress ghost
        // only if the whole adjacent boundary strip is a pressure patch.
        const int i = iside == 0 ? 0 : g.nx();
        const Patch p0 = g.patch_fx(i, j, k0);
        const Patch p1 = g.patch_fx(i, j, k1);
        const bool open0 = (p0 == Patch::Inlet || p0 == Patch::Outlet);
        const bool open1 = (p1 == Patch::Inlet || p1 == Patch::Outlet);
        return open0 && open1;
    }

    void couple(int row, int nb_dof, double coeff, double& diag) {
        // Viscous link: +coeff on the diagonal, -coeff to the neighbor;
        // Dirichlet neighbors hold zero velocity so only the diagonal stays.
        diag += coeff;
        if (nb_dof >= 0) trip.emplace_back(row, nb_dof, -coeff);
    }

    void assemble();
    void momentum_x(int dof, int i, int j, int k);
    void momentum_y(int dof, int i, int j, int k);
    void momentum_z(int dof, int i, int j, int k);
    void continuity(int c, int i, int j, int k);
};

void Assembler::assemble() {
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    sys.dof_u.assign(g.nfx(), -1);
    sys.dof_v.assign(g.nfy(), -1);
    sys.dof_w.assign(g.nfz(), -1);

    int next = 0;
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i)
                if (g.patch_fx(i, j, k) != Patch::SideWall) sys.dof_u[g.fx(i, j, k)] = next++;
    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) sys.dof_v[g.fy(i, j, k)] = next++;
    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) sys.dof_w[g.fz(i, j, k)] = next++;
    sys.nvel = next;
    sys.ncells = g.ncells();
    const int n = sys.nvel + sys.ncells;
    sys.rhs = Eigen::VectorXd::Zero(n);
    sys.vel_dofs.resize(sys.nvel);
    trip.reserve(static_cast<size_t>(n) * 10);

    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                const int d = sys.dof_u[g.fx(i, j, k)];
                if (d >= 0) momentum_x(d, i, j, k);
            }
    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) momentum_y(sys.dof_v[g.fy(i, j, k)], i, j, k);
    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) momentum_z(sys.dof_w[g.fz(i, j, k)], i, j, k);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) continuity(g.cell(i, j, k), i, j, k);

    sys.mat.resize(n, n);
    sys.mat.setFromTriplets(trip.begin(), trip.end());
    sys.mat.makeCompressed();
}

void Assembler::momentum_x(int dof, int i, int j, int k) {
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const double hx = g.hx(), hy = g.hy(), dzk = g.dz(k);
    const bool at_in = (i == 0), at_out = (i == nx);
    const double cvx = (at_in || at_out) ? 0.5 * hx : hx;
    const double area_p = hy * dzk;

    VelDof& vd = sys.vel_dofs[dof];
    vd.orient = 0;
    vd.face = g.fx(i, j, k);
    vd.vol = cvx * hy * dzk;
    double abar = 0.0;
    if (at_in) {
        vd.cell[0] = g.cell(0, j, k);
        vd.cell[1] = -1;
        vd.wcell[0] = 1.0;
        vd.wcell[1] = 0.0;
    } else if (at_out) {
        vd.cell[0] = g.cell(nx - 1, j, k);
        vd.cell[1] = -1;
        vd.wcell[0] = 1.0;
        vd.wcell[1] = 0.0;
    } else {
        vd.cell[0] = g.cell(i - 1, j, k);
        vd.cell[1] = g.cell(i, j, k);
        vd.wcell[0] = vd.wcell[1] = 0.5;
    }
    for (int s = 0; s < 2; ++s)
        if (vd.cell[s] >= 0) abar += vd.wcell[s] * alpha[vd.cell[s]];

    double diag = abar * vd.vol;

    // normal (x) viscous links; pressure boundaries impose zero normal stress
    if (i > 0) couple(dof, sys.dof_u[g.fx(i - 1, j, k)], mu * hy * dzk / hx, diag);
    if (i < nx) couple(dof, sys.dof_u[g.fx(i + 1, j, k)], mu * hy * dzk / hx, diag);

    // tangential y
    {
        const double area = cvx * dzk;
        if (j > 0)
            couple(dof, sys.dof_u[g.fx(i, j - 1, k)], mu * area / hy, diag);
        else
            diag += mu * area / (0.5 * hy);
        if (j < ny - 1)
            couple(dof, sys.dof_u[g.fx(i, j + 1, k)], mu * area / hy, diag);
        else
            diag += mu * area / (0.5 * hy);
    }
    // tangential z
    {
        const double area = cvx * hy;
        if (k > 0)
            couple(dof, sys.dof_u[g.fx(i, j, k - 1)], mu * area / (0.5 * (dzk + g.dz(k - 1))), diag);
        else
            diag += mu * area / (0.5 * dzk);
        if (k < nz - 1)
            couple(dof, sys.dof_u[g.fx(i, j, k + 1)], mu * area / (0.5 * (dzk + g.dz(k + 1))), diag);
        else
            diag += mu * area / (0.5 * dzk);
    }

    trip.emplace_back(dof, dof, diag);

    // pressure gradient (p_R - p_L) * A
    const int pcol0 = sys.nvel;
    if (at_in) {
        trip.emplace_back(dof, pcol0 + g.cell(0, j, k), area_p);
        sys.rhs[dof] += dp * area_p; // p_L = dp moved to the right-hand side
    } else if (at_out) {
        trip.emplace_back(dof, pcol0 + g.cell(nx - 1, j, k), -area_p);
        // p_R = 0 in the internal normalization
    } else {
        trip.emplace_back(dof, pcol0 + g.cell(i, j, k), area_p);
        trip.emplace_back(dof, pcol0 + g.cell(i - 1, j, k), -area_p);
    }
}

void Assembler::momentum_y(int dof, int i, int j, int k) {
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const double hx = g.hx(), hy = g.hy(), dzk = g.dz(k);
    const double area_p = hx * dzk;

    VelDof& vd = sys.vel_dofs[dof];
    vd.orient = 1;
    vd.face = g.fy(i, j, k);
    vd.vol = hx * hy * dzk;
    vd.cell[0] = g.cell(i, j - 1, k);
    vd.cell[1] = g.cell(i, j, k);
    vd.wcell[0] = vd.wcell[1] = 0.5;
    const double abar = 0.5 * (alpha[vd.cell[0]] + alpha[vd.cell[1]]);

    double diag = abar * vd.vol;

    // normal (y); boundary rows j=0/ny are Dirichlet faces at distance hy
    {
        const double c = mu * hx * dzk / hy;
        couple(dof, j - 1 >= 1 ? sys.dof_v[g.fy(i, j - 1, k)] : -1, c, diag);
        couple(dof, j + 1 <= ny - 1 ? sys.dof_v[g.fy(i, j + 1, k)] : -1, c, diag);
    }
    // tangential x: ghost is zero-stress where the boundary strip is a pressure patch
    {
        const double area = hy * dzk;
        if (i > 0)
            couple(dof, sys.dof_v[g.fy(i - 1, j, k)], mu * area / hx, diag);
        else if (!traction_x(0, j - 1, k, k) || !traction_x(0, j, k, k))
            diag += mu * area / (0.5 * hx);
        if (i < nx - 1)
            couple(dof, sys.dof_v[g.fy(i + 1, j, k)], mu * area / hx, diag);
        else if (!traction_x(1, j - 1, k, k) || !traction_x(1, j, k, k))
            diag += mu * area / (0.5 * hx);
    }
    // tangential z
    {
        const double area = hx * hy;
        if (k > 0)
            couple(dof, sys.dof_v[g.fy(i, j, k - 1)], mu * area / (0.5 * (dzk + g.dz(k - 1))), diag);
        else
            diag += mu * area / (0.5 * dzk);
        if (k < nz - 1)
            couple(dof, sys.dof_v[g.fy(i, j, k + 1)], mu * area / (0.5 * (dzk + g.dz(k + 1))), diag);
        else
            diag += mu * area / (0.5 * dzk);
    }

    trip.emplace_back(dof, dof, diag);
    trip.emplace_back(dof, sys.nvel + g.cell(i, j, k), area_p);
    trip.emplace_back(dof, sys.nvel + g.cell(i, j - 1, k), -area_p);
}

void Assembler::momentum_z(int dof, int i, int j, int k) {
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    const double hx = g.hx(), hy = g.hy();
    const double dzd = g.dz(k - 1), dzu = g.dz(k);
    const double area_p = hx * hy;
    const double cvz = 0.5 * (dzd + dzu);

    VelDof& vd = sys.vel_dofs[dof];
    vd.orient = 2;
    vd.face = g.fz(i, j, k);
    vd.vol = hx * hy * cvz;
    vd.cell[0] = g.cell(i, j, k - 1);
    vd.cell[1] = g.cell(i, j, k);
    vd.wcell[0] = dzd / (dzd + dzu);
    vd.wcell[1] = dzu / (dzd + dzu);
    const double abar = vd.wcell[0] * alpha[vd.cell[0]] + vd.wcell[1] * alpha[vd.cell[1]];

    double diag = abar * vd.vol;

    // normal (z); k=0 and k=nz are Dirichlet wall faces
    couple(dof, k - 1 >= 1 ? sys.dof_w[g.fz(i, j, k - 1)] : -1, mu * area_p / dzd, diag);
    couple(dof, k + 1 <= nz - 1 ? sys.dof_w[g.fz(i, j, k + 1)] : -1, mu * area_p / dzu, diag);

    // tangential x
    {
        const double area = hy * cvz;
        if (i > 0)
            couple(dof, sys.dof_w[g.fz(i - 1, j, k)], mu * area / hx, diag);
        else if (!traction_x(0, j, k - 1, k))
            diag += mu * area / (0.5 * hx);
        if (i < nx - 1)
            couple(dof, sys.dof_w[g.fz(i + 1, j, k)], mu * area / hx, diag);
        else if (!traction_x(1, j, k - 1, k))
            diag += mu * area / (0.5 * hx);
    }
    // tangential y
    {
        const double area = hx * cvz;
        if (j > 0)
            couple(dof, sys.dof_w[g.fz(i, j - 1, k)], mu * area / hy, diag);
        else
            diag += mu * area / (0.5 * hy);
        if (j < ny - 1)
            couple(dof, sys.dof_w[g.fz(i, j + 1, k)], mu * area / hy, diag);
        else
            diag += mu * area / (0.5 * hy);
    }

    trip.emplace_back(dof, dof, diag);
    trip.emplace_back(dof, sys.nvel + g.cell(i, j, k), area_p);
    trip.emplace_back(dof, sys.nvel + g.cell(i, j, k - 1), -area_p);
}

void Assembler::continuity(int c, int i, int j, int k) {
    // Negated divergence row so the saddle block is G^T.
    const int row = sys.nvel + c;
    const double axk = g.ax(k), ayk = g.ay(k), azz = g.az();
    const int fxm = sys.dof_u[g.fx(i, j, k)], fxp = sys.dof_u[g.fx(i + 1, j, k)];
    const int fym = sys.dof_v[g.fy(i, j, k)], fyp = sys.dof_v[g.fy(i, j + 1, k)];
    const int fzm = sys.dof_w[g.fz(i, j, k)], fzp = sys.dof_w[g.fz(i, j, k + 1)];
    if (fxm >= 0) trip.emplace_back(row, fxm, axk);
    if (fxp >= 0) trip.emplace_back(row, fxp, -axk);
    if (fym >= 0) trip.emplace_back(row, fym, ayk);
    if (fyp >= 0) trip.emplace_back(row, fyp, -ayk);
    if (fzm >= 0) trip.emplace_back(row, fzm, azz);
    if (fzp >= 0) trip.emplace_back(row, fzp, -azz);
}

} // namespace

BrinkmanSystem assemble_brinkman(const Grid& grid, const std::vector<double>& alpha_cell,
                                 const CaseConfig& cfg, double dp) {
    if (static_cast<int>(alpha_cell.size()) != grid.ncells())
        throw std::invalid_argument("assemble_brinkman: alpha field size mismatch");
    for (double a : alpha_cell)
        if (a < 0.0 || !std::isfinite(a))
            throw std::invalid_argument("assemble_brinkman: alpha must be finite and non-negative");
    Assembler a(grid, alpha_cell, cfg, dp);
    a.assemble();
    return std::move(a.sys);
}

FlowSolver::FlowSolver(const Grid& grid, const CaseConfig& cfg) : grid_(grid), cfg_(cfg) {}

void FlowSolver::assemble(const std::vector<double>& alpha_cell) {
    // Assemble against a unit pressure drop; solves scale the solution.
    sys_ = assemble_brinkman(grid_, alpha_cell, cfg_, 1.0);
    lu_.compute(sys_.mat);
    if (lu_.info() != Eigen::Success)
        throw std::runtime_error("flow solve: factorization failed (singular system; "
                                 "check that inlet/outlet pressure patches exist)");
    assembled_ = true;
}

FlowState FlowSolver::solve() const { return solve(cfg_.p_in - cfg_.p_out); }

FlowState FlowSolver::solve(double dp) const {
    if (!assembled_)
        throw std::logic_error("FlowSolver::solve before assemble");
    Eigen::VectorXd x = lu_.solve(sys_.rhs);
    if (lu_.info() != Eigen::Success)
        throw std::runtime_error("flow solve: back substitution failed");
    // one refinement step; the raw LU error jumps with the pivot path and
    // would dominate finite-difference checks of downstream quantities
    x += lu_.solve(sys_.rhs - sys_.mat * x);
    const double rel_res = (sys_.mat * x - sys_.rhs).norm() / sys_.rhs.norm();
    if (!(rel_res <= cfg_.flow_rel_tol))
        throw std::runtime_error("flow solve: residual " + std::to_string(rel_res) +
                                 " above tolerance " + std::to_string(cfg_.flow_rel_tol));

    FlowState st;
    st.u.assign(grid_.nfx(), 0.0);
    st.v.assign(grid_.nfy(), 0.0);
    st.w.assign(grid_.nfz(), 0.0);
    st.p.assign(grid_.ncells(), 0.0);
    for (int f = 0; f < grid_.nfx(); ++f)
        if (sys_.dof_u[f] >= 0) st.u[f] = x[sys_.dof_u[f]];
    for (int f = 0; f < grid_.nfy(); ++f)
        if (sys_.dof_v[f] >= 0) st.v[f] = x[sys_.dof_v[f]];
    for (int f = 0; f < grid_.nfz(); ++f)
        if (sys_.dof_w[f] >= 0) st.w[f] = x[sys_.dof_w[f]];
    for (int c = 0; c < grid_.ncells(); ++c) st.p[c] = x[sys_.nvel + c];

    st.q_in = st.q_out = 0.0;
    for (int k = 0; k < grid_.nz(); ++k)
        for (int j = 0; j < grid_.ny(); ++j) {
            if (grid_.patch_fx(0, j, k) == Patch::Inlet) st.q_in += st.u[grid_.fx(0, j, k)] * grid_.ax(k);
            if (grid_.patch_fx(grid_.nx(), j, k) == Patch::Outlet)
                st.q_out += st.u[grid_.fx(grid_.nx(), j, k)] * grid_.ax(k);
        }
    st.dp = 1.0;
    st.scale(dp, cfg_.p_out);
    return st;
}

Eigen::VectorXd FlowSolver::solve_adjoint(const Eigen::VectorXd& rhs) const {
    if (!assembled_)
        throw std::logic_error("FlowSolver::solve_adjoint before assemble");
    // The saddle operator is symmetric, so the forward factorization applies.
    Eigen::VectorXd lam = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success)
        throw std::runtime_error("flow adjoint solve failed");
    lam += lu_.solve(rhs - sys_.mat * lam);
    return lam;
}

Eigen::VectorXd FlowSolver::pack_velocity_rhs(const std::vector<double>& gu,
                                              const std::vector<double>& gv,
                                              const std::vector<double>& gw) const {
    Eigen::VectorXd r = Eigen::VectorXd::Zero(sys_.nvel + sys_.ncells);
    for (int f = 0; f < grid_.nfx(); ++f)
        if (sys_.dof_u[f] >= 0) r[sys_.dof_u[f]] = gu[f];
    for (int f = 0; f < grid_.nfy(); ++f)
        if (sys_.dof_v[f] >= 0) r[sys_.dof_v[f]] = gv[f];
    for (int f = 0; f < grid_.nfz(); ++f)
        if (sys_.dof_w[f] >= 0) r[sys_.dof_w[f]] = gw[f];
    return r;
}

std::vector<double> FlowSolver::alpha_sensitivity(const FlowState& state,
                                                  const Eigen::VectorXd& lambda) const {
    std::vector<double> grad(grid_.ncells(), 0.0);
    for (int d = 0; d < sys_.nvel; ++d) {
        const VelDof& vd = sys_.vel_dofs[d];
        const double uf = vd.orient == 0 ? state.u[vd.face]
                        : vd.orient == 1 ? state.v[vd.face]
                                         : state.w[vd.face];
        const double s = -lambda[d] * uf * vd.vol;
        for (int t = 0; t < 2; ++t)
            if (vd.cell[t] >= 0) grad[vd.cell[t]] += s * vd.wcell[t];
    }
    return grad;
}

FlowState solve_flow(const Grid& grid, const std::vector<double>& rho_tilde,
                     const CaseConfig& cfg) {
    FlowSolver solver(grid, cfg);
    solver.assemble(build_alpha_field(grid, rho_tilde, cfg));
    return solver.solve();
}

} // namespace vrfb
