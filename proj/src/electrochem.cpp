#include "vrfb/electrochem.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "vrfb/kinetics.hpp"

namespace vrfb {

namespace {

// Bernoulli function B(x) = x / (e^x - 1) of the exponential-fitting flux.
double bernoulli(double x) {
    if (std::abs(x) < 1e-5) return 1.0 - 0.5 * x + x * x / 12.0;
    if (x > 500.0) return 0.0;
    if (x < -500.0) return -x;
    return x / std::expm1(x);
}

double bernoulli_deriv(double x) {
    if (std::abs(x) < 1e-4) return -0.5 + x / 6.0 - x * x * x / 180.0;
    if (x > 500.0) return 0.0;
    if (x < -500.0) return -1.0;
    const double em = std::expm1(x);
    return (em - x * (em + 1.0)) / (em * em);
}

struct TransportFace {
    enum Kind { InteriorF, InletF, OutletF };
    Kind kind;
    int cl, cr;    // adjacent cells (ghost side unused for boundary kinds)
    double trans;  // transmissibility T = area / sum(d_i / D_i)
    double area;
    double u;      // face-normal velocity, L -> R
    int orient;    // 0/1/2 for the adjoint scatter
    int faceid;
};

struct SpeciesOperator {
    std::vector<TransportFace> faces;
    Eigen::SparseMatrix<double> mat;
    Eigen::VectorXd bc_rhs;
};

struct PotentialFace {
    int cl, cr;
    double area, dl, dr;
};

double kappa_of_cell(double c2, double c3, const CaseConfig& cfg) {
    if (cfg.kappa_mode == KappaMode::Constant) return cfg.kappa_e_const;
    return effective_ionic_conductivity(c2, c3, cfg);
}

SpeciesOperator build_species_operator(const Grid& g, const FlowState& flow, double diff,
                                       const CaseConfig& cfg, double c_in) {
    SpeciesOperator op;
    const int nx = g.nx(), ny = g.ny(), nz = g.nz();
    std::vector<double> dcell(g.ncells());
    for (int c = 0; c < g.ncells(); ++c)
        dcell[c] = effective_diffusivity(diff, g.region(c), cfg);

    auto add_interior = [&](int cl, int cr, double area, double dl, double dr, double u,
                            int orient, int faceid) {
        TransportFace f;
        f.kind = TransportFace::InteriorF;
        f.cl = cl;
        f.cr = cr;
        f.area = area;
        f.trans = area / (dl / dcell[cl] + dr / dcell[cr]);
        f.u = u;
        f.orient = orient;
        f.faceid = faceid;
        op.faces.push_back(f);
    };

    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i <= nx; ++i) {
                const int fid = g.fx(i, j, k);
                if (i > 0 && i < nx) {
                    add_interior(g.cell(i - 1, j, k), g.cell(i, j, k), g.ax(k), 0.5 * g.hx(),
                                 0.5 * g.hx(), flow.u[fid], 0, fid);
                    continue;
                }
                const Patch p = g.patch_fx(i, j, k);
                if (p == Patch::Inlet) {
                    TransportFace f;
                    f.kind = TransportFace::InletF;
                    f.cl = -1;
                    f.cr = g.cell(0, j, k);
                    f.area = g.ax(k);
                    f.trans = f.area * dcell[f.cr] / (0.5 * g.hx());
                    f.u = flow.u[fid];
                    f.orient = 0;
                    f.faceid = fid;
                    op.faces.push_back(f);
                } else if (p == Patch::Outlet) {
                    TransportFace f;
                    f.kind = TransportFace::OutletF;
                    f.cl = g.cell(nx - 1, j, k);
                    f.cr = -1;
                    f.area = g.ax(k);
                    f.trans = 0.0;
                    f.u = flow.u[fid];
                    f.orient = 0;
                    f.faceid = fid;
                    op.faces.push_back(f);
                }
                // side walls carry no flux
            }
    for (int k = 0; k < nz; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const int fid = g.fy(i, j, k);
                add_interior(g.cell(i, j - 1, k), g.cell(i, j, k), g.ay(k), 0.5 * g.hy(),
                             0.5 * g.hy(), flow.v[fid], 1, fid);
            }
    for (int k = 1; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                const int fid = g.fz(i, j, k);
                add_interior(g.cell(i, j, k - 1), g.cell(i, j, k), g.az(), 0.5 * g.dz(k - 1),
                             0.5 * g.dz(k), flow.w[fid], 2, fid);
            }

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(op.faces.size() * 4);
    op.bc_rhs = Eigen::VectorXd::Zero(g.ncells());
    for (const TransportFace& f : op.faces) {
        switch (f.kind) {
            case TransportFace::InteriorF: {
                const double pe = f.u * f.area / f.trans;
                const double bm = f.trans * bernoulli(-pe);
                const double bp = f.trans * bernoulli(pe);
                trip.emplace_back(f.cl, f.cl, bm);
                trip.emplace_back(f.cl, f.cr, -bp);
                trip.emplace_back(f.cr, f.cl, -bm);
                trip.emplace_back(f.cr, f.cr, bp);
                break;
            }
            case TransportFace::InletF: {
                const double pe = f.u * f.area / f.trans;
                trip.emplace_back(f.cr, f.cr, f.trans * bernoulli(pe));
                op.bc_rhs[f.cr] += f.trans * bernoulli(-pe) * c_in;
                break;
            }
            case TransportFace::OutletF: {
                // zero diffusive flux: purely advective outflow at the cell value
                trip.emplace_back(f.cl, f.cl, f.area * f.u);
                break;
            }
        }
    }
    op.mat.resize(g.ncells(), g.ncells());
    op.mat.setFromTriplets(trip.begin(), trip.end());
    op.mat.makeCompressed();
    return op;
}

std::vector<PotentialFace> build_potential_faces(const Grid& g) {
    std::vector<PotentialFace> faces;
    const int nx = g.nx(), ny = g.ny(), nze = g.nz_electrode();
    for (int k = 0; k < nze; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 1; i < nx; ++i)
                faces.push_back({g.cell(i - 1, j, k), g.cell(i, j, k), g.ax(k), 0.5 * g.hx(),
                                 0.5 * g.hx()});
    for (int k = 0; k < nze; ++k)
        for (int j = 1; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                faces.push_back({g.cell(i, j - 1, k), g.cell(i, j, k), g.ay(k), 0.5 * g.hy(),
                                 0.5 * g.hy()});
    for (int k = 1; k < nze; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                faces.push_back({g.cell(i, j, k - 1), g.cell(i, j, k), g.az(), 0.5 * g.dz(k - 1),
                                 0.5 * g.dz(k)});
    return faces;
}

Eigen::SparseMatrix<double> assemble_potential(const std::vector<PotentialFace>& faces, int ne,
                                               const std::vector<double>& cond, int pin,
                                               const std::vector<double>* mass = nullptr) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(faces.size() * 4 + ne);
    for (const PotentialFace& f : faces) {
        const double t = f.area / (f.dl / cond[f.cl] + f.dr / cond[f.cr]);
        const bool lp = f.cl == pin, rp = f.cr == pin;
        // symmetric pinning: drop the pinned row and column
        if (!lp && !rp) {
            trip.emplace_back(f.cl, f.cl, t);
            trip.emplace_back(f.cl, f.cr, -t);
            trip.emplace_back(f.cr, f.cl, -t);
            trip.emplace_back(f.cr, f.cr, t);
        } else if (lp && !rp) {
            trip.emplace_back(f.cr, f.cr, t);
        } else if (rp && !lp) {
            trip.emplace_back(f.cl, f.cl, t);
        }
    }
    if (pin >= 0) trip.emplace_back(pin, pin, 1.0);
    if (mass)
        for (int c = 0; c < ne; ++c)
            if (c != pin) trip.emplace_back(c, c, (*mass)[c]);
    Eigen::SparseMatrix<double> m(ne, ne);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

constexpr double kConcFloor = 1e-9; // closure guard during transient iterates

using D1 = Dual<1>;
using D5 = Dual<5>;

// One step of iterative refinement. Keeps the solution continuous in the
// matrix data at machine level (raw LU error jumps with the pivot path,
// which otherwise dominates finite-difference gradient checks).
template <typename SolverT>
Eigen::VectorXd solve_refined(const SolverT& solver, const Eigen::SparseMatrix<double>& a,
                              const Eigen::VectorXd& b) {
    Eigen::VectorXd x = solver.solve(b);
    x += solver.solve(b - a * x);
    return x;
}

} // namespace

ElectrochemSolver::ElectrochemSolver(const Grid& grid, const CaseConfig& cfg)
    : grid_(grid), cfg_(cfg) {
    pin_cell_ = grid_.cell(0, 0, grid_.nz_electrode() - 1);
}

ElectroState ElectrochemSolver::solve(const FlowState& flow) const {
    const Grid& g = grid_;
    const int n = g.ncells();
    const int ne = g.n_electrode_cells();
    const double farad = cfg_.faraday;
    const double iapp = cfg_.current;
    const double area = cfg_.electrode_area();

    ElectroState st;
    st.c2.assign(n, cfg_.c_in_v2);
    st.c3.assign(n, cfg_.c_in_v3);
    st.phis.assign(ne, 0.0);
    st.phie.assign(ne, 0.0);
    st.j.assign(ne, 0.0);
    st.eta.assign(ne, 0.0);
    st.u_ocp.assign(ne, 0.0);
    st.c2s.assign(ne, 0.0);
    st.c3s.assign(ne, 0.0);
    st.km.assign(ne, 0.0);
    st.speed.assign(ne, 0.0);
    for (int c = 0; c < ne; ++c) st.speed[c] = flow.cell_speed(g, c);

    // fixed operators
    SpeciesOperator op2 = build_species_operator(g, flow, cfg_.diff_v2, cfg_, cfg_.c_in_v2);
    const bool shared = cfg_.diff_v2 == cfg_.diff_v3 && cfg_.c_in_v2 == cfg_.c_in_v3;
    SpeciesOperator op3 =
        shared ? SpeciesOperator{} : build_species_operator(g, flow, cfg_.diff_v3, cfg_, cfg_.c_in_v3);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu2, lu3;
    lu2.compute(op2.mat);
    if (lu2.info() != Eigen::Success)
        throw std::runtime_error("electrochem: species operator factorization failed");
    if (!shared) {
        lu3.compute(op3.mat);
        if (lu3.info() != Eigen::Success)
            throw std::runtime_error("electrochem: species operator factorization failed");
    }
    const SpeciesOperator& op3r = shared ? op2 : op3;

    const std::vector<PotentialFace> pot_faces = build_potential_faces(g);
    const std::vector<double> sigma(ne, effective_sigma_s(cfg_));

    // galvanostatic boundary data
    const double q_collector = iapp / area;  // electronic feed through the electrode top
    const double q_membrane = -iapp / area;  // ionic current entering at the membrane

    std::vector<double> vol(ne);
    for (int c = 0; c < ne; ++c) vol[c] = g.cell_volume(c);
    const double az = g.az();

    auto closure_at = [&](int c, double delta) {
        const double c2c = std::max(st.c2[c], kConcFloor);
        const double c3c = std::max(st.c3[c], kConcFloor);
        return evaluate_cell<double>(c2c, c3c, st.phis[c], st.phie[c] + delta, st.speed[c], cfg_);
    };

    // Shift phi_e so the total reaction current matches the applied current.
    // G(delta) = sum_c V_c j_c(eta_c - delta) - I is strictly increasing.
    auto level_shift = [&]() {
        auto G = [&](double delta, double& slope) {
            double gsum = -iapp, ssum = 0.0;
            for (int c = 0; c < ne; ++c) {
                const double c2c = std::max(st.c2[c], kConcFloor);
                const double c3c = std::max(st.c3[c], kConcFloor);
                const CellKinetics<D1> kin = evaluate_cell<D1>(
                    D1(c2c), D1(c3c), D1(st.phis[c]), D1::seed(st.phie[c] + delta, 0),
                    D1(st.speed[c]), cfg_);
                gsum += vol[c] * kin.j.v;
                ssum += vol[c] * kin.j.d[0]; // d j / d delta (positive)
            }
            slope = ssum;
            return gsum;
        };
        double lo = -2.0, hi = 2.0, slope;
        double glo = G(lo, slope), ghi = G(hi, slope);
        int expand = 0;
        while (glo > 0.0 || ghi < 0.0) {
            if (++expand > 12)
                throw std::runtime_error(
                    "electrochem: applied current exceeds the mass-transfer-limited current");
            lo *= 2.0;
            hi *= 2.0;
            glo = G(lo, slope);
            ghi = G(hi, slope);
        }
        double delta = 0.0;
        const double gtol = 1e-12 * std::max(1.0, std::abs(iapp));
        for (int it = 0; it < 200; ++it) {
            const double gv = G(delta, slope);
            if (std::abs(gv) <= gtol) break;
            if (gv > 0.0)
                hi = delta;
            else
                lo = delta;
            double next = slope > 0.0 ? delta - gv / slope : 0.5 * (lo + hi);
            if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
            if (std::abs(next - delta) <= 1e-16 * (1.0 + std::abs(delta))) {
                delta = next;
                break;
            }
            delta = next;
        }
        for (int c = 0; c < ne; ++c) st.phie[c] += delta;
    };

    auto update_kinetics = [&](std::vector<double>& jout) {
        for (int c = 0; c < ne; ++c) {
            const CellKinetics<double> kin = closure_at(c, 0.0);
            jout[c] = kin.j;
            st.eta[c] = kin.eta;
            st.u_ocp[c] = kin.u_ocp;
            st.c2s[c] = kin.c2s;
            st.c3s[c] = kin.c3s;
            st.km[c] = kin.km;
            if (kin.clamped) st.bv_clamped = true;
        }
    };

    level_shift();
    std::vector<double> j_src(ne, 0.0);
    update_kinetics(j_src);

    Eigen::VectorXd rhs(n), sol(n);
    Eigen::VectorXd rhs_e(ne), sol_e(ne);
    std::vector<double> j_new(ne, 0.0);
    std::vector<double> c2_prev, c3_prev, phis_prev, phie_prev, j_prev;
    double omega = cfg_.under_relax_j;
    double last_update = std::numeric_limits<double>::infinity();
    int grow_count = 0;
    int stall_count = 0;
    bool converged = false;

    // update norms relative to a per-field scale floor so fields that are
    // legitimately zero (phi_s at zero current) read as converged
    const double conc_scale = std::max(cfg_.c_in_v2, cfg_.c_in_v3);
    const double pot_scale = std::max(1e-3, std::abs(cfg_.u0));
    const double j_scale =
        1e-6 * exchange_current_density(cfg_.c_in_v2, cfg_.c_in_v3, cfg_);
    auto rel_change = [](const std::vector<double>& a, const std::vector<double>& b,
                         double floor_scale) {
        double num = 0.0, den = floor_scale;
        for (size_t i = 0; i < a.size(); ++i) {
            num = std::max(num, std::abs(a[i] - b[i]));
            den = std::max(den, std::abs(a[i]));
        }
        return num / den;
    };

    for (int it = 1; it <= cfg_.picard_max_iter; ++it) {
        c2_prev = st.c2;
        c3_prev = st.c3;
        phis_prev = st.phis;
        phie_prev = st.phie;
        j_prev = j_src;

        // species transport with frozen sources s2 = +j/F, s3 = -j/F
        rhs = op2.bc_rhs;
        for (int c = 0; c < ne; ++c) rhs[c] += vol[c] * j_src[c] / farad;
        sol = solve_refined(lu2, op2.mat, rhs);
        for (int c = 0; c < n; ++c) st.c2[c] = sol[c];

        rhs = op3r.bc_rhs;
        for (int c = 0; c < ne; ++c) rhs[c] -= vol[c] * j_src[c] / farad;
        sol = shared ? solve_refined(lu2, op2.mat, rhs) : solve_refined(lu3, op3.mat, rhs);
        for (int c = 0; c < n; ++c) st.c3[c] = sol[c];

        // Coupled Newton step on the potential pair with frozen concentrations
        // and sources: the 2x2 kinetics coupling m (v - w)^2, m = V|dj/deta|,
        // controls both the soft lateral modes and the joint-shift mode that
        // make the frozen-source iteration stall. The block system
        //   [[A_sigma + m, -m], [-m, A_kappa + m]]
        // is SPD once phi_s is pinned.
        std::vector<double> kap(ne);
        for (int c = 0; c < ne; ++c)
            kap[c] = kappa_of_cell(std::max(st.c2[c], kConcFloor), std::max(st.c3[c], kConcFloor),
                                   cfg_);
        std::vector<double> jhat(ne), mass(ne);
        for (int c = 0; c < ne; ++c) {
            const double c2c = std::max(st.c2[c], kConcFloor);
            const double c3c = std::max(st.c3[c], kConcFloor);
            const CellKinetics<D1> kin =
                evaluate_cell<D1>(D1(c2c), D1(c3c), D1::seed(st.phis[c], 0), D1(st.phie[c]),
                                  D1(st.speed[c]), cfg_);
            jhat[c] = kin.j.v;
            mass[c] = std::max(0.0, -kin.j.d[0]) * vol[c];
        }

        // residuals of both potential equations at the current iterate
        Eigen::VectorXd resid = Eigen::VectorXd::Zero(2 * ne);
        auto stencil_apply = [&](const std::vector<double>& cond, const std::vector<double>& phi,
                                 int off) {
            for (const PotentialFace& f : pot_faces) {
                const double t = f.area / (f.dl / cond[f.cl] + f.dr / cond[f.cr]);
                const double flux = t * (phi[f.cl] - phi[f.cr]);
                resid[off + f.cl] += flux;
                resid[off + f.cr] -= flux;
            }
        };
        stencil_apply(sigma, st.phis, 0);
        stencil_apply(kap, st.phie, ne);
        for (int jj = 0; jj < g.ny(); ++jj)
            for (int i = 0; i < g.nx(); ++i) {
                resid[g.cell(i, jj, g.nz_electrode() - 1)] += q_collector * az;
                resid[ne + g.cell(i, jj, 0)] += q_membrane * az;
            }
        for (int c = 0; c < ne; ++c) {
            resid[c] -= vol[c] * jhat[c];
            resid[ne + c] += vol[c] * jhat[c];
        }
        resid[pin_cell_] = 0.0;

        std::vector<Eigen::Triplet<double>> ptrip;
        ptrip.reserve(pot_faces.size() * 8 + 3 * ne);
        auto stencil_triplets = [&](const std::vector<double>& cond, int off, int pin) {
            for (const PotentialFace& f : pot_faces) {
                const double t = f.area / (f.dl / cond[f.cl] + f.dr / cond[f.cr]);
                const bool lp = off + f.cl == pin, rp = off + f.cr == pin;
                if (!lp) {
                    ptrip.emplace_back(off + f.cl, off + f.cl, t);
                    if (!rp) ptrip.emplace_back(off + f.cl, off + f.cr, -t);
                }
                if (!rp) {
                    ptrip.emplace_back(off + f.cr, off + f.cr, t);
                    if (!lp) ptrip.emplace_back(off + f.cr, off + f.cl, -t);
                }
            }
        };
        stencil_triplets(sigma, 0, pin_cell_);
        stencil_triplets(kap, ne, -1);
        ptrip.emplace_back(pin_cell_, pin_cell_, 1.0);
        for (int c = 0; c < ne; ++c) {
            ptrip.emplace_back(ne + c, ne + c, mass[c]);
            if (c != pin_cell_) {
                ptrip.emplace_back(c, c, mass[c]);
                ptrip.emplace_back(c, ne + c, -mass[c]);
                ptrip.emplace_back(ne + c, c, -mass[c]);
            }
        }
        Eigen::SparseMatrix<double> jpot(2 * ne, 2 * ne);
        jpot.setFromTriplets(ptrip.begin(), ptrip.end());
        jpot.makeCompressed();
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldl_pot;
        ldl_pot.compute(jpot);
        if (ldl_pot.info() != Eigen::Success)
            throw std::runtime_error("electrochem: potential block factorization failed");
        Eigen::VectorXd dphi = solve_refined(ldl_pot, jpot, Eigen::VectorXd(-resid));
        for (int c = 0; c < ne; ++c) {
            st.phis[c] += dphi[c];
            st.phie[c] += dphi[ne + c];
        }

        level_shift();
        update_kinetics(j_new);
        for (int c = 0; c < ne; ++c) j_src[c] = (1.0 - omega) * j_src[c] + omega * j_new[c];

        double upd = rel_change(st.c2, c2_prev, conc_scale);
        upd = std::max(upd, rel_change(st.c3, c3_prev, conc_scale));
        upd = std::max(upd, rel_change(st.phis, phis_prev, pot_scale));
        upd = std::max(upd, rel_change(st.phie, phie_prev, pot_scale));
        upd = std::max(upd, rel_change(j_src, j_prev, j_scale));
        st.update_history.push_back(upd);
        st.picard_iters = it;
        st.final_update = upd;

        if (upd < cfg_.picard_tol) {
            converged = true;
            break;
        }
        // Tight tolerances run to the rounding floor; accept once the update
        // stops contracting there instead of spinning to the iteration cap.
        if (upd < 1e-11) {
            stall_count = upd >= 0.5 * last_update ? stall_count + 1 : 0;
            if (stall_count >= 3) {
                converged = true;
                break;
            }
        } else {
            stall_count = 0;
        }
        if (upd > last_update) {
            if (++grow_count >= 3) {
                omega = std::max(0.05, 0.5 * omega);
                grow_count = 0;
            }
        } else {
            grow_count = 0;
        }
        last_update = upd;
    }

    if (!converged) {
        std::ostringstream msg;
        msg << "electrochem: Picard did not converge in " << cfg_.picard_max_iter
            << " iterations; last relative updates:";
        const size_t nh = st.update_history.size();
        for (size_t i = nh > 8 ? nh - 8 : 0; i < nh; ++i) msg << " " << st.update_history[i];
        throw std::runtime_error(msg.str());
    }

    for (int c = 0; c < n; ++c) {
        if (!(st.c2[c] > 0.0) || !(st.c3[c] > 0.0)) {
            int i, jj, k;
            g.cell_ijk(c, i, jj, k);
            std::ostringstream msg;
            msg << "electrochem: non-positive concentration at cell (" << i << "," << jj << ","
                << k << "): c2 = " << st.c2[c] << ", c3 = " << st.c3[c];
            throw std::runtime_error(msg.str());
        }
    }

    // final (unrelaxed) kinetics and volume summaries
    update_kinetics(st.j);
    double vtot = 0.0, jint = 0.0, eta_sum = 0.0, c3s_sum = 0.0;
    for (int c = 0; c < ne; ++c) {
        vtot += vol[c];
        jint += vol[c] * st.j[c];
        eta_sum += vol[c] * std::abs(st.eta[c]);
        c3s_sum += vol[c] * st.c3s[c];
    }
    st.j_integral = jint;
    st.mean_abs_eta = eta_sum / vtot;
    st.mean_c3s = c3s_sum / vtot;

    // vanadium boundary audit (advective + diffusive, both species)
    auto boundary_fluxes = [&](const SpeciesOperator& op, const std::vector<double>& cc,
                               double c_in, double& fin, double& fout) {
        for (const TransportFace& f : op.faces) {
            if (f.kind == TransportFace::InletF) {
                const double pe = f.u * f.area / f.trans;
                fin += f.trans * (bernoulli(-pe) * c_in - bernoulli(pe) * cc[f.cr]);
            } else if (f.kind == TransportFace::OutletF) {
                fout += f.area * f.u * cc[f.cl];
            }
        }
    };
    st.vanadium_in = st.vanadium_out = 0.0;
    boundary_fluxes(op2, st.c2, cfg_.c_in_v2, st.vanadium_in, st.vanadium_out);
    boundary_fluxes(op3r, st.c3, cfg_.c_in_v3, st.vanadium_in, st.vanadium_out);

    return st;
}

ChargeAudit ElectrochemSolver::charge_audit(const ElectroState& st) const {
    const Grid& g = grid_;
    const int nze = g.nz_electrode();
    ChargeAudit audit;
    std::vector<double> jv_below(nze + 1, 0.0); // cumulative integral of j below plane k
    for (int k = 0; k < nze; ++k) {
        double s = 0.0;
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) s += g.cell_volume(g.cell(i, j, k)) * st.j[g.cell(i, j, k)];
        jv_below[k + 1] = jv_below[k] + s;
    }
    audit.j_integral = jv_below[nze];

    const double sig = effective_sigma_s(cfg_);
    auto plane_current = [&](const std::vector<double>& phi, const std::vector<double>& cond,
                             int k) {
        // current in +z across the interior plane between layers k-1 and k
        double s = 0.0;
        for (int j = 0; j < g.ny(); ++j)
            for (int i = 0; i < g.nx(); ++i) {
                const int cd = g.cell(i, j, k - 1), cu = g.cell(i, j, k);
                const double t =
                    g.az() / (0.5 * g.dz(k - 1) / cond[cd] + 0.5 * g.dz(k) / cond[cu]);
                s += t * (phi[cd] - phi[cu]);
            }
        return s;
    };
    std::vector<double> sigv(g.n_electrode_cells(), sig);
    std::vector<double> kapv(g.n_electrode_cells());
    for (int c = 0; c < g.n_electrode_cells(); ++c)
        kapv[c] = kappa_of_cell(st.c2[c], st.c3[c], cfg_);

    const double iref = std::max(1.0, std::abs(cfg_.current));
    for (int k = 1; k < nze; ++k) {
        const double is = plane_current(st.phis, sigv, k);
        const double ie = plane_current(st.phie, kapv, k);
        // charge continuity: electronic current grows with the reaction below,
        // ionic current carries the remainder down to the membrane
        audit.max_plane_mismatch =
            std::max(audit.max_plane_mismatch, std::abs(is - jv_below[k]) / iref);
        audit.max_plane_mismatch =
            std::max(audit.max_plane_mismatch, std::abs(ie - (cfg_.current - jv_below[k])) / iref);
    }
    if (nze > 1) {
        double top_layer_j = jv_below[nze] - jv_below[nze - 1];
        double bot_layer_j = jv_below[1];
        audit.collector_current = plane_current(st.phis, sigv, nze - 1) + top_layer_j;
        audit.membrane_current = plane_current(st.phie, kapv, 1) + bot_layer_j;
    } else {
        audit.collector_current = audit.j_integral;
        audit.membrane_current = audit.j_integral;
    }
    return audit;
}

Eigen::SparseMatrix<double> ElectrochemSolver::jacobian(const FlowState& flow,
                                                        const ElectroState& st) const {
    const Grid& g = grid_;
    const int n = g.ncells();
    const int ne = g.n_electrode_cells();
    const double farad = cfg_.faraday;
    const int off_c3 = n, off_s = 2 * n, off_e = 2 * n + ne;
    const int ny_tot = 2 * n + 2 * ne;

    // kinetics partials at the converged state, slots: c2 c3 phis phie speed;
    // the concentration floor matches the forward closure (zero slope if hit)
    std::vector<CellKinetics<D5>> kin(ne);
    for (int c = 0; c < ne; ++c) {
        const D5 c2d = st.c2[c] > kConcFloor ? D5::seed(st.c2[c], 0) : D5(kConcFloor);
        const D5 c3d = st.c3[c] > kConcFloor ? D5::seed(st.c3[c], 1) : D5(kConcFloor);
        kin[c] = evaluate_cell<D5>(c2d, c3d, D5::seed(st.phis[c], 2), D5::seed(st.phie[c], 3),
                                   D5::seed(st.speed[c], 4), cfg_);
    }

    std::vector<double> vol(ne);
    for (int c = 0; c < ne; ++c) vol[c] = g.cell_volume(c);

    SpeciesOperator op2 = build_species_operator(g, flow, cfg_.diff_v2, cfg_, cfg_.c_in_v2);
    const bool shared = cfg_.diff_v2 == cfg_.diff_v3 && cfg_.c_in_v2 == cfg_.c_in_v3;
    SpeciesOperator op3 =
        shared ? SpeciesOperator{} : build_species_operator(g, flow, cfg_.diff_v3, cfg_, cfg_.c_in_v3);
    const SpeciesOperator& op3r = shared ? op2 : op3;

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<size_t>(ny_tot) * 12);
    auto add_block = [&](const Eigen::SparseMatrix<double>& m, int roff, int coff) {
        for (int k = 0; k < m.outerSize(); ++k)
            for (Eigen::SparseMatrix<double>::InnerIterator it(m, k); it; ++it)
                trip.emplace_back(roff + it.row(), coff + it.col(), it.value());
    };
    add_block(op2.mat, 0, 0);
    add_block(op3r.mat, off_c3, off_c3);

    const std::vector<PotentialFace> pot_faces = build_potential_faces(g);
    const double sig = effective_sigma_s(cfg_);
    double dk2, dk3;
    kappa_coefficients(cfg_, dk2, dk3);
    std::vector<double> kap(ne);
    for (int c = 0; c < ne; ++c)
        kap[c] = kappa_of_cell(std::max(st.c2[c], kConcFloor), std::max(st.c3[c], kConcFloor), cfg_);

    // phi_s block (pinned row) and phi_e block with kappa(c) coupling
    for (const PotentialFace& f : pot_faces) {
        const double ts = sig * f.area / (f.dl + f.dr);
        if (f.cl != pin_cell_) {
            trip.emplace_back(off_s + f.cl, off_s + f.cl, ts);
            trip.emplace_back(off_s + f.cl, off_s + f.cr, -ts);
        }
        if (f.cr != pin_cell_) {
            trip.emplace_back(off_s + f.cr, off_s + f.cr, ts);
            trip.emplace_back(off_s + f.cr, off_s + f.cl, -ts);
        }

        const double denom = f.dl / kap[f.cl] + f.dr / kap[f.cr];
        const double tk = f.area / denom;
        trip.emplace_back(off_e + f.cl, off_e + f.cl, tk);
        trip.emplace_back(off_e + f.cl, off_e + f.cr, -tk);
        trip.emplace_back(off_e + f.cr, off_e + f.cr, tk);
        trip.emplace_back(off_e + f.cr, off_e + f.cl, -tk);
        if (dk2 != 0.0 || dk3 != 0.0) {
            const double dphi = st.phie[f.cl] - st.phie[f.cr];
            const double dT_dkl = f.area * (f.dl / (kap[f.cl] * kap[f.cl])) / (denom * denom);
            const double dT_dkr = f.area * (f.dr / (kap[f.cr] * kap[f.cr])) / (denom * denom);
            const double gl = dphi * dT_dkl, gr = dphi * dT_dkr;
            trip.emplace_back(off_e + f.cl, f.cl, gl * dk2);
            trip.emplace_back(off_e + f.cl, off_c3 + f.cl, gl * dk3);
            trip.emplace_back(off_e + f.cl, f.cr, gr * dk2);
            trip.emplace_back(off_e + f.cl, off_c3 + f.cr, gr * dk3);
            trip.emplace_back(off_e + f.cr, f.cl, -gl * dk2);
            trip.emplace_back(off_e + f.cr, off_c3 + f.cl, -gl * dk3);
            trip.emplace_back(off_e + f.cr, f.cr, -gr * dk2);
            trip.emplace_back(off_e + f.cr, off_c3 + f.cr, -gr * dk3);
        }
    }
    trip.emplace_back(off_s + pin_cell_, off_s + pin_cell_, 1.0);

    // kinetics couplings: rows c2/c3/phis/phie of each electrode cell
    for (int c = 0; c < ne; ++c) {
        const auto& dj = kin[c].j.d;
        const double sc2 = -vol[c] / farad, sc3 = vol[c] / farad;
        const double ss = -vol[c], se = vol[c];
        const int cols[4] = {c, off_c3 + c, off_s + c, off_e + c};
        for (int t = 0; t < 4; ++t) {
            trip.emplace_back(c, cols[t], sc2 * dj[t]);
            trip.emplace_back(off_c3 + c, cols[t], sc3 * dj[t]);
            if (c != pin_cell_) trip.emplace_back(off_s + c, cols[t], ss * dj[t]);
            trip.emplace_back(off_e + c, cols[t], se * dj[t]);
        }
    }

    Eigen::SparseMatrix<double> jac(ny_tot, ny_tot);
    jac.setFromTriplets(trip.begin(), trip.end());
    jac.makeCompressed();
    return jac;
}

ElectrochemSolver::AdjointResult ElectrochemSolver::adjoint(const FlowState& flow,
                                                            const ElectroState& st) const {
    const Grid& g = grid_;
    const int n = g.ncells();
    const int ne = g.n_electrode_cells();
    const double farad = cfg_.faraday;
    const int off_c3 = n, off_s = 2 * n, off_e = 2 * n + ne;
    const int ny_tot = 2 * n + 2 * ne;

    std::vector<CellKinetics<D5>> kin(ne);
    for (int c = 0; c < ne; ++c) {
        const D5 c2d = st.c2[c] > kConcFloor ? D5::seed(st.c2[c], 0) : D5(kConcFloor);
        const D5 c3d = st.c3[c] > kConcFloor ? D5::seed(st.c3[c], 1) : D5(kConcFloor);
        kin[c] = evaluate_cell<D5>(c2d, c3d, D5::seed(st.phis[c], 2), D5::seed(st.phie[c], 3),
                                   D5::seed(st.speed[c], 4), cfg_);
    }

    std::vector<double> vol(ne);
    double vtot = 0.0;
    for (int c = 0; c < ne; ++c) {
        vol[c] = g.cell_volume(c);
        vtot += vol[c];
    }

    SpeciesOperator op2 = build_species_operator(g, flow, cfg_.diff_v2, cfg_, cfg_.c_in_v2);
    const bool shared = cfg_.diff_v2 == cfg_.diff_v3 && cfg_.c_in_v2 == cfg_.c_in_v3;
    SpeciesOperator op3 =
        shared ? SpeciesOperator{} : build_species_operator(g, flow, cfg_.diff_v3, cfg_, cfg_.c_in_v3);
    const SpeciesOperator& op3r = shared ? op2 : op3;

    Eigen::SparseMatrix<double> jac_t = jacobian(flow, st).transpose();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(jac_t);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("electrochem adjoint: Jacobian factorization failed");

    Eigen::VectorXd dFdy = Eigen::VectorXd::Zero(ny_tot);
    for (int c = 0; c < ne; ++c) {
        const double wc = vol[c] / vtot;
        const auto& dc3s = kin[c].c3s.d;
        dFdy[c] += wc * dc3s[0];
        dFdy[off_c3 + c] += wc * dc3s[1];
        dFdy[off_s + c] += wc * dc3s[2];
        dFdy[off_e + c] += wc * dc3s[3];
    }

    AdjointResult res;
    res.lambda = solve_refined(lu, jac_t, dFdy);
    if (lu.info() != Eigen::Success)
        throw std::runtime_error("electrochem adjoint: solve failed");

    res.du.assign(g.nfx(), 0.0);
    res.dv.assign(g.nfy(), 0.0);
    res.dw.assign(g.nfz(), 0.0);
    auto scatter = [&](int orient, int faceid, double val) {
        if (orient == 0)
            res.du[faceid] += val;
        else if (orient == 1)
            res.dv[faceid] += val;
        else
            res.dw[faceid] += val;
    };

    // advection sensitivity of the transport residuals
    auto advection_terms = [&](const SpeciesOperator& op, const std::vector<double>& cc,
                               double c_in, int roff) {
        for (const TransportFace& f : op.faces) {
            double dflux_du = 0.0, lam = 0.0;
            switch (f.kind) {
                case TransportFace::InteriorF: {
                    const double pe = f.u * f.area / f.trans;
                    dflux_du =
                        f.area * (-bernoulli_deriv(-pe) * cc[f.cl] - bernoulli_deriv(pe) * cc[f.cr]);
                    lam = res.lambda[roff + f.cl] - res.lambda[roff + f.cr];
                    break;
                }
                case TransportFace::InletF: {
                    const double pe = f.u * f.area / f.trans;
                    dflux_du =
                        f.area * (-bernoulli_deriv(-pe) * c_in - bernoulli_deriv(pe) * cc[f.cr]);
                    lam = -res.lambda[roff + f.cr];
                    break;
                }
                case TransportFace::OutletF: {
                    dflux_du = f.area * cc[f.cl];
                    lam = res.lambda[roff + f.cl];
                    break;
                }
            }
            scatter(f.orient, f.faceid, -lam * dflux_du);
        }
    };
    advection_terms(op2, st.c2, cfg_.c_in_v2, 0);
    advection_terms(op3r, st.c3, cfg_.c_in_v3, off_c3);

    // mass-transfer (speed) path: objective term plus residual couplings
    for (int c = 0; c < ne; ++c) {
        if (st.speed[c] <= cfg_.km_floor) continue; // k_m pinned at the floor
        const double dj_ds = kin[c].j.d[4];
        const double dc3s_ds = kin[c].c3s.d[4];
        double t = (vol[c] / vtot) * dc3s_ds;
        t += (vol[c] / farad) * (res.lambda[c] - res.lambda[off_c3 + c]) * dj_ds;
        const double lam_s = c == pin_cell_ ? 0.0 : res.lambda[off_s + c];
        t += vol[c] * (lam_s - res.lambda[off_e + c]) * dj_ds;
        if (t == 0.0) continue;
        int i, jj, k;
        g.cell_ijk(c, i, jj, k);
        double ux, uy, uz;
        flow.cell_velocity(g, c, ux, uy, uz);
        const double inv2s = 0.5 / st.speed[c];
        scatter(0, g.fx(i, jj, k), t * ux * inv2s);
        scatter(0, g.fx(i + 1, jj, k), t * ux * inv2s);
        scatter(1, g.fy(i, jj, k), t * uy * inv2s);
        scatter(1, g.fy(i, jj + 1, k), t * uy * inv2s);
        scatter(2, g.fz(i, jj, k), t * uz * inv2s);
        scatter(2, g.fz(i, jj, k + 1), t * uz * inv2s);
    }

    return res;
}

ElectroState solve_electrochem(const Grid& grid, const FlowState& flow, const CaseConfig& cfg) {
    ElectrochemSolver solver(grid, cfg);
    return solver.solve(flow);
}

} // namespace vrfb
