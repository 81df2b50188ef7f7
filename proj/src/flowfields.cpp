#include "vrfb/flowfields.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace vrfb {

ReferenceFieldSpec reference_spec_from_config(ReferenceKind kind, const CaseConfig& cfg) {
    ReferenceFieldSpec spec;
    spec.kind = kind;
    spec.channel_width = cfg.channel_width;
    spec.channel_pitch = cfg.channel_pitch;
    spec.manifold_width = cfg.manifold_width;
    return spec;
}

namespace {

std::vector<double> channel_centers(double width, double pitch, double w) {
    // symmetric around the mid-width, as many as fit inside [0, W]
    std::vector<double> centers{0.5 * w};
    for (int k = 1;; ++k) {
        const double lo = 0.5 * w - k * pitch;
        const double hi = 0.5 * w + k * pitch;
        if (lo - 0.5 * width < 0.0 || hi + 0.5 * width > w) break;
        centers.push_back(lo);
        centers.push_back(hi);
    }
    std::sort(centers.begin(), centers.end());
    return centers;
}

// Width-preserving rasterization: a feature of the given width maps to
// max(1, round(width/h)) whole columns centered at its centerline, so the
// rendered width is always within half a cell of the requested one.
int width_cols(double width, double h) {
    return std::max(1, static_cast<int>(std::lround(width / h)));
}

void centered_cols(double center, double width, double h, int n, int& i0, int& i1) {
    const int cols = width_cols(width, h);
    i0 = static_cast<int>(std::floor(center / h - 0.5 * cols + 0.5));
    i0 = std::max(0, std::min(i0, n - cols));
    i1 = i0 + cols;
}

} // namespace

std::vector<double> generate_reference(const ReferenceFieldSpec& spec, const Grid& grid) {
    const double L = grid.length(), W = grid.width();
    const double cw = spec.channel_width, pitch = spec.channel_pitch, mw = spec.manifold_width;
    if (cw <= 0.0 || pitch <= cw || mw <= 0.0)
        throw std::invalid_argument("generate_reference: width/pitch/manifold must be positive, pitch > width");
    if (cw > W)
        throw std::invalid_argument("generate_reference: channel wider than the cell footprint");
    const double gap = pitch - cw; // rib gap, also the dead-end standoff
    if (2.0 * mw + gap >= L)
        throw std::invalid_argument("generate_reference: manifolds and dead-end gap exceed the cell length");

    // a rib of at least one cell must fit between adjacent channels
    if (width_cols(pitch, grid.hy()) < width_cols(cw, grid.hy()) + 1)
        throw std::invalid_argument(
            "generate_reference: grid too coarse to separate channels at this pitch");

    const std::vector<double> centers = channel_centers(cw, pitch, W);
    const int nx = grid.nx(), ny = grid.ny();
    const int nd = grid.n_design_cells();
    std::vector<double> rho(nd, 0.0);

    auto open_column = [&](int i0, int i1, int j0, int j1) {
        for (int k = grid.nz_electrode(); k < grid.nz(); ++k)
            for (int j = j0; j < j1; ++j)
                for (int i = i0; i < i1; ++i)
                    rho[grid.design_index(grid.cell(i, j, k))] = 1.0;
    };

    // manifolds along the inlet and outlet faces, full width
    const int mcols = width_cols(mw, grid.hx());
    const int gcols = width_cols(gap, grid.hx()); // dead-end standoff
    if (2 * mcols + gcols >= nx)
        throw std::invalid_argument("generate_reference: grid too coarse for the manifold layout");
    open_column(0, mcols, 0, ny);
    open_column(nx - mcols, nx, 0, ny);

    for (size_t t = 0; t < centers.size(); ++t) {
        int j0, j1;
        centered_cols(centers[t], cw, grid.hy(), ny, j0, j1);
        int i0, i1;
        if (spec.kind == ReferenceKind::Parallel) {
            i0 = mcols;
            i1 = nx - mcols;
        } else if (t % 2 == 0) { // inlet-fed finger, dead-ended near the outlet manifold
            i0 = mcols;
            i1 = nx - mcols - gcols;
        } else { // outlet-fed finger
            i0 = mcols + gcols;
            i1 = nx - mcols;
        }
        if (i1 > i0) open_column(i0, i1, j0, j1);
    }
    return rho;
}

bool through_connected(const Grid& grid, const std::vector<double>& rho, double threshold) {
    if (static_cast<int>(rho.size()) != grid.n_design_cells())
        throw std::invalid_argument("through_connected: density size mismatch");
    const int nx = grid.nx(), ny = grid.ny(), nze = grid.nz_electrode(), nz = grid.nz();
    auto fluid = [&](int i, int j, int k) {
        return rho[grid.design_index(grid.cell(i, j, k))] >= threshold;
    };
    std::vector<char> seen(rho.size(), 0);
    std::queue<std::array<int, 3>> queue;
    for (int k = nze; k < nz; ++k)
        for (int j = 0; j < ny; ++j) {
            if (grid.patch_fx(0, j, k) == Patch::Inlet && fluid(0, j, k)) {
                const int d = grid.design_index(grid.cell(0, j, k));
                if (!seen[d]) {
                    seen[d] = 1;
                    queue.push({0, j, k});
                }
            }
        }
    while (!queue.empty()) {
        auto [i, j, k] = queue.front();
        queue.pop();
        if (i == nx - 1 && grid.patch_fx(nx, j, k) == Patch::Outlet) return true;
        const int di[6] = {1, -1, 0, 0, 0, 0};
        const int dj[6] = {0, 0, 1, -1, 0, 0};
        const int dk[6] = {0, 0, 0, 0, 1, -1};
        for (int t = 0; t < 6; ++t) {
            const int ii = i + di[t], jj = j + dj[t], kk = k + dk[t];
            if (ii < 0 || ii >= nx || jj < 0 || jj >= ny || kk < nze || kk >= nz) continue;
            if (!fluid(ii, jj, kk)) continue;
            const int d = grid.design_index(grid.cell(ii, jj, kk));
            if (seen[d]) continue;
            seen[d] = 1;
            queue.push({ii, jj, kk});
        }
    }
    return false;
}

int count_y_channels(const Grid& grid, const std::vector<double>& rho, double threshold) {
    const int i = grid.nx() / 2;
    const int k = grid.nz() - 1;
    int count = 0;
    bool in_run = false;
    for (int j = 0; j < grid.ny(); ++j) {
        const bool open = rho[grid.design_index(grid.cell(i, j, k))] >= threshold;
        if (open && !in_run) ++count;
        in_run = open;
    }
    return count;
}

PerformanceReport evaluate_design(const Grid& grid, const CaseConfig& cfg,
                                  const std::vector<double>& rho, const OperatingPoint& op,
                                  const std::string& name, FlowState* flow_out,
                                  ElectroState* electro_out) {
    PerformanceReport rep;
    rep.design = name;
    rep.current = op.current;
    rep.porosity = op.porosity;
    rep.flow_rate_target = op.flow_rate.value_or(0.0);

    CaseConfig run = cfg;
    run.current = op.current;
    run.porosity = op.porosity;
    if (op.dp) run.p_in = run.p_out + *op.dp;
    run.validate();

    FlowSolver fsolver(grid, run);
    fsolver.assemble(build_alpha_field(grid, rho, run));

    double dp = run.p_in - run.p_out;
    FlowState flow = fsolver.solve(dp);
    if (op.flow_rate) {
        const double q_t = *op.flow_rate;
        // Stokes linearity: Q is proportional to the pressure drop
        double dp_prev = dp, q_prev = flow.q_in;
        dp = dp * q_t / flow.q_in;
        flow = fsolver.solve(dp);
        for (int it = 0; it < 5 && std::abs(flow.q_in - q_t) > 5e-3 * std::abs(q_t); ++it) {
            const double slope = (flow.q_in - q_prev) / (dp - dp_prev);
            dp_prev = dp;
            q_prev = flow.q_in;
            dp += (q_t - flow.q_in) / slope;
            flow = fsolver.solve(dp);
        }
        if (std::abs(flow.q_in - q_t) > 5e-3 * std::abs(q_t))
            throw std::runtime_error("evaluate_design: flow-rate targeting missed 0.5% tolerance");
    }

    ElectrochemSolver esolver(grid, run);
    ElectroState electro = esolver.solve(flow);

    rep.dp = flow.dp;
    rep.q = flow.q_in;
    rep.mean_abs_eta = electro.mean_abs_eta;
    rep.objective = electro.mean_c3s;
    rep.polarization_loss = run.current * electro.mean_abs_eta;
    rep.pumping_loss = flow.q_in * flow.dp;
    rep.power_loss = rep.polarization_loss + rep.pumping_loss;

    if (flow_out) *flow_out = std::move(flow);
    if (electro_out) *electro_out = std::move(electro);
    return rep;
}

std::vector<PerformanceReport> sweep(const Grid& grid, const CaseConfig& cfg,
                                     const std::vector<SweepDesign>& designs,
                                     const std::vector<OperatingPoint>& points) {
    if (designs.empty() || points.empty())
        throw std::invalid_argument("sweep: designs and operating points must be non-empty");
    std::vector<PerformanceReport> out;
    out.reserve(designs.size() * points.size());
    for (const SweepDesign& d : designs)
        for (const OperatingPoint& p : points) {
            try {
                out.push_back(evaluate_design(grid, cfg, d.rho, p, d.name));
            } catch (const std::exception& e) {
                PerformanceReport rep;
                rep.design = d.name;
                rep.current = p.current;
                rep.porosity = p.porosity;
                rep.flow_rate_target = p.flow_rate.value_or(0.0);
                rep.ok = false;
                rep.error = e.what();
                out.push_back(rep);
            }
        }
    return out;
}

std::string report_csv_header() {
    return "design,current,porosity,flow_rate_target,flow_rate,delta_p,objective,"
           "mean_abs_eta,polarization_loss,pumping_loss,power_loss,status";
}

std::string report_csv_row(const PerformanceReport& r) {
    char buf[384];
    std::snprintf(buf, sizeof(buf),
                  "%s,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,",
                  r.design.c_str(), r.current, r.porosity, r.flow_rate_target, r.q, r.dp,
                  r.objective, r.mean_abs_eta, r.polarization_loss, r.pumping_loss, r.power_loss);
    std::string row(buf);
    if (r.ok) {
        row += "ok";
    } else {
        std::string err = "error:" + r.error;
        std::replace(err.begin(), err.end(), ',', ';');
        row += err;
    }
    return row;
}

} // namespace vrfb
