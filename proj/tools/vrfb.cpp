/// @file vrfb.cpp
/// @brief Command-line driver: optimize | evaluate | sweep | gradcheck.
///        Writes results, VTK exports, CSV tables and a run manifest into
///        the chosen output directory.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <Eigen/Core>

#include "vrfb/config.hpp"
#include "vrfb/electrochem.hpp"
#include "vrfb/flow.hpp"
#include "vrfb/flowfields.hpp"
#include "vrfb/grid.hpp"
#include "vrfb/topopt.hpp"
#include "vrfb/vtk.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace vrfb;

namespace {

constexpr const char* kVersion = "0.1.0";

std::string iso_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::string started_at;
    json solver = json::object();
    std::vector<std::string> outputs;

    void write(const fs::path& dir) {
        outputs.push_back("manifest.json");
        json doc;
        doc["version"] = kVersion;
        doc["command"] = command;
        doc["config_hash"] = config_hash;
        doc["started_at"] = started_at;
        doc["finished_at"] = iso_now();
        doc["solver"] = solver;
        doc["outputs"] = outputs;
        std::ofstream out(dir / "manifest.json");
        out << doc.dump(2) << "\n";
        if (!out) throw std::runtime_error("failed writing manifest.json");
    }
};

json grid_echo(const Grid& g) {
    json j;
    j["nx"] = g.nx();
    j["ny"] = g.ny();
    j["nz_electrode"] = g.nz_electrode();
    j["nz_channel"] = g.nz_channel();
    j["cells"] = g.ncells();
    j["design_cells"] = g.n_design_cells();
    j["hx"] = g.hx();
    j["hy"] = g.hy();
    j["hz_electrode"] = g.dz(0);
    j["hz_channel"] = g.dz(g.nz() - 1);
    j["length"] = g.length();
    j["width"] = g.width();
    j["electrode_thickness"] = g.electrode_thickness();
    j["channel_thickness"] = g.channel_thickness();
    return j;
}

CaseConfig load_config(const std::string& path, std::optional<double> current,
                       std::optional<double> porosity) {
    CaseConfig cfg = path.empty() ? CaseConfig{} : parse_config(path);
    if (current) cfg.current = *current;
    if (porosity) cfg.porosity = *porosity;
    cfg.validate();
    return cfg;
}

fs::path prepare_outdir(const std::string& out) {
    fs::path dir(out.empty() ? "." : out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
    const fs::path probe = dir / ".vrfb_probe";
    {
        std::ofstream f(probe);
        if (!f) throw std::runtime_error("output directory '" + dir.string() + "' is not writable");
    }
    fs::remove(probe, ec);
    return dir;
}

std::vector<double> design_by_name(const std::string& name, const Grid& grid,
                                   const CaseConfig& cfg) {
    if (name == "parallel")
        return generate_reference(reference_spec_from_config(ReferenceKind::Parallel, cfg), grid);
    if (name == "interdigitated")
        return generate_reference(reference_spec_from_config(ReferenceKind::Interdigitated, cfg),
                                  grid);
    if (name == "open") return std::vector<double>(grid.n_design_cells(), 1.0);
    if (name.rfind("file:", 0) == 0) {
        DensitySnapshot snap = read_density_snapshot(name.substr(5));
        if (snap.nx != grid.nx() || snap.ny != grid.ny() || snap.nz != grid.nz_channel())
            throw std::runtime_error("design snapshot dimensions do not match the grid");
        // re-evaluation convention: filter, then threshold to a binary field
        std::vector<double> rho = snap.rho;
        PdeFilter filter(grid, cfg.filter_radius < 0.0 ? default_filter_radius(grid)
                                                       : cfg.filter_radius);
        std::vector<double> rt = filter.apply(rho);
        for (size_t i = 0; i < rho.size(); ++i) rho[i] = rt[i] >= cfg.threshold ? 1.0 : 0.0;
        return rho;
    }
    throw std::runtime_error("unknown design '" + name +
                             "' (expected parallel|interdigitated|open|file:<snapshot>)");
}

void export_fields(const fs::path& path, const Grid& grid, const FlowState& flow,
                   const ElectroState& electro, bool binary) {
    std::vector<double> vel = cell_velocity_field(grid, flow);
    std::vector<double> phis = expand_electrode_field(grid, electro.phis, 0.0);
    std::vector<double> phie = expand_electrode_field(grid, electro.phie, 0.0);
    std::vector<double> jj = expand_electrode_field(grid, electro.j, 0.0);
    std::vector<double> eta = expand_electrode_field(grid, electro.eta, 0.0);
    std::vector<double> c3s = expand_electrode_field(grid, electro.c3s, 0.0);
    const std::vector<VtkField> fields = {
        {"velocity", 3, &vel},   {"pressure", 1, &flow.p}, {"c_v2", 1, &electro.c2},
        {"c_v3", 1, &electro.c3}, {"phi_s", 1, &phis},      {"phi_e", 1, &phie},
        {"j", 1, &jj},            {"eta", 1, &eta},         {"c_v3_surf", 1, &c3s},
    };
    export_vtk(path.string(), vtk_box_full(grid), fields, binary);
}

int cmd_optimize(const std::string& config_path, const std::string& out, const std::string& resume,
                 int threads, bool binary_vtk) {
    Eigen::setNbThreads(threads);
    CaseConfig cfg = load_config(config_path, std::nullopt, std::nullopt);
    Grid grid(cfg);
    fs::path dir = prepare_outdir(out);

    RunManifest manifest;
    manifest.command = "optimize";
    manifest.config_hash = config_hash(cfg);
    manifest.started_at = iso_now();
    manifest.solver["grid"] = grid_echo(grid);

    std::vector<double> rho0;
    int start_iter = 0;
    if (!resume.empty()) {
        DensitySnapshot snap = read_density_snapshot(resume);
        if (snap.nx != grid.nx() || snap.ny != grid.ny() || snap.nz != grid.nz_channel())
            throw std::runtime_error("resume snapshot dimensions do not match the grid");
        rho0 = snap.rho;
        start_iter = snap.iteration + 1;
        std::printf("resuming from %s at iteration %d\n", resume.c_str(), start_iter);
    }

    OptimizeCallbacks cb;
    cb.on_iteration = [&](int iter, const DensityField& density) {
        if ((iter - start_iter) % cfg.snapshot_every != 0) return;
        char name[64];
        std::snprintf(name, sizeof(name), "rho_%04d.bin", iter);
        write_density_snapshot((dir / name).string(), grid, iter, density.rho);
        manifest.outputs.push_back(name);
        std::snprintf(name, sizeof(name), "rho_%04d.vtk", iter);
        const std::vector<VtkField> fields = {{"rho", 1, &density.rho},
                                              {"rho_tilde", 1, &density.rho_tilde}};
        export_vtk((dir / name).string(), vtk_box_design_layer(grid), fields, binary_vtk);
        manifest.outputs.push_back(name);
    };

    OptimizeResult result = optimize(grid, cfg, cb, rho0.empty() ? nullptr : &rho0, start_iter);

    {
        std::ofstream trace(dir / "trace.csv");
        trace << "iteration,objective,delta_p,flow_rate,mean_abs_eta,max_density_change\n";
        char line[256];
        for (const OptIterRecord& r : result.trace.records) {
            std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.iteration,
                          r.objective, r.dp, r.q, r.mean_abs_eta, r.max_drho);
            trace << line;
        }
        manifest.outputs.push_back("trace.csv");
    }

    write_density_snapshot((dir / "rho_final.bin").string(), grid,
                           result.trace.records.back().iteration, result.density.rho);
    manifest.outputs.push_back("rho_final.bin");
    {
        const std::vector<VtkField> fields = {{"rho", 1, &result.density.rho},
                                              {"rho_tilde", 1, &result.density.rho_tilde}};
        export_vtk((dir / "rho_final.vtk").string(), vtk_box_design_layer(grid), fields,
                   binary_vtk);
        manifest.outputs.push_back("rho_final.vtk");
    }

    manifest.solver["iterations"] = static_cast<int>(result.trace.records.size());
    manifest.solver["converged"] = result.trace.converged;
    manifest.solver["initial_objective"] = result.trace.records.front().objective;
    manifest.solver["final_objective"] = result.trace.records.back().objective;
    manifest.write(dir);

    std::printf("optimize: %zu iterations, F %.6g -> %.6g, %s\n", result.trace.records.size(),
                result.trace.records.front().objective, result.trace.records.back().objective,
                result.trace.converged ? "converged" : "iteration cap reached");
    return 0;
}

int cmd_evaluate(const std::string& config_path, const std::string& out, const std::string& design,
                 std::optional<double> flowrate, std::optional<double> current,
                 std::optional<double> porosity, int threads, bool export_field_vtk,
                 bool binary_vtk) {
    Eigen::setNbThreads(threads);
    CaseConfig cfg = load_config(config_path, current, porosity);
    Grid grid(cfg);
    fs::path dir = prepare_outdir(out);

    RunManifest manifest;
    manifest.command = "evaluate";
    manifest.config_hash = config_hash(cfg);
    manifest.started_at = iso_now();
    manifest.solver["grid"] = grid_echo(grid);

    std::vector<double> rho = design_by_name(design, grid, cfg);

    OperatingPoint op;
    op.current = cfg.current;
    op.porosity = cfg.porosity;
    op.flow_rate = flowrate;

    FlowState flow;
    ElectroState electro;
    PerformanceReport rep = evaluate_design(grid, cfg, rho, op, design, &flow, &electro);

    std::cout << report_csv_header() << "\n" << report_csv_row(rep) << "\n";
    {
        std::ofstream csv(dir / "report.csv");
        csv << report_csv_header() << "\n" << report_csv_row(rep) << "\n";
        manifest.outputs.push_back("report.csv");
    }
    if (export_field_vtk) {
        export_fields(dir / "fields.vtk", grid, flow, electro, binary_vtk);
        manifest.outputs.push_back("fields.vtk");
    }
    manifest.solver["picard_iterations"] = electro.picard_iters;
    manifest.write(dir);
    return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& out,
              const std::vector<std::string>& design_names, const std::vector<double>& flowrates,
              const std::vector<double>& currents, const std::vector<double>& porosities,
              int threads) {
    Eigen::setNbThreads(threads);
    CaseConfig cfg = load_config(config_path, std::nullopt, std::nullopt);
    Grid grid(cfg);
    fs::path dir = prepare_outdir(out);

    RunManifest manifest;
    manifest.command = "sweep";
    manifest.config_hash = config_hash(cfg);
    manifest.started_at = iso_now();
    manifest.solver["grid"] = grid_echo(grid);

    std::vector<SweepDesign> designs;
    for (const std::string& name : design_names)
        designs.push_back({name, design_by_name(name, grid, cfg)});

    std::vector<OperatingPoint> points;
    const std::vector<double> qs = flowrates.empty() ? std::vector<double>{1e-6} : flowrates;
    const std::vector<double> is = currents.empty() ? std::vector<double>{cfg.current} : currents;
    const std::vector<double> eps =
        porosities.empty() ? std::vector<double>{cfg.porosity} : porosities;
    for (double e : eps)
        for (double i : is)
            for (double q : qs) {
                OperatingPoint op;
                op.current = i;
                op.porosity = e;
                op.flow_rate = q;
                points.push_back(op);
            }

    std::vector<PerformanceReport> reports = sweep(grid, cfg, designs, points);
    {
        std::ofstream csv(dir / "sweep.csv");
        csv << report_csv_header() << "\n";
        for (const PerformanceReport& r : reports) csv << report_csv_row(r) << "\n";
        manifest.outputs.push_back("sweep.csv");
    }
    std::cout << report_csv_header() << "\n";
    for (const PerformanceReport& r : reports) std::cout << report_csv_row(r) << "\n";

    manifest.solver["rows"] = static_cast<int>(reports.size());
    manifest.write(dir);
    return 0;
}

int cmd_gradcheck(const std::string& config_path, int cells, double step, int threads) {
    Eigen::setNbThreads(threads);
    CaseConfig cfg = load_config(config_path, std::nullopt, std::nullopt);
    Grid grid(cfg);
    GradCheckResult res = gradient_check(grid, cfg, cells, step);
    std::printf("%-12s %-17s %-17s %s\n", "design_cell", "adjoint", "central_fd", "rel_err");
    for (const GradCheckEntry& e : res.entries)
        std::printf("%-12d %+.9e %+.9e %.3e\n", e.design_cell, e.adjoint, e.fd, e.rel_err);
    std::printf("max relative error: %.6e (threshold 1e-4)\n", res.max_rel_err);
    return res.max_rel_err < 1e-4 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Flow-field design tool for vanadium redox flow battery half-cells"};
    app.require_subcommand(1);

    std::string config_path, out = "run", design = "interdigitated", resume;
    int threads = 1;
    bool binary_vtk = false, export_field_vtk = false;
    std::optional<double> flowrate, current, porosity;
    std::vector<std::string> design_names;
    std::vector<double> flowrates, currents, porosities;
    int gc_cells = 10;
    double gc_step = 1e-5;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "case configuration file (key = value)");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--threads", threads,
                        "linear-algebra thread count (results are serial-deterministic)");
    };

    CLI::App* opt = app.add_subcommand("optimize", "run the density-method design loop");
    add_common(opt);
    opt->add_option("--resume", resume, "density snapshot (.bin) to resume from");
    opt->add_flag("--binary-vtk", binary_vtk, "write binary (big-endian) VTK instead of ASCII");

    CLI::App* ev = app.add_subcommand("evaluate", "evaluate one design at one operating point");
    add_common(ev);
    ev->add_option("--design", design, "parallel|interdigitated|open|file:<snapshot.bin>");
    ev->add_option("--flowrate", flowrate, "target flow rate [m^3/s] (otherwise pressure-driven)");
    ev->add_option("--current", current, "applied current override [A]");
    ev->add_option("--porosity", porosity, "electrode porosity override");
    ev->add_flag("--export-fields", export_field_vtk, "write fields.vtk with u, p, c, phi, j, eta");
    ev->add_flag("--binary-vtk", binary_vtk, "write binary (big-endian) VTK instead of ASCII");

    CLI::App* sw = app.add_subcommand("sweep", "cross-product of designs and operating points");
    add_common(sw);
    sw->add_option("--designs", design_names, "design list")->delimiter(',');
    sw->add_option("--flowrates", flowrates, "flow-rate list [m^3/s]")->delimiter(',');
    sw->add_option("--currents", currents, "current list [A]")->delimiter(',');
    sw->add_option("--porosities", porosities, "porosity list")->delimiter(',');

    CLI::App* gc = app.add_subcommand("gradcheck", "adjoint vs finite-difference gradient check");
    add_common(gc);
    gc->add_option("--cells", gc_cells, "number of sampled design cells");
    gc->add_option("--step", gc_step, "central finite-difference step");

    CLI11_PARSE(app, argc, argv);

    try {
        if (opt->parsed()) return cmd_optimize(config_path, out, resume, threads, binary_vtk);
        if (ev->parsed())
            return cmd_evaluate(config_path, out, design, flowrate, current, porosity, threads,
                                export_field_vtk, binary_vtk);
        if (sw->parsed()) {
            if (design_names.empty()) design_names = {"parallel", "interdigitated"};
            return cmd_sweep(config_path, out, design_names, flowrates, currents, porosities,
                             threads);
        }
        if (gc->parsed()) return cmd_gradcheck(config_path, gc_cells, gc_step, threads);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
