#include "vrfb/vtk.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace vrfb {

bool VtkBox::uniform_z() const {
    for (double d : dz)
        if (std::abs(d - dz.front()) > 1e-12 * dz.front()) return false;
    return true;
}

VtkBox vtk_box_full(const Grid& grid) {
    VtkBox b;
    b.nx = grid.nx();
    b.ny = grid.ny();
    b.nz = grid.nz();
    b.ox = b.oy = b.oz = 0.0;
    b.hx = grid.hx();
    b.hy = grid.hy();
    b.dz.resize(b.nz);
    for (int k = 0; k < b.nz; ++k) b.dz[k] = grid.dz(k);
    return b;
}

VtkBox vtk_box_design_layer(const Grid& grid) {
    VtkBox b;
    b.nx = grid.nx();
    b.ny = grid.ny();
    b.nz = grid.nz_channel();
    b.ox = b.oy = 0.0;
    b.oz = grid.electrode_thickness();
    b.hx = grid.hx();
    b.hy = grid.hy();
    b.dz.assign(b.nz, grid.dz(grid.nz() - 1));
    return b;
}

namespace {

void write_doubles(std::ofstream& out, const double* data, size_t n, bool binary) {
    if (binary) {
        // legacy VTK binary payloads are big-endian
        for (size_t i = 0; i < n; ++i) {
            uint64_t bits;
            std::memcpy(&bits, &data[i], 8);
            if constexpr (std::endian::native == std::endian::little) {
                bits = __builtin_bswap64(bits);
            }
            out.write(reinterpret_cast<const char*>(&bits), 8);
        }
        out << "\n";
    } else {
        char buf[32];
        for (size_t i = 0; i < n; ++i) {
            std::snprintf(buf, sizeof(buf), "%.9g", data[i]);
            out << buf << ((i + 1) % 6 == 0 ? "\n" : " ");
        }
        if (n % 6 != 0) out << "\n";
    }
}

} // namespace

void export_vtk(const std::string& path, const VtkBox& box, const std::vector<VtkField>& fields,
                bool binary, const std::string& title) {
    const size_t ncells = static_cast<size_t>(box.nx) * box.ny * box.nz;
    for (const VtkField& f : fields) {
        if (!f.data || f.data->size() != ncells * f.ncomp)
            throw std::invalid_argument("export_vtk: field '" + f.name + "' has wrong size");
        if (f.ncomp != 1 && f.ncomp != 3)
            throw std::invalid_argument("export_vtk: only scalars and 3-vectors supported");
    }

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");

    out << "# vtk DataFile Version 3.0\n" << title << "\n";
    out << (binary ? "BINARY\n" : "ASCII\n");

    if (box.uniform_z()) {
        out << "DATASET STRUCTURED_POINTS\n";
        out << "DIMENSIONS " << box.nx + 1 << " " << box.ny + 1 << " " << box.nz + 1 << "\n";
        char buf[160];
        std::snprintf(buf, sizeof(buf), "ORIGIN %.9g %.9g %.9g\n", box.ox, box.oy, box.oz);
        out << buf;
        std::snprintf(buf, sizeof(buf), "SPACING %.9g %.9g %.9g\n", box.hx, box.hy, box.dz[0]);
        out << buf;
    } else {
        out << "DATASET RECTILINEAR_GRID\n";
        out << "DIMENSIONS " << box.nx + 1 << " " << box.ny + 1 << " " << box.nz + 1 << "\n";
        std::vector<double> coords;
        coords.reserve(box.nx + 1);
        for (int i = 0; i <= box.nx; ++i) coords.push_back(box.ox + i * box.hx);
        out << "X_COORDINATES " << box.nx + 1 << " double\n";
        write_doubles(out, coords.data(), coords.size(), binary);
        coords.clear();
        for (int j = 0; j <= box.ny; ++j) coords.push_back(box.oy + j * box.hy);
        out << "Y_COORDINATES " << box.ny + 1 << " double\n";
        write_doubles(out, coords.data(), coords.size(), binary);
        coords.clear();
        double z = box.oz;
        coords.push_back(z);
        for (int k = 0; k < box.nz; ++k) coords.push_back(z += box.dz[k]);
        out << "Z_COORDINATES " << box.nz + 1 << " double\n";
        write_doubles(out, coords.data(), coords.size(), binary);
    }

    out << "CELL_DATA " << ncells << "\n";
    for (const VtkField& f : fields) {
        if (f.ncomp == 1) {
            out << "SCALARS " << f.name << " double 1\n";
            out << "LOOKUP_TABLE default\n";
        } else {
            out << "VECTORS " << f.name << " double\n";
        }
        write_doubles(out, f.data->data(), f.data->size(), binary);
    }
    if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

std::vector<double> cell_velocity_field(const Grid& grid, const FlowState& flow) {
    std::vector<double> vec(static_cast<size_t>(grid.ncells()) * 3);
    for (int c = 0; c < grid.ncells(); ++c) {
        double ux, uy, uz;
        flow.cell_velocity(grid, c, ux, uy, uz);
        vec[3 * c + 0] = ux;
        vec[3 * c + 1] = uy;
        vec[3 * c + 2] = uz;
    }
    return vec;
}

std::vector<double> expand_electrode_field(const Grid& grid, const std::vector<double>& f,
                                           double pad) {
    if (static_cast<int>(f.size()) != grid.n_electrode_cells())
        throw std::invalid_argument("expand_electrode_field: size mismatch");
    std::vector<double> out(grid.ncells(), pad);
    for (int c = 0; c < grid.n_electrode_cells(); ++c) out[c] = f[c];
    return out;
}

} // namespace vrfb
