/// @file vtk.hpp
/// @brief Legacy VTK export of cell-centered fields. Uniform-spacing grids
///        are written as STRUCTURED_POINTS; the two-layer domain with
///        distinct sublayer thicknesses falls back to RECTILINEAR_GRID
///        (same legacy dialect, exact z geometry). Binary mode writes
///        big-endian float64 as the legacy format requires.

#pragma once

#include <string>
#include <vector>

#include "vrfb/flow.hpp"
#include "vrfb/grid.hpp"

namespace vrfb {

struct VtkField {
    std::string name;
    int ncomp = 1;                    // 1 scalar, 3 vector
    const std::vector<double>* data;  // ncells * ncomp, component-major per cell
};

/// Geometry description independent of the Grid class so design-layer-only
/// exports can reuse the writer.
struct VtkBox {
    int nx, ny, nz;
    double ox, oy, oz;
    double hx, hy;
    std::vector<double> dz; // per-layer thickness, size nz
    bool uniform_z() const;
};

VtkBox vtk_box_full(const Grid& grid);
VtkBox vtk_box_design_layer(const Grid& grid);

void export_vtk(const std::string& path, const VtkBox& box, const std::vector<VtkField>& fields,
                bool binary, const std::string& title = "vrfb fields");

/// Cell-centered vector field (3 components per cell) from face velocities.
std::vector<double> cell_velocity_field(const Grid& grid, const FlowState& flow);

/// Expand an electrode-only field (size n_electrode_cells) to the full grid,
/// padding design-layer cells with the given value.
std::vector<double> expand_electrode_field(const Grid& grid, const std::vector<double>& f,
                                           double pad);

} // namespace vrfb
